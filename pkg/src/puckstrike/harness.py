"""Experiment harness: seeded runs, the evaluation protocol, and sweeps.

A run is fully determined by its config (including the seed): the network
init, environment resets, agent randomness, probe set and evaluation
episodes all draw from independent streams spawned from that one seed, so
identical configs produce byte-identical metrics files.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .agents import ActionGrid, TrainingDiverged, guidance_policy, train_gdqn
from .config import TrainConfig
from .env import (
    RewardParams,
    StrikingEnv,
    TERMINAL_STRIKE,
    state_vector,
    write_trace,
)
from .network import MlpSpec, QNetwork
from .physics import PhysicsParams, TableGeometry, Vec2

METRICS_HEADER = ["episode", "reward", "steps", "terminal_kind", "guided",
                  "target_period", "mean_max_q"]
EVAL_HEADER = ["episode", "condition", "episodes", "mean_return",
               "strike_rate", "goal_rate", "mean_max_q"]


# ---------------------------------------------------------------------------
# Builders


def build_geometry(config: TrainConfig) -> TableGeometry:
    return TableGeometry(
        width=config.table_width, height=config.table_height,
        goal_center_x=config.goal_center_x, goal_width=config.goal_width,
        mallet_radius=config.mallet_radius, puck_radius=config.puck_radius,
        goal_line_y=config.table_height)


def build_physics(config: TrainConfig) -> PhysicsParams:
    return PhysicsParams(config.dt, config.max_force, config.max_velocity,
                         config.restitution)


def build_rewards(config: TrainConfig) -> RewardParams:
    return RewardParams(config.strike_bonus, config.accuracy_scale,
                        config.accuracy_window, config.accuracy_decay,
                        config.time_penalty, config.aim_x_resolved)


def build_grid(config: TrainConfig) -> ActionGrid:
    return ActionGrid.uniform(config.grid_size, config.max_force)


def build_env(config: TrainConfig,
              rng: np.random.Generator | int | None = None) -> StrikingEnv:
    return StrikingEnv(build_geometry(config), build_physics(config),
                       build_rewards(config), build_grid(config),
                       max_episode_steps=config.max_episode_steps,
                       home=Vec2(config.home_x, config.home_y),
                       rollout_max_steps=config.rollout_max_steps,
                       rng=rng)


def derive_rngs(seed: int) -> dict[str, np.random.Generator]:
    """Independent, reproducible streams for each random consumer."""
    names = ("net", "env", "agent", "probe", "eval")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(child)
            for name, child in zip(names, children)}


def build_probe_states(config: TrainConfig,
                       rng: np.random.Generator) -> np.ndarray:
    """Frozen set of reset states used for the mean max-Q diagnostic."""
    env = build_env(config, rng)
    states = [env.features(env.reset()) for _ in range(config.probe_states)]
    return np.array(states)


def algorithm_label(config: TrainConfig) -> str:
    """"DDQN" when every addition is disabled, "GDQN" otherwise."""
    reduced = (config.epsilon_p == 0.0 and config.expansion_rate == 1.0
               and config.ou_sigma_resolved == 0.0)
    return "DDQN" if reduced else "GDQN"


# ---------------------------------------------------------------------------
# Policies


def greedy_policy(net: QNetwork) -> Callable:
    def policy(state, features):
        return int(np.argmax(net.forward(features)))
    return policy


def scripted_striker(config: TrainConfig) -> Callable:
    """Deterministic prior-knowledge policy, useful as an evaluation oracle."""
    physics = build_physics(config)
    grid = build_grid(config)

    def policy(state, features):
        return grid.project(*guidance_policy(state, physics))
    return policy


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class ConditionResult:
    condition: str
    episodes: int
    mean_return: float
    strike_rate: float
    goal_rate: float


@dataclass(frozen=True)
class EvalReport:
    conditions: tuple[ConditionResult, ...]
    probe_mean_max_q: float

    def by_name(self, name: str) -> ConditionResult:
        for cond in self.conditions:
            if cond.condition == name:
                return cond
        raise KeyError(name)


def standard_conditions(config: TrainConfig) -> dict[str, Vec2 | None]:
    """Random starts plus the three fixed representative puck positions."""
    w, h = config.table_width, config.table_height
    return {
        "random": None,
        "left": Vec2(0.25 * w, 0.3 * h),
        "middle": Vec2(0.5 * w, 0.3 * h),
        "right": Vec2(0.75 * w, 0.3 * h),
    }


def run_episode(env: StrikingEnv, policy: Callable,
                puck_position=None) -> tuple[float, int, str, object]:
    """Roll one episode under a deterministic policy.

    Returns (total_reward, steps, terminal_kind, strike_breakdown).
    """
    state = env.reset(puck_position)
    total = 0.0
    outcome = None
    while True:
        action = policy(state, env.features(state))
        outcome = env.step(action)
        total += outcome.reward
        state = outcome.next_state
        if outcome.terminal or env.episode_over:
            break
    return total, state.step_count, outcome.terminal_kind, outcome.strike


def evaluate(net: QNetwork | None, config: TrainConfig,
             conditions: Mapping[str, Vec2 | None] | None = None,
             episodes_per_condition: int = 20, seed: int = 0,
             probe_states: np.ndarray | None = None,
             policy: Callable | None = None) -> EvalReport:
    """Greedy evaluation: no exploration, no noise.

    A scored goal requires a strike whose rollout crosses the goal line
    within half a goal width of the aim point. ``policy`` overrides the
    network's greedy policy (e.g. a scripted oracle).
    """
    if policy is None:
        if net is None:
            raise ValueError("need a network or an explicit policy")
        policy = greedy_policy(net)
    if conditions is None:
        conditions = standard_conditions(config)
    env = build_env(config, np.random.default_rng(seed))
    goal_tolerance = config.goal_width / 2.0
    aim = config.aim_x_resolved

    results = []
    for name, position in conditions.items():
        returns = []
        strikes = 0
        goals = 0
        for _ in range(episodes_per_condition):
            total, _, kind, strike = run_episode(env, policy, position)
            returns.append(total)
            if kind == TERMINAL_STRIKE:
                strikes += 1
                if (strike.crossing_x is not None
                        and abs(strike.crossing_x - aim) <= goal_tolerance):
                    goals += 1
        n = episodes_per_condition
        results.append(ConditionResult(name, n, sum(returns) / n,
                                       strikes / n, goals / n))
    if probe_states is not None and net is not None:
        probe = float(net.forward_batch(probe_states).max(axis=1).mean())
    else:
        probe = math.nan
    return EvalReport(tuple(results), probe)


# ---------------------------------------------------------------------------
# Training runs


@dataclass(frozen=True)
class RunArtifacts:
    out_dir: Path
    config_path: Path
    metrics_path: Path
    eval_path: Path
    checkpoint_path: Path
    figure_path: Path | None
    final_report: EvalReport


def run_training(config: TrainConfig, out_dir: str | Path,
                 make_figure: bool = True, quiet: bool = True) -> RunArtifacts:
    """Train once, streaming metrics and periodic evaluations to CSV.

    Writes config.json, metrics.csv, eval.csv, final.npz and (optionally)
    curves.png into ``out_dir``. Deterministic for a fixed config.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rngs = derive_rngs(config.seed)
    env = build_env(config, rngs["env"])
    net = QNetwork.initialize(MlpSpec(config.layer_sizes), rngs["net"],
                              dtype=config.dtype)
    probe = build_probe_states(config, rngs["probe"])
    eval_rng = rngs["eval"]

    config_path = out / "config.json"
    config_path.write_text(config.to_json())
    metrics_path = out / "metrics.csv"
    eval_path = out / "eval.csv"
    checkpoint_path = out / "final.npz"

    with open(metrics_path, "w", newline="") as mf, \
            open(eval_path, "w", newline="") as ef:
        metrics_writer = csv.writer(mf)
        metrics_writer.writerow(METRICS_HEADER)
        eval_writer = csv.writer(ef)
        eval_writer.writerow(EVAL_HEADER)

        def on_episode(row, current_net):
            metrics_writer.writerow([
                row.episode, row.reward, row.steps, row.terminal_kind,
                int(row.guided), row.target_period, row.mean_max_q])
            if (row.episode + 1) % config.eval_every == 0:
                seed = int(eval_rng.integers(2 ** 63))
                report = evaluate(current_net, config,
                                  episodes_per_condition=config.eval_episodes,
                                  seed=seed, probe_states=probe)
                for cond in report.conditions:
                    eval_writer.writerow([
                        row.episode, cond.condition, cond.episodes,
                        cond.mean_return, cond.strike_rate, cond.goal_rate,
                        report.probe_mean_max_q])
                if not quiet:
                    mid = report.by_name("middle")
                    print(f"episode {row.episode + 1}: middle strike rate "
                          f"{mid.strike_rate:.2f}, goal rate {mid.goal_rate:.2f}")

        try:
            result = train_gdqn(config, env, rngs["agent"], net=net,
                                probe_states=probe, episode_listener=on_episode)
        except TrainingDiverged as exc:
            exc.network.save(out / "diagnostic.npz")
            raise

    result.network.save(checkpoint_path)
    final_seed = int(eval_rng.integers(2 ** 63))
    final_report = evaluate(result.network, config,
                            episodes_per_condition=config.eval_episodes,
                            seed=final_seed, probe_states=probe)

    figure_path = None
    if make_figure:
        from .plotting import plot_training_curves
        figure_path = out / "curves.png"
        plot_training_curves(metrics_path, figure_path)
    return RunArtifacts(out, config_path, metrics_path, eval_path,
                        checkpoint_path, figure_path, final_report)


# ---------------------------------------------------------------------------
# Replay


def replay_episode(net: QNetwork | None, config: TrainConfig,
                   puck_position, out_path: str | Path | None = None,
                   policy: Callable | None = None, seed: int = 0) -> list[dict]:
    """One greedy episode, recorded step by step for plotting.

    Each record holds the raw (unnormalized) state before the action, the
    action index and acceleration, the reward, and the terminal kind; a final
    record carries the end state.
    """
    if policy is None:
        if net is None:
            raise ValueError("need a network or an explicit policy")
        policy = greedy_policy(net)
    env = build_env(config, np.random.default_rng(seed))
    state = env.reset(puck_position)
    records = []
    while True:
        action = policy(state, env.features(state))
        outcome = env.step(action)
        ax, ay = env.grid.vector(action)
        records.append({
            "step": state.step_count,
            "state": state_vector(state),
            "action": int(action),
            "accel": [ax, ay],
            "reward": outcome.reward,
            "terminal_kind": outcome.terminal_kind,
        })
        state = outcome.next_state
        if outcome.terminal or env.episode_over:
            records.append({
                "step": state.step_count,
                "state": state_vector(state),
                "action": None,
                "accel": None,
                "reward": None,
                "terminal_kind": outcome.terminal_kind,
            })
            break
    if out_path is not None:
        write_trace(out_path, records)
    return records


# ---------------------------------------------------------------------------
# Sweeps


def make_standard_sweep_configs(base: TrainConfig) -> dict[str, TrainConfig]:
    """Fixed-period baselines (200/1000/5000) against the expanding run."""
    baseline = dict(epsilon_p=0.0, ou_sigma=0.0, expansion_rate=1.0)
    return {
        "ddqn_c200": base.replace(target_period=200.0, **baseline),
        "ddqn_c1000": base.replace(target_period=1000.0, **baseline),
        "ddqn_c5000": base.replace(target_period=5000.0, **baseline),
        "gdqn_expanding": base,
    }


def sweep(configs: Mapping[str, TrainConfig], out_dir: str | Path,
          make_figure: bool = True, quiet: bool = True) -> list[dict]:
    """Run every config into its own subdirectory and summarize."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    eval_paths = {}
    for name in sorted(configs):
        config = configs[name]
        artifacts = run_training(config, out / name, make_figure=False,
                                 quiet=quiet)
        eval_paths[name] = artifacts.eval_path
        report = artifacts.final_report
        random_cond = report.by_name("random")
        middle = report.by_name("middle")
        summary.append({
            "name": name,
            "label": algorithm_label(config),
            "target_period": config.target_period,
            "expansion_rate": config.expansion_rate,
            "episodes": config.episodes,
            "random_mean_return": random_cond.mean_return,
            "middle_strike_rate": middle.strike_rate,
            "middle_goal_rate": middle.goal_rate,
            "probe_mean_max_q": report.probe_mean_max_q,
        })
    summary_path = out / "summary.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(summary[0].keys()))
        writer.writeheader()
        writer.writerows(summary)
    if make_figure:
        from .plotting import plot_sweep
        plot_sweep(eval_paths, out / "sweep.png")
    return summary
