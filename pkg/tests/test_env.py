"""Striking environment: resets, stepping, rewards, traces."""

import math

import numpy as np
import pytest

from conftest import build_env
from puckstrike.config import TrainConfig
from puckstrike.env import (
    RewardParams,
    StrikingEnv,
    TERMINAL_NONE,
    TERMINAL_STRIKE,
    TERMINAL_WALL,
    accuracy_reward,
    compute_terminal_reward,
    flatten_state,
    read_trace,
    state_vector,
    unflatten_state,
    write_trace,
)
from puckstrike.physics import BodyState, PhysicsParams, TableGeometry, Vec2

CONFIG = TrainConfig()


def fresh_env(seed=0):
    return build_env(CONFIG, seed=seed)


class TestReset:
    def test_fixed_position(self):
        env = fresh_env()
        state = env.reset((0.5, 0.3))
        assert state.puck.pos == Vec2(0.5, 0.3)
        assert state.puck.vel == Vec2(0.0, 0.0)
        assert state.mallet.pos == env.home
        assert state.mallet.vel == Vec2(0.0, 0.0)
        assert state.step_count == 0

    def test_fixed_position_out_of_bounds_rejected(self):
        env = fresh_env()
        with pytest.raises(ValueError, match="half court"):
            env.reset((0.5, 1.8))  # opponent half
        with pytest.raises(ValueError, match="half court"):
            env.reset((0.001, 0.5))  # inside the wall margin
        with pytest.raises(ValueError, match="half court"):
            env.reset((-0.2, 0.5))

    def test_seeded_determinism(self):
        a = build_env(CONFIG, seed=42).reset()
        b = build_env(CONFIG, seed=42).reset()
        assert a == b

    def test_random_positions_inside_support(self):
        env = fresh_env(seed=1)
        x_lo, x_hi, y_lo, y_hi = env.random_puck_bounds()
        clearance = env.geometry.mallet_radius + env.geometry.puck_radius
        for _ in range(500):
            state = env.reset()
            p = state.puck.pos
            assert x_lo <= p.x <= x_hi
            assert y_lo <= p.y <= y_hi
            assert (p - env.home).norm() > clearance

    def test_random_positions_uniform_chi_square(self):
        from scipy import stats
        env = fresh_env(seed=0)
        x_lo, x_hi, y_lo, y_hi = env.random_puck_bounds()
        xs, ys = [], []
        for _ in range(10_000):
            p = env.reset().puck.pos
            xs.append(p.x)
            ys.append(p.y)
        counts, _, _ = np.histogram2d(
            xs, ys, bins=4, range=[[x_lo, x_hi], [y_lo, y_hi]])
        assert counts.sum() == 10_000
        assert stats.chisquare(counts.ravel()).pvalue > 0.01


class TestStep:
    def zero_action(self, env):
        return env.grid.project(0.0, 0.0)

    def test_non_contact_step_costs_time_penalty(self):
        env = fresh_env()
        env.reset((0.5, 0.8))
        out = env.step(self.zero_action(env))
        assert out.reward == -1.0
        assert not out.terminal
        assert out.terminal_kind == TERMINAL_NONE
        assert out.next_state.step_count == 1

    def test_wall_drive_terminates_with_time_penalty_only(self):
        env = fresh_env()
        env.reset((0.8, 0.9))
        left = env.grid.project(-CONFIG.max_force, 0.0)
        out = None
        for _ in range(200):
            out = env.step(left)
            if out.terminal:
                break
        assert out.terminal
        assert out.terminal_kind == TERMINAL_WALL
        assert out.reward == -1.0
        assert out.strike is None

    def test_strike_reward_composition(self):
        env = fresh_env()
        env.reset((0.5, 0.6))
        forward = env.grid.project(0.0, CONFIG.max_force)
        out = None
        for _ in range(200):
            out = env.step(forward)
            if out.terminal:
                break
        assert out.terminal_kind == TERMINAL_STRIKE
        s = out.strike
        assert s is not None
        assert s.total == pytest.approx(s.contact + s.velocity + s.accuracy)
        assert out.reward == pytest.approx(-1.0 + s.total)
        assert s.contact == CONFIG.strike_bonus
        # A dead-center straight shot scores the full accuracy reward.
        assert s.crossing_x == pytest.approx(0.5, abs=1e-9)
        assert s.accuracy == CONFIG.accuracy_scale
        assert s.velocity > 0.0

    def test_step_after_terminal_raises(self):
        env = fresh_env()
        env.reset((0.5, 0.6))
        forward = env.grid.project(0.0, CONFIG.max_force)
        for _ in range(200):
            if env.step(forward).terminal:
                break
        with pytest.raises(RuntimeError, match="finished"):
            env.step(forward)

    def test_step_after_cap_raises(self):
        env = fresh_env()
        env.reset((0.5, 0.8))
        idle = self.zero_action(env)
        for _ in range(CONFIG.max_episode_steps):
            out = env.step(idle)
        assert not out.terminal  # step-cap ending is not Bellman-terminal
        assert env.episode_over
        with pytest.raises(RuntimeError):
            env.step(idle)

    def test_invalid_action_index(self):
        env = fresh_env()
        env.reset((0.5, 0.8))
        with pytest.raises(ValueError):
            env.step(25)
        with pytest.raises(ValueError):
            env.step(-1)

    def test_step_before_reset_raises(self):
        env = fresh_env()
        with pytest.raises(RuntimeError):
            env.step(0)


class TestRewards:
    GEOM = TableGeometry()
    PHYS = PhysicsParams()

    def params(self, **kw):
        defaults = dict(strike_bonus=5.0, accuracy_scale=10.0,
                        accuracy_window=0.125, accuracy_decay=5.0,
                        time_penalty=1.0, aim_x=0.5)
        defaults.update(kw)
        return RewardParams(**defaults)

    def test_velocity_reward_signed_square(self):
        params = self.params()
        aim = Vec2(params.aim_x, self.GEOM.goal_line_y)
        start = Vec2(0.5, 0.5)
        direction = (aim - start).unit()
        toward = compute_terminal_reward(
            BodyState(start, direction.scaled(2.0)), params, self.GEOM, self.PHYS)
        assert toward.velocity == pytest.approx(4.0, abs=1e-9)
        away = compute_terminal_reward(
            BodyState(start, direction.scaled(-1.5)), params, self.GEOM, self.PHYS)
        assert away.velocity == pytest.approx(-2.25, abs=1e-9)

    def test_accuracy_dead_center(self):
        assert accuracy_reward(0.5, self.params()) == 10.0

    def test_accuracy_window_edge_continuous(self):
        params = self.params()
        edge = params.aim_x + params.accuracy_window
        assert accuracy_reward(edge, params) == pytest.approx(10.0)
        just_out = edge + 1e-12
        assert accuracy_reward(just_out, params) == pytest.approx(10.0, rel=1e-9)

    def test_accuracy_one_decay_length(self):
        params = self.params()
        miss = params.accuracy_window + 1.0 / params.accuracy_decay
        got = accuracy_reward(params.aim_x + miss, params)
        assert got == pytest.approx(10.0 * math.exp(-1.0), rel=1e-12)

    def test_accuracy_monotone_non_increasing(self):
        params = self.params()
        misses = np.linspace(0.0, 1.0, 200)
        values = [accuracy_reward(params.aim_x + m, params) for m in misses]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_accuracy_none_crossing_scores_zero(self):
        assert accuracy_reward(None, self.params()) == 0.0

    def test_missed_rollout_still_taxes_velocity(self):
        # Puck sliding sideways never crosses: accuracy 0, contact kept.
        params = self.params()
        puck = BodyState(Vec2(0.5, 0.5), Vec2(1.0, 0.0))
        r = compute_terminal_reward(puck, params, self.GEOM, self.PHYS,
                                    rollout_max_steps=500)
        assert r.crossing_x is None
        assert r.accuracy == 0.0
        assert r.total == pytest.approx(params.strike_bonus + r.velocity)

    def test_reward_params_validation(self):
        with pytest.raises(ValueError):
            self.params(accuracy_scale=0.0)
        with pytest.raises(ValueError):
            self.params(accuracy_decay=-1.0)
        with pytest.raises(ValueError):
            self.params(time_penalty=-0.5)


class TestEpisodeIdentities:
    def test_total_reward_identity_under_random_policy(self):
        # R_total == R_terminal - n * r_time, exactly, on 1000 episodes.
        env = fresh_env(seed=11)
        rng = np.random.default_rng(12)
        for _ in range(1000):
            env.reset()
            total = 0.0
            terminal_reward = 0.0
            steps = 0
            while True:
                out = env.step(int(rng.integers(env.grid.size)))
                total += out.reward
                steps = out.next_state.step_count
                if out.terminal:
                    terminal_reward = out.strike.total if out.strike else 0.0
                    break
                if env.episode_over:
                    break
            assert total == terminal_reward - steps * 1.0

    def test_full_idle_episode_scores_minus_150(self):
        env = fresh_env(seed=13)
        env.reset((0.5, 0.8))
        idle = env.grid.project(0.0, 0.0)
        total = 0.0
        while not env.episode_over:
            total += env.step(idle).reward
        assert total == -150.0
        assert env.state.step_count == 150


class TestFlatten:
    GEOM = TableGeometry()
    PHYS = PhysicsParams()

    def test_midpoint_scaling(self):
        from puckstrike.env import EnvState
        center = Vec2(self.GEOM.width / 2, self.GEOM.height / 2)
        state = EnvState(BodyState(center, Vec2(0, 0)),
                         BodyState(center, Vec2(0, 0)), 0)
        feats = flatten_state(state, self.GEOM, self.PHYS)
        assert feats == pytest.approx([0.5, 0, 0.5, 0, 0.5, 0, 0.5, 0])

    def test_origin_corner(self):
        from puckstrike.env import EnvState
        state = EnvState(BodyState(Vec2(0, 0), Vec2(0, 0)),
                         BodyState(Vec2(0.5, 0.5), Vec2(0, 0)), 0)
        feats = flatten_state(state, self.GEOM, self.PHYS)
        assert feats[0] == 0.0
        assert feats[2] == 0.0

    def test_velocity_scaling(self):
        from puckstrike.env import EnvState
        v = self.PHYS.max_velocity
        state = EnvState(BodyState(Vec2(0.5, 0.5), Vec2(v, -v / 2)),
                         BodyState(Vec2(0.5, 0.5), Vec2(0, 0)), 0)
        feats = flatten_state(state, self.GEOM, self.PHYS)
        assert feats[1] == 1.0
        assert feats[3] == -0.5

    def test_round_trip(self):
        from puckstrike.env import EnvState
        rng = np.random.default_rng(14)
        for _ in range(100):
            state = EnvState(
                BodyState(Vec2(*rng.uniform(0.1, 0.9, 2)),
                          Vec2(*rng.uniform(-2, 2, 2))),
                BodyState(Vec2(*rng.uniform(0.1, 0.9, 2)),
                          Vec2(*rng.uniform(-2, 2, 2))), 0)
            feats = flatten_state(state, self.GEOM, self.PHYS)
            back = unflatten_state(feats, self.GEOM, self.PHYS)
            for a, b in zip(state_vector(state), state_vector(back)):
                assert math.isclose(a, b, rel_tol=0, abs_tol=1e-12)


class TestTrace:
    def test_round_trip(self, tmp_path):
        records = [
            {"step": 0, "state": [0.5, 0, 0.15, 0, 0.5, 0, 0.6, 0],
             "action": 12, "reward": -1.0, "terminal_kind": "none"},
            {"step": 1, "state": [0.5, 0, 0.15, 0.4, 0.5, 0, 0.6, 0],
             "action": None, "reward": None, "terminal_kind": "strike"},
        ]
        path = tmp_path / "trace.jsonl"
        write_trace(path, records)
        assert read_trace(path) == records
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 2  # one JSON record per line
