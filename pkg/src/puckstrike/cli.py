"""Command line interface: train, eval, replay, plot, sweep."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .config import TrainConfig
from .harness import (
    algorithm_label,
    build_geometry,
    evaluate,
    make_standard_sweep_configs,
    replay_episode,
    run_training,
    sweep,
)
from .network import QNetwork


def _load_config(path: str | None, checkpoint: str | None = None) -> TrainConfig:
    """Load a config file, falling back to the checkpoint's sibling."""
    if path is not None:
        return TrainConfig.load(path)
    if checkpoint is not None:
        sibling = Path(checkpoint).parent / "config.json"
        if sibling.exists():
            return TrainConfig.load(sibling)
        raise SystemExit(f"no --config given and {sibling} does not exist")
    return TrainConfig()


def _parse_point(text: str) -> tuple[float, float]:
    try:
        x, y = (float(part) for part in text.split(","))
    except ValueError:
        raise SystemExit(f"expected 'x,y', got {text!r}")
    return x, y


def cmd_train(args) -> int:
    config = _load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.episodes is not None:
        overrides["episodes"] = args.episodes
    if overrides:
        config = config.replace(**overrides)
    artifacts = run_training(config, args.out, make_figure=not args.no_figure,
                             quiet=args.quiet)
    print(f"[{algorithm_label(config)}] trained {config.episodes} episodes "
          f"(seed {config.seed})")
    for cond in artifacts.final_report.conditions:
        print(f"  {cond.condition:>7}: return {cond.mean_return:8.2f}  "
              f"strike {cond.strike_rate:5.2f}  goal {cond.goal_rate:5.2f}")
    print(f"outputs in {artifacts.out_dir}")
    return 0


def cmd_eval(args) -> int:
    config = _load_config(args.config, args.checkpoint)
    net = QNetwork.load(args.checkpoint)
    report = evaluate(net, config, episodes_per_condition=args.episodes,
                      seed=args.seed)
    rows = [{"condition": c.condition, "episodes": c.episodes,
             "mean_return": c.mean_return, "strike_rate": c.strike_rate,
             "goal_rate": c.goal_rate} for c in report.conditions]
    print(f"{'condition':>10} {'episodes':>8} {'return':>10} "
          f"{'strike':>7} {'goal':>6}")
    for row in rows:
        print(f"{row['condition']:>10} {row['episodes']:>8} "
              f"{row['mean_return']:>10.3f} {row['strike_rate']:>7.2f} "
              f"{row['goal_rate']:>6.2f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
        print(f"report written to {args.out}")
    return 0


def cmd_replay(args) -> int:
    config = _load_config(args.config, args.checkpoint)
    net = QNetwork.load(args.checkpoint)
    out_path = Path(args.out)
    records = replay_episode(net, config, _parse_point(args.puck),
                             out_path=out_path, seed=args.seed)
    print(f"{len(records) - 1} steps, ended with "
          f"'{records[-1]['terminal_kind']}'; trace in {out_path}")
    if args.figure:
        from .plotting import plot_trajectory
        plot_trajectory(records, args.figure, build_geometry(config))
        print(f"figure in {args.figure}")
    return 0


def cmd_plot(args) -> int:
    from . import plotting
    if args.metrics:
        plotting.plot_training_curves(args.metrics, args.out)
    elif args.eval:
        plotting.plot_evaluation(args.eval, args.out)
    else:
        geometry = build_geometry(_load_config(args.config)) \
            if args.config else None
        plotting.plot_trajectory(args.trace, args.out, geometry)
    print(f"figure in {args.out}")
    return 0


def cmd_sweep(args) -> int:
    configs_dir = Path(args.configs)
    configs_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(configs_dir.glob("*.json"))
    if not paths and args.write_defaults:
        base = TrainConfig()
        if args.episodes is not None:
            base = base.replace(episodes=args.episodes)
        if args.seed is not None:
            base = base.replace(seed=args.seed)
        for name, config in make_standard_sweep_configs(base).items():
            config.save(configs_dir / f"{name}.json")
        paths = sorted(configs_dir.glob("*.json"))
        print(f"wrote {len(paths)} default sweep configs to {configs_dir}")
    if not paths:
        raise SystemExit(f"no .json configs in {configs_dir} "
                         "(use --write-defaults to create the standard set)")
    configs = {}
    for path in paths:
        config = TrainConfig.load(path)
        if args.episodes is not None:
            config = config.replace(episodes=args.episodes)
        if args.seed is not None:
            config = config.replace(seed=args.seed)
        configs[path.stem] = config
    summary = sweep(configs, args.out, quiet=args.quiet)
    print(f"{'run':>16} {'label':>6} {'return':>10} {'strike':>7} {'goal':>6}")
    for row in summary:
        print(f"{row['name']:>16} {row['label']:>6} "
              f"{row['random_mean_return']:>10.2f} "
              f"{row['middle_strike_rate']:>7.2f} "
              f"{row['middle_goal_rate']:>6.2f}")
    print(f"summary in {Path(args.out) / 'summary.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="puckstrike",
        description="Air-hockey striking simulator and guided deep Q-learning")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train an agent")
    p_train.add_argument("--config", help="config JSON (defaults built in)")
    p_train.add_argument("--seed", type=int, help="override the config seed")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--episodes", type=int, help="override episode count")
    p_train.add_argument("--no-figure", action="store_true",
                         help="skip the training-curve figure")
    p_train.add_argument("--quiet", action="store_true",
                         help="suppress periodic progress lines")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint greedily")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--config", help="config JSON (default: sibling "
                                         "config.json of the checkpoint)")
    p_eval.add_argument("--episodes", type=int, default=20,
                        help="episodes per condition")
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out", help="also write the report as CSV")
    p_eval.set_defaults(func=cmd_eval)

    p_replay = sub.add_parser("replay", help="record one greedy episode")
    p_replay.add_argument("--checkpoint", required=True)
    p_replay.add_argument("--config")
    p_replay.add_argument("--puck", required=True, help="puck start 'x,y'")
    p_replay.add_argument("--out", default="trace.jsonl")
    p_replay.add_argument("--figure", help="also render the trajectory figure")
    p_replay.add_argument("--seed", type=int, default=0)
    p_replay.set_defaults(func=cmd_replay)

    p_plot = sub.add_parser("plot", help="render figures from run outputs")
    source = p_plot.add_mutually_exclusive_group(required=True)
    source.add_argument("--metrics", help="metrics.csv from a training run")
    source.add_argument("--eval", help="eval.csv from a training run")
    source.add_argument("--trace", help="trace.jsonl from replay")
    p_plot.add_argument("--config", help="config JSON for table geometry")
    p_plot.add_argument("--out", required=True, help="output image path")
    p_plot.set_defaults(func=cmd_plot)

    p_sweep = sub.add_parser(
        "sweep", help="run every config in a directory and compare")
    p_sweep.add_argument("--configs", required=True,
                         help="directory of config JSON files")
    p_sweep.add_argument("--out", required=True, help="output directory")
    p_sweep.add_argument("--episodes", type=int,
                         help="override episode count for every run")
    p_sweep.add_argument("--seed", type=int, help="override every run's seed")
    p_sweep.add_argument("--write-defaults", action="store_true",
                         help="populate an empty directory with the standard "
                              "fixed-period vs expanding comparison")
    p_sweep.add_argument("--quiet", action="store_true")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
