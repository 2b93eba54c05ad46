"""Figure rendering for metrics, evaluations, sweeps and trajectories.

All functions write image files next to the delimited data they visualize;
nothing is shown interactively.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .env import read_trace
from .physics import TableGeometry


def _read_columns(path: str | Path) -> dict[str, list[str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        columns: dict[str, list[str]] = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name, value in row.items():
                columns[name].append(value)
    return columns


def _floats(values: list[str]) -> np.ndarray:
    return np.array([float(v) for v in values])


def rolling_mean(values: np.ndarray, window: int) -> np.ndarray:
    if len(values) < window:
        window = max(1, len(values))
    kernel = np.ones(window) / window
    return np.convolve(values, kernel, mode="valid")


def plot_training_curves(metrics_csv: str | Path, out_path: str | Path,
                         window: int = 50) -> Path:
    """Episode reward (raw + rolling mean) and the probe mean max-Q."""
    cols = _read_columns(metrics_csv)
    episodes = _floats(cols["episode"])
    rewards = _floats(cols["reward"])
    mean_max_q = _floats(cols["mean_max_q"])

    fig, (ax_r, ax_q) = plt.subplots(1, 2, figsize=(10, 4))
    ax_r.plot(episodes, rewards, lw=0.4, alpha=0.4, color="steelblue",
              label="episode reward")
    smoothed = rolling_mean(rewards, window)
    ax_r.plot(episodes[len(episodes) - len(smoothed):], smoothed, lw=1.5,
              color="crimson", label=f"rolling mean ({window})")
    ax_r.set_xlabel("episode")
    ax_r.set_ylabel("total reward")
    ax_r.legend(loc="lower right", fontsize=8)

    if not np.all(np.isnan(mean_max_q)):
        ax_q.plot(episodes, mean_max_q, lw=0.8, color="darkgreen")
    ax_q.set_xlabel("episode")
    ax_q.set_ylabel("mean max-Q over probe set")

    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def plot_evaluation(eval_csv: str | Path, out_path: str | Path) -> Path:
    """Per-condition evaluation return and strike rate over training."""
    cols = _read_columns(eval_csv)
    conditions = sorted(set(cols["condition"]))
    episodes = _floats(cols["episode"])
    returns = _floats(cols["mean_return"])
    strike = _floats(cols["strike_rate"])

    fig, (ax_r, ax_s) = plt.subplots(1, 2, figsize=(10, 4))
    for name in conditions:
        mask = np.array([c == name for c in cols["condition"]])
        ax_r.plot(episodes[mask], returns[mask], marker="o", ms=2.5, lw=1,
                  label=name)
        ax_s.plot(episodes[mask], strike[mask], marker="o", ms=2.5, lw=1,
                  label=name)
    ax_r.set_xlabel("episode")
    ax_r.set_ylabel("mean evaluation return")
    ax_r.legend(fontsize=8)
    ax_s.set_xlabel("episode")
    ax_s.set_ylabel("strike rate")
    ax_s.set_ylim(-0.05, 1.05)

    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def plot_sweep(eval_paths: dict[str, str | Path], out_path: str | Path,
               condition: str = "random") -> Path:
    """Overlay one evaluation condition across several runs."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name in sorted(eval_paths):
        cols = _read_columns(eval_paths[name])
        mask = np.array([c == condition for c in cols["condition"]])
        episodes = _floats(cols["episode"])[mask]
        returns = _floats(cols["mean_return"])[mask]
        ax.plot(episodes, returns, lw=1.2, label=name)
    ax.set_xlabel("episode")
    ax.set_ylabel(f"mean return ({condition} starts)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def plot_trajectory(trace: str | Path | list[dict], out_path: str | Path,
                    geometry: TableGeometry | None = None) -> Path:
    """Table-plane trajectory plus position / velocity / control profiles."""
    records = read_trace(trace) if isinstance(trace, (str, Path)) else trace
    states = np.array([r["state"] for r in records])
    steps = np.array([r["step"] for r in records])
    with_action = [r for r in records if r["action"] is not None]
    accel = np.array([r["accel"] for r in with_action]) if with_action \
        else np.zeros((0, 2))
    accel_steps = np.array([r["step"] for r in with_action])

    mx, mvx, my, mvy = states[:, 0], states[:, 1], states[:, 2], states[:, 3]
    px, py = states[:, 4], states[:, 6]

    fig = plt.figure(figsize=(11, 6))
    grid = fig.add_gridspec(3, 2, width_ratios=[1.2, 1.0])

    ax_xy = fig.add_subplot(grid[:, 0])
    if geometry is not None:
        ax_xy.add_patch(plt.Rectangle((0, 0), geometry.width, geometry.height,
                                      fill=False, color="black", lw=1.2))
        half = geometry.goal_width / 2
        ax_xy.plot([geometry.goal_center_x - half, geometry.goal_center_x + half],
                   [geometry.goal_line_y, geometry.goal_line_y],
                   color="firebrick", lw=4, solid_capstyle="butt")
        ax_xy.set_xlim(-0.1, geometry.width + 0.1)
        ax_xy.set_ylim(-0.1, geometry.height + 0.1)
    ax_xy.plot(mx, my, "-o", ms=2.5, lw=1, color="steelblue", label="mallet")
    ax_xy.plot(px[0], py[0], "o", ms=8, color="darkorange", label="puck start")
    ax_xy.plot(px[-1], py[-1], "x", ms=8, color="darkorange")
    ax_xy.set_aspect("equal")
    ax_xy.set_xlabel("x [m]")
    ax_xy.set_ylabel("y [m]")
    ax_xy.legend(fontsize=8, loc="upper left")

    ax_pos = fig.add_subplot(grid[0, 1])
    ax_pos.plot(steps, mx, label="x")
    ax_pos.plot(steps, my, label="y")
    ax_pos.set_ylabel("position [m]")
    ax_pos.legend(fontsize=7)

    ax_vel = fig.add_subplot(grid[1, 1], sharex=ax_pos)
    ax_vel.plot(steps, mvx, label="Vx")
    ax_vel.plot(steps, mvy, label="Vy")
    ax_vel.set_ylabel("velocity [m/s]")
    ax_vel.legend(fontsize=7)

    ax_ctl = fig.add_subplot(grid[2, 1], sharex=ax_pos)
    if len(accel):
        ax_ctl.step(accel_steps, accel[:, 0], where="post", label="ax")
        ax_ctl.step(accel_steps, accel[:, 1], where="post", label="ay")
    ax_ctl.set_ylabel("control [m/s$^2$]")
    ax_ctl.set_xlabel("step")
    ax_ctl.legend(fontsize=7)

    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path
