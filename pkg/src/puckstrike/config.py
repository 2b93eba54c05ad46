"""Run configuration: every tunable of the simulator and the learner.

A ``TrainConfig`` is a flat, JSON-serializable record. Builder helpers that
turn it into environment and agent objects live in ``harness``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path


@dataclass
class TrainConfig:
    """All hyper-parameters of a training run.

    Learning-rule values default to the published operating point
    (learning rate 2.5e-4, epsilon 0.1, demonstration probability 0.1,
    200k replay capacity, batch 64, expanding target period with rate 1.2);
    the physical and reward constants default to a 1 m x 2 m table with the
    opponent goal on the far y edge.
    """

    # physics
    dt: float = 0.05
    max_force: float = 8.0
    max_velocity: float = 2.0
    restitution: float = 0.99

    # table geometry (x spans [0, width], y spans [0, height], goal far edge)
    table_width: float = 1.0
    table_height: float = 2.0
    goal_center_x: float = 0.5
    goal_width: float = 0.25
    mallet_radius: float = 0.05
    puck_radius: float = 0.03
    home_x: float = 0.5
    home_y: float = 0.15

    # reward shaping
    strike_bonus: float = 5.0        # fixed bonus for any puck contact
    accuracy_scale: float = 10.0     # peak of the aim-accuracy reward
    accuracy_window: float = 0.125   # half-width of the full-reward window (m)
    accuracy_decay: float = 5.0      # exponential falloff rate (1/m)
    time_penalty: float = 1.0        # cost per simulation step
    aim_x: float | None = None       # aim point on the goal line; None = goal center

    # episode
    max_episode_steps: int = 150
    rollout_max_steps: int = 2000

    # action discretization (levels per axis; odd so zero is included)
    grid_size: int = 5

    # network
    hidden_sizes: tuple[int, ...] = (100, 100, 40)
    dtype: str = "float64"

    # learning
    learning_rate: float = 0.00025
    epsilon: float = 0.1
    epsilon_p: float = 0.1
    buffer_capacity: int = 200_000
    batch_size: int = 64
    target_period: float = 200.0     # initial target-network update period C0
    expansion_rate: float = 1.2      # period growth factor per sync
    gamma: float = 1.0
    warmup: int = 1000
    rmsprop_decay: float = 0.95
    rmsprop_epsilon: float = 0.01
    grad_clip: float | None = None

    # exploration noise (sigma None = derived from the grid spacing)
    ou_theta: float = 4.0
    ou_sigma: float | None = None

    # run control
    episodes: int = 3000
    seed: int = 0
    eval_every: int = 100
    eval_episodes: int = 20
    probe_states: int = 256

    def __post_init__(self) -> None:
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        self.validate()

    def validate(self) -> None:
        positive = [
            "dt", "max_force", "max_velocity", "table_width", "table_height",
            "goal_width", "mallet_radius", "puck_radius", "accuracy_scale",
            "accuracy_decay", "learning_rate", "buffer_capacity", "batch_size",
            "target_period", "max_episode_steps", "rollout_max_steps",
            "episodes", "eval_every", "eval_episodes", "rmsprop_epsilon",
            "ou_theta", "probe_states",
        ]
        for name in positive:
            value = getattr(self, name)
            if not math.isfinite(float(value)) or value <= 0:
                raise ValueError(f"{name} must be positive, got {value!r}")
        if not 0.0 < self.restitution <= 1.0:
            raise ValueError("restitution must be in (0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if not 0.0 <= self.epsilon_p <= 1.0:
            raise ValueError("epsilon_p must be in [0, 1]")
        if self.expansion_rate < 1.0:
            raise ValueError("expansion_rate must be >= 1")
        if not 0.0 <= self.rmsprop_decay < 1.0:
            raise ValueError("rmsprop_decay must be in [0, 1)")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.grid_size < 3 or self.grid_size % 2 == 0:
            raise ValueError("grid_size must be an odd integer >= 3 so the "
                             "action set includes zero and both extremes")
        if self.accuracy_window < 0.0:
            raise ValueError("accuracy_window must be >= 0")
        if self.time_penalty < 0.0:
            raise ValueError("time_penalty must be >= 0")
        if self.warmup < self.batch_size:
            raise ValueError("warmup must be >= batch_size")
        if self.ou_sigma is not None and self.ou_sigma < 0.0:
            raise ValueError("ou_sigma must be >= 0")
        if self.grad_clip is not None and self.grad_clip <= 0.0:
            raise ValueError("grad_clip must be positive when set")
        if self.aim_x is not None and not 0.0 <= self.aim_x <= self.table_width:
            raise ValueError("aim_x must lie within [0, table_width]")
        if not (len(self.hidden_sizes) >= 1
                and all(h > 0 for h in self.hidden_sizes)):
            raise ValueError("hidden_sizes must be a non-empty tuple of positives")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be 'float32' or 'float64'")

    # ---- derived values -------------------------------------------------

    @property
    def aim_x_resolved(self) -> float:
        return self.goal_center_x if self.aim_x is None else self.aim_x

    @property
    def grid_spacing(self) -> float:
        return 2.0 * self.max_force / (self.grid_size - 1)

    @property
    def ou_sigma_resolved(self) -> float:
        """Noise scale; defaults so the stationary std is 0.4 grid spacings."""
        if self.ou_sigma is not None:
            return self.ou_sigma
        return 0.4 * self.grid_spacing * math.sqrt(2.0 * self.ou_theta)

    @property
    def num_actions(self) -> int:
        return self.grid_size ** 2

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (8, *self.hidden_sizes, self.num_actions)

    # ---- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["hidden_sizes"] = list(self.hidden_sizes)
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "TrainConfig":
        return cls.from_json(Path(path).read_text())

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)
