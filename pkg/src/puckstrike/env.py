"""The episodic striking task.

Each episode starts with the mallet at its home position and a stationary
puck somewhere in the agent's half court. The agent commands accelerations
from a discrete grid; the episode ends the moment the mallet touches the
puck (the strike, rewarded by speed and aim quality), the moment the mallet
touches a wall, or silently after the step cap. Only strike and wall endings
are terminal in the Bellman sense; step-cap endings keep bootstrapping.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agents import ActionGrid
from .physics import (
    ZERO,
    BodyState,
    PhysicsParams,
    TableGeometry,
    Vec2,
    detect_mallet_puck_contact,
    integrate_body,
    resolve_strike,
    resolve_wall_collision,
    rollout_puck_to_goal_line,
    touches_wall,
)

TERMINAL_STRIKE = "strike"
TERMINAL_WALL = "wall"
TERMINAL_NONE = "none"


@dataclass(frozen=True)
class EnvState:
    """Full observable state; flattens to 8 features in a fixed order."""

    mallet: BodyState
    puck: BodyState
    step_count: int


@dataclass(frozen=True)
class RewardParams:
    """Constants of the terminal reward and the per-step time penalty."""

    strike_bonus: float = 5.0     # fixed reward for contacting the puck
    accuracy_scale: float = 10.0  # peak accuracy reward
    accuracy_window: float = 0.125  # half-width of the full-reward window (m)
    accuracy_decay: float = 5.0   # falloff rate outside the window (1/m)
    time_penalty: float = 1.0     # subtracted every step
    aim_x: float = 0.5            # aim point on the goal line

    def __post_init__(self) -> None:
        if self.accuracy_scale <= 0.0:
            raise ValueError("accuracy_scale must be positive")
        if self.accuracy_window < 0.0:
            raise ValueError("accuracy_window must be >= 0")
        if self.accuracy_decay <= 0.0:
            raise ValueError("accuracy_decay must be positive")
        if self.time_penalty < 0.0:
            raise ValueError("time_penalty must be >= 0")


@dataclass(frozen=True)
class StrikeReward:
    """Breakdown of the reward granted when the mallet strikes the puck."""

    total: float
    contact: float
    velocity: float
    accuracy: float
    crossing_x: float | None
    velocity_projection: float


@dataclass(frozen=True)
class StepOutcome:
    next_state: EnvState
    reward: float
    terminal: bool
    terminal_kind: str
    strike: StrikeReward | None = None


def accuracy_reward(crossing_x: float | None, params: RewardParams) -> float:
    """Full reward inside the aim window, exponential falloff outside it."""
    if crossing_x is None:
        return 0.0
    miss = abs(crossing_x - params.aim_x)
    if miss <= params.accuracy_window:
        return params.accuracy_scale
    return params.accuracy_scale * math.exp(
        -params.accuracy_decay * (miss - params.accuracy_window))


def compute_terminal_reward(post_strike_puck: BodyState, params: RewardParams,
                            geom: TableGeometry, physics: PhysicsParams,
                            rollout_max_steps: int = 2000) -> StrikeReward:
    """Reward for a strike: contact bonus + signed squared speed toward the
    aim point + aim accuracy of the simulated crossing."""
    rollout = rollout_puck_to_goal_line(post_strike_puck, geom,
                                        physics.restitution, physics,
                                        rollout_max_steps, params.aim_x)
    v = rollout.velocity_projection
    velocity = math.copysign(v * v, v)
    accuracy = accuracy_reward(rollout.crossing_x, params)
    total = params.strike_bonus + velocity + accuracy
    return StrikeReward(total, params.strike_bonus, velocity, accuracy,
                        rollout.crossing_x, v)


def flatten_state(state: EnvState, geom: TableGeometry,
                  physics: PhysicsParams) -> np.ndarray:
    """8 normalized features: positions in [0, 1], velocities in [-1, 1]."""
    v = physics.max_velocity
    return np.array([
        state.mallet.pos.x / geom.width, state.mallet.vel.x / v,
        state.mallet.pos.y / geom.height, state.mallet.vel.y / v,
        state.puck.pos.x / geom.width, state.puck.vel.x / v,
        state.puck.pos.y / geom.height, state.puck.vel.y / v,
    ])


def unflatten_state(features, geom: TableGeometry, physics: PhysicsParams,
                    step_count: int = 0) -> EnvState:
    """Inverse of ``flatten_state`` (step counter not encoded)."""
    f = np.asarray(features, dtype=float)
    v = physics.max_velocity
    mallet = BodyState(Vec2(f[0] * geom.width, f[2] * geom.height),
                       Vec2(f[1] * v, f[3] * v))
    puck = BodyState(Vec2(f[4] * geom.width, f[6] * geom.height),
                     Vec2(f[5] * v, f[7] * v))
    return EnvState(mallet, puck, step_count)


class StrikingEnv:
    """Single-owner mutable episode state around the pure physics core."""

    def __init__(self, geometry: TableGeometry, physics: PhysicsParams,
                 rewards: RewardParams, grid: ActionGrid,
                 max_episode_steps: int = 150, home: Vec2 | None = None,
                 rollout_max_steps: int = 2000,
                 rng: np.random.Generator | int | None = None):
        self.geometry = geometry
        self.physics = physics
        self.rewards = rewards
        self.grid = grid
        self.max_episode_steps = max_episode_steps
        self.rollout_max_steps = rollout_max_steps
        if home is None:
            home = Vec2(geometry.goal_center_x, 0.15)
        if touches_wall(home, geometry.mallet_radius, geometry):
            raise ValueError(f"home position {home} touches a wall")
        self.home = home
        self.rng = rng if isinstance(rng, np.random.Generator) \
            else np.random.default_rng(rng)
        self._state: EnvState | None = None
        self._done = True

    # ---- episode control ---------------------------------------------

    def _validate_puck_position(self, pos: Vec2) -> None:
        g = self.geometry
        r = g.puck_radius
        half = g.height / 2.0
        if not (r <= pos.x <= g.width - r and r <= pos.y <= half):
            raise ValueError(
                f"puck position {pos} must lie in the agent half court "
                f"x in [{r}, {g.width - r}], y in [{r}, {half}]")

    def random_puck_bounds(self) -> tuple[float, float, float, float]:
        """Support rectangle (x_lo, x_hi, y_lo, y_hi) of the random reset.

        Inset two puck radii from the walls; the lower edge additionally
        clears the mallet's home position so the draw is exactly uniform,
        with no rejection hole around the mallet.
        """
        g = self.geometry
        margin = 2.0 * g.puck_radius
        clearance = g.mallet_radius + g.puck_radius
        y_lo = max(margin, self.home.y + clearance)
        return margin, g.width - margin, y_lo, g.height / 2.0

    def _random_puck_position(self) -> Vec2:
        x_lo, x_hi, y_lo, y_hi = self.random_puck_bounds()
        clearance = self.geometry.mallet_radius + self.geometry.puck_radius
        while True:
            pos = Vec2(self.rng.uniform(x_lo, x_hi), self.rng.uniform(y_lo, y_hi))
            # Non-default homes inside the support can still shadow a spot.
            if (pos - self.home).norm() > clearance:
                return pos

    def reset(self, puck_position: Vec2 | tuple[float, float] | None = None
              ) -> EnvState:
        """Start an episode: mallet at home, puck stationary.

        With no argument the puck lands uniformly in the agent half court,
        inset two puck radii from the walls and clear of the mallet. A fixed
        position is validated against the half court and wall margins.
        """
        if puck_position is None:
            pos = self._random_puck_position()
        else:
            pos = Vec2(*puck_position)
            self._validate_puck_position(pos)
        mallet = BodyState(self.home, ZERO)
        puck = BodyState(pos, ZERO)
        self._state = EnvState(mallet, puck, 0)
        self._done = False
        return self._state

    @property
    def state(self) -> EnvState:
        if self._state is None:
            raise RuntimeError("environment not reset")
        return self._state

    @property
    def episode_over(self) -> bool:
        return self._done

    def step(self, action_index: int) -> StepOutcome:
        """Advance one sampling period with the given grid acceleration."""
        if self._state is None or self._done:
            raise RuntimeError("step() called on a finished episode; reset first")
        if not 0 <= action_index < self.grid.size:
            raise ValueError(f"action index {action_index} outside "
                             f"[0, {self.grid.size})")
        geom, physics = self.geometry, self.physics
        accel = Vec2(*self.grid.vector(action_index))
        mallet = integrate_body(self._state.mallet, accel, physics)
        puck = integrate_body(self._state.puck, ZERO, physics)

        reward = -self.rewards.time_penalty
        terminal = False
        kind = TERMINAL_NONE
        strike: StrikeReward | None = None

        contact, normal = detect_mallet_puck_contact(mallet, puck, geom)
        if contact:
            puck = resolve_strike(mallet, puck, normal, physics.restitution)
            strike = compute_terminal_reward(puck, self.rewards, geom, physics,
                                             self.rollout_max_steps)
            reward += strike.total
            terminal = True
            kind = TERMINAL_STRIKE
        elif touches_wall(mallet.pos, geom.mallet_radius, geom):
            terminal = True
            kind = TERMINAL_WALL
        else:
            puck = resolve_wall_collision(puck, geom, physics.restitution)

        next_state = EnvState(mallet, puck, self._state.step_count + 1)
        self._state = next_state
        self._done = terminal or next_state.step_count >= self.max_episode_steps
        return StepOutcome(next_state, reward, terminal, kind, strike)

    def features(self, state: EnvState | None = None) -> np.ndarray:
        return flatten_state(self.state if state is None else state,
                             self.geometry, self.physics)


# ---------------------------------------------------------------------------
# Episode traces (line-delimited JSON, one record per step)


def state_vector(state: EnvState) -> list[float]:
    """Raw (unnormalized) 8-vector in the canonical feature order."""
    return [state.mallet.pos.x, state.mallet.vel.x,
            state.mallet.pos.y, state.mallet.vel.y,
            state.puck.pos.x, state.puck.vel.x,
            state.puck.pos.y, state.puck.vel.y]


def write_trace(path: str | Path, records: list[dict]) -> None:
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def read_trace(path: str | Path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
