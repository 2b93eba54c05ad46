"""Everything between the environment and the network.

Action discretization with nearest-neighbor projection, the FIFO replay
buffer, epsilon-greedy selection with temporally correlated
Ornstein-Uhlenbeck noise, the hand-coded guidance policy, double-Q target
computation, the expanding target-sync schedule, and the guided training
loop that ties them together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .config import TrainConfig
from .network import MlpSpec, QNetwork, TrainingBatch
from .physics import PhysicsParams, Vec2

MODE_GREEDY = "greedy"
MODE_EXPLORE = "explore"
MODE_GUIDED = "guided"


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""

    def __init__(self, episode: int, update: int, network: QNetwork):
        super().__init__(f"non-finite loss at episode {episode}, update {update}")
        self.episode = episode
        self.update = update
        self.network = network


# ---------------------------------------------------------------------------
# Action grid


class ActionGrid:
    """The n x n set of discrete accelerations, row-major over (x, y) levels.

    The per-axis levels always contain zero and both extremes, so the policy
    class includes bang-zero-bang profiles. ``index = ix * n + iy``.
    """

    def __init__(self, levels: tuple[float, ...]):
        levels = tuple(float(v) for v in levels)
        if sorted(levels) != list(levels):
            raise ValueError("levels must be sorted ascending")
        if 0.0 not in levels:
            raise ValueError("levels must include the zero action")
        if len(levels) < 3 or levels[0] != -levels[-1] or levels[-1] <= 0.0:
            raise ValueError("levels must include symmetric extremes")
        self.levels = levels
        n = len(levels)
        self.per_axis = n
        self.size = n * n
        self._vectors = [(ax, ay) for ax in levels for ay in levels]
        self.actions = np.array(self._vectors, dtype=np.float64)

    @classmethod
    def uniform(cls, n: int, max_force: float) -> "ActionGrid":
        if n < 3 or n % 2 == 0:
            raise ValueError("n must be odd and >= 3")
        return cls(tuple(np.linspace(-max_force, max_force, n)))

    def vector(self, index: int) -> tuple[float, float]:
        return self._vectors[index]

    def _nearest_level(self, value: float) -> int:
        best, best_d = 0, abs(value - self.levels[0])
        for i in range(1, self.per_axis):
            d = abs(value - self.levels[i])
            if d < best_d:
                best, best_d = i, d
        return best

    def project(self, ax: float, ay: float) -> int:
        """Index of the grid action nearest in Euclidean distance.

        The squared distance separates per axis, so the nearest grid point
        is the per-axis nearest level; exact ties go to the lower index.
        """
        return self._nearest_level(ax) * self.per_axis + self._nearest_level(ay)


# ---------------------------------------------------------------------------
# Replay buffer


class TransitionBatch(NamedTuple):
    states: np.ndarray       # (k, 8)
    action_indices: np.ndarray  # (k,)
    rewards: np.ndarray      # (k,)
    next_states: np.ndarray  # (k, 8)
    terminals: np.ndarray    # (k,) bool


class ReplayBuffer:
    """Fixed-capacity FIFO transition store with uniform sampling.

    New transitions overwrite the oldest once the ring is full. The terminal
    flag marks only strike and wall endings; step-cap endings are stored
    non-terminal so their targets keep bootstrapping.
    """

    def __init__(self, capacity: int, state_dim: int = 8, dtype=np.float64):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim), dtype=dtype)
        self.action_indices = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity, dtype=dtype)
        self.next_states = np.zeros((capacity, state_dim), dtype=dtype)
        self.terminals = np.zeros(capacity, dtype=bool)
        self.cursor = 0
        self.size = 0

    def add(self, state, action_index: int, reward: float, next_state,
            terminal: bool) -> None:
        i = self.cursor
        self.states[i] = state
        self.action_indices[i] = action_index
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.terminals[i] = terminal
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, k: int, rng: np.random.Generator) -> TransitionBatch:
        """k transitions drawn i.i.d. uniformly with replacement."""
        if self.size < k:
            raise ValueError(f"buffer holds {self.size} transitions, need {k}")
        idx = rng.integers(0, self.size, size=k)
        return TransitionBatch(
            self.states[idx], self.action_indices[idx], self.rewards[idx],
            self.next_states[idx], self.terminals[idx])


# ---------------------------------------------------------------------------
# Exploration noise


@dataclass
class OuProcess:
    """Mean-reverting Gaussian noise, one independent component per axis.

    state <- state + theta*(mu - state)*dt + sigma*sqrt(dt)*N(0, 1).
    Reset to the long-run mean at every episode start.
    """

    theta: float
    sigma: float
    dt: float
    mu: float = 0.0
    state: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def reset(self) -> None:
        self.state = np.full(2, self.mu)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        drift = self.theta * (self.mu - self.state) * self.dt
        diffusion = self.sigma * math.sqrt(self.dt) * rng.standard_normal(2)
        self.state = self.state + drift + diffusion
        return self.state


# ---------------------------------------------------------------------------
# Target-network schedule


@dataclass
class TargetSchedule:
    """Sync period that expands geometrically after every sync.

    The period accumulates as a real number; a sync fires once the integer
    update count since the last sync reaches floor(period). An expansion
    rate of 1 recovers the uniform period of the standard algorithm.
    """

    period: float
    expansion_rate: float = 1.0
    updates_since_sync: int = 0

    def __post_init__(self) -> None:
        if self.period < 1.0:
            raise ValueError("period must be >= 1")
        if self.expansion_rate < 1.0:
            raise ValueError("expansion_rate must be >= 1")

    def record_update(self) -> bool:
        """Count one parameter update; True when a target sync is due now."""
        self.updates_since_sync += 1
        if self.updates_since_sync >= math.floor(self.period):
            self.updates_since_sync = 0
            self.period *= self.expansion_rate
            return True
        return False


# ---------------------------------------------------------------------------
# Policies


def guidance_policy(state, physics: PhysicsParams) -> tuple[float, float]:
    """Prior-knowledge striking policy: accelerate toward the puck.

    Commands the velocity that points at the puck at full speed and converts
    the velocity error into a saturated acceleration. Degenerate geometry
    (mallet on the puck, or already at the commanded velocity) yields zero.
    """
    to_puck = state.puck.pos - state.mallet.pos
    direction = to_puck.unit()
    if direction.x == 0.0 and direction.y == 0.0:
        return 0.0, 0.0
    v_next = direction.scaled(physics.max_velocity)
    v_err = Vec2((v_next.x - state.mallet.vel.x) / physics.dt,
                 (v_next.y - state.mallet.vel.y) / physics.dt)
    a_dir = v_err.unit()
    return a_dir.x * physics.max_force, a_dir.y * physics.max_force


def select_action(net: QNetwork, features: np.ndarray, state, grid: ActionGrid,
                  physics: PhysicsParams, epsilon: float,
                  ou: OuProcess | None, rng: np.random.Generator | None,
                  mode: str = MODE_EXPLORE) -> int:
    """Choose a discrete action index.

    greedy: argmax of the Q-values, no randomness.
    explore: with probability epsilon a uniform random index, otherwise the
        greedy action's grid vector plus OU noise, projected back on the grid.
    guided: the guidance policy's continuous command projected on the grid;
        the network is not consulted at all.
    """
    if mode == MODE_GUIDED:
        return grid.project(*guidance_policy(state, physics))
    if mode == MODE_GREEDY:
        return int(np.argmax(net.forward(features)))
    if mode != MODE_EXPLORE:
        raise ValueError(f"unknown selection mode {mode!r}")
    if rng is None:
        raise ValueError("explore mode needs an rng")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(grid.size))
    best = int(np.argmax(net.forward(features)))
    if ou is None:
        return best
    ax, ay = grid.vector(best)
    noise = ou.sample(rng)
    return grid.project(ax + noise[0], ay + noise[1])


# ---------------------------------------------------------------------------
# Targets


def compute_ddqn_target(online: QNetwork, target: QNetwork, transition,
                        gamma: float = 1.0) -> float:
    """Double-Q target for one transition.

    Terminal transitions return the reward alone; otherwise the next action
    is chosen by the online network and evaluated by the target network.
    """
    state, action, reward, next_state, terminal = transition
    if terminal:
        return float(reward)
    best = int(np.argmax(online.forward(next_state)))
    return float(reward + gamma * target.forward(next_state)[best])


def compute_ddqn_targets(online: QNetwork, target: QNetwork,
                         batch: TransitionBatch, gamma: float = 1.0) -> np.ndarray:
    """Vectorized double-Q targets for a sampled batch."""
    q_online = online.forward_batch(batch.next_states)
    best = np.argmax(q_online, axis=1)
    q_target = target.forward_batch(batch.next_states)
    bootstrap = q_target[np.arange(len(best)), best]
    return batch.rewards + gamma * bootstrap * ~batch.terminals


# ---------------------------------------------------------------------------
# Training loop


@dataclass
class EpisodeMetrics:
    episode: int
    reward: float
    steps: int
    terminal_kind: str
    guided: bool
    target_period: float
    mean_max_q: float


@dataclass
class TrainResult:
    network: QNetwork
    metrics: list[EpisodeMetrics]
    updates: int


def train_gdqn(config: TrainConfig, env, rng: np.random.Generator,
               net: QNetwork | None = None,
               probe_states: np.ndarray | None = None,
               step_listener: Callable[[TrainingBatch], None] | None = None,
               episode_listener: Callable[[EpisodeMetrics, QNetwork], None] | None = None,
               ) -> TrainResult:
    """Guided deep Q-learning over full episodes.

    Per episode, one biased coin decides whether the whole episode follows
    the guidance policy; otherwise actions are epsilon-greedy around the
    online network with OU noise projected on the action grid. Every step
    stores its transition, and once the buffer holds ``config.warmup``
    transitions every step also performs one double-Q gradient update. After
    every ``floor(C)`` updates the target network is replaced by a copy of
    the online network and C grows by the expansion rate.

    Setting epsilon_p=0, expansion_rate=1 and a zero noise scale removes
    every addition, and the loop is a plain double-DQN learner consuming the
    identical random stream.
    """
    grid = env.grid
    physics = env.physics
    if net is None:
        net = QNetwork.initialize(MlpSpec(config.layer_sizes), rng,
                                  dtype=config.dtype)
    target = net.clone()
    buffer = ReplayBuffer(config.buffer_capacity, dtype=config.dtype)
    schedule = TargetSchedule(config.target_period, config.expansion_rate)
    sigma = config.ou_sigma_resolved
    ou = (OuProcess(config.ou_theta, sigma, config.dt)
          if sigma > 0.0 else None)

    metrics: list[EpisodeMetrics] = []
    updates = 0
    for episode in range(config.episodes):
        state = env.reset()
        if ou is not None:
            ou.reset()
        guided = config.epsilon_p > 0.0 and rng.random() < config.epsilon_p
        mode = MODE_GUIDED if guided else MODE_EXPLORE
        features = env.features(state)
        total = 0.0
        done = False
        kind = "none"
        while not done:
            action = select_action(net, features, state, grid, physics,
                                   config.epsilon, ou, rng, mode)
            outcome = env.step(action)
            next_features = env.features(outcome.next_state)
            buffer.add(features, action, outcome.reward, next_features,
                       outcome.terminal)
            if buffer.size >= config.warmup:
                batch = buffer.sample(config.batch_size, rng)
                targets = compute_ddqn_targets(net, target, batch, config.gamma)
                training = TrainingBatch(batch.states, batch.action_indices,
                                         targets)
                grads, loss = net.backward(training)
                if not math.isfinite(loss):
                    raise TrainingDiverged(episode, updates, net)
                net.apply_rmsprop(grads, config.learning_rate,
                                  config.rmsprop_decay, config.rmsprop_epsilon,
                                  config.grad_clip)
                updates += 1
                if step_listener is not None:
                    step_listener(training)
                if schedule.record_update():
                    target = net.clone()
            total += outcome.reward
            state = outcome.next_state
            features = next_features
            kind = outcome.terminal_kind
            done = outcome.terminal or state.step_count >= config.max_episode_steps
        if probe_states is not None:
            mean_max_q = float(net.forward_batch(probe_states).max(axis=1).mean())
        else:
            mean_max_q = math.nan
        row = EpisodeMetrics(episode, total, state.step_count, kind, guided,
                             schedule.period, mean_max_q)
        metrics.append(row)
        if episode_listener is not None:
            episode_listener(row, net)
    return TrainResult(net, metrics, updates)
