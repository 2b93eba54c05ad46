"""Shared builders for the test suite."""

import numpy as np
import pytest

from puckstrike.agents import ActionGrid
from puckstrike.config import TrainConfig
from puckstrike.env import RewardParams, StrikingEnv
from puckstrike.physics import PhysicsParams, TableGeometry, Vec2


def build_env(config: TrainConfig, seed=None) -> StrikingEnv:
    geometry = TableGeometry(
        width=config.table_width, height=config.table_height,
        goal_center_x=config.goal_center_x, goal_width=config.goal_width,
        mallet_radius=config.mallet_radius, puck_radius=config.puck_radius,
        goal_line_y=config.table_height)
    physics = PhysicsParams(config.dt, config.max_force, config.max_velocity,
                            config.restitution)
    rewards = RewardParams(config.strike_bonus, config.accuracy_scale,
                           config.accuracy_window, config.accuracy_decay,
                           config.time_penalty, config.aim_x_resolved)
    grid = ActionGrid.uniform(config.grid_size, config.max_force)
    return StrikingEnv(geometry, physics, rewards, grid,
                       max_episode_steps=config.max_episode_steps,
                       home=Vec2(config.home_x, config.home_y),
                       rollout_max_steps=config.rollout_max_steps,
                       rng=np.random.default_rng(seed))


@pytest.fixture
def default_config():
    return TrainConfig()


@pytest.fixture
def tiny_config():
    """A configuration small enough for fast training-loop tests."""
    return TrainConfig(hidden_sizes=(16, 16), buffer_capacity=2000,
                       warmup=64, episodes=10, max_episode_steps=40,
                       target_period=25.0, eval_every=5, eval_episodes=2,
                       probe_states=16)


@pytest.fixture
def default_env(default_config):
    return build_env(default_config, seed=0)
