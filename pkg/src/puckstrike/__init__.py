"""Air-hockey striking simulator and guided deep Q-learning engine."""

from .config import TrainConfig
from .env import StrikingEnv
from .network import MlpSpec, QNetwork
from .physics import BodyState, PhysicsParams, TableGeometry, Vec2

__all__ = [
    "BodyState",
    "MlpSpec",
    "PhysicsParams",
    "QNetwork",
    "StrikingEnv",
    "TableGeometry",
    "TrainConfig",
    "Vec2",
]

__version__ = "0.1.0"
