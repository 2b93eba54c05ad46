"""Fully connected Q-network with manual backpropagation and RMSProp.

The network maps an 8-feature state to one Q-value per discrete action.
Hidden layers are rectified, the output layer is linear so returns of either
sign are representable. The squared Bellman error is applied only to the
output of the action taken in each sample; the targets are treated as
constants, so gradients flow through the online Q-value alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths of the perceptron, input first, output last."""

    layer_sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output layer")
        if any(s <= 0 for s in sizes):
            raise ValueError("layer sizes must be positive")

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]


@dataclass
class TrainingBatch:
    """A sampled mini-batch with precomputed targets."""

    states: np.ndarray          # (B, input_size)
    action_indices: np.ndarray  # (B,)
    targets: np.ndarray         # (B,)


class QNetwork:
    """Weights, biases and RMSProp accumulators for one MLP."""

    def __init__(self, spec: MlpSpec, weights: list[np.ndarray],
                 biases: list[np.ndarray], dtype=np.float64):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.weights = weights
        self.biases = biases
        self.cache_w = [np.zeros_like(w) for w in weights]
        self.cache_b = [np.zeros_like(b) for b in biases]

    @classmethod
    def initialize(cls, spec: MlpSpec, rng: np.random.Generator,
                   dtype=np.float64) -> "QNetwork":
        """He-style uniform init (bound sqrt(6 / fan_in)), zero biases."""
        dtype = np.dtype(dtype)
        weights, biases = [], []
        sizes = spec.layer_sizes
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = math.sqrt(6.0 / fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            weights.append(w.astype(dtype))
            biases.append(np.zeros(fan_out, dtype=dtype))
        return cls(spec, weights, biases, dtype)

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def forward(self, features: np.ndarray) -> np.ndarray:
        """Q-values for a single state, shape (output_size,)."""
        a = np.asarray(features, dtype=self.dtype)
        last = self.num_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w + b
            if i != last:
                np.maximum(a, 0.0, out=a)
        return a

    def forward_batch(self, states: np.ndarray) -> np.ndarray:
        """Q-values for a batch of states, shape (B, output_size)."""
        a = np.asarray(states, dtype=self.dtype)
        last = self.num_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w + b
            if i != last:
                np.maximum(a, 0.0, out=a)
        return a

    def backward(self, batch: TrainingBatch) -> tuple[list[tuple[np.ndarray, np.ndarray]], float]:
        """Gradient of the mean squared error on the selected outputs.

        Returns (grads, loss) where grads is a per-layer list of (dW, db)
        and loss is mean((target - Q(s, a))^2) over the batch. Only the
        taken action's output receives an error signal; all other outputs
        get exactly zero gradient.
        """
        states = np.asarray(batch.states, dtype=self.dtype)
        actions = np.asarray(batch.action_indices)
        targets = np.asarray(batch.targets, dtype=self.dtype)
        n = states.shape[0]

        activations = [states]
        a = states
        last = self.num_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w + b
            if i != last:
                a = np.maximum(a, 0.0)
            activations.append(a)

        q_taken = activations[-1][np.arange(n), actions]
        residual = q_taken - targets
        loss = float(np.mean(residual * residual))

        delta = np.zeros_like(activations[-1])
        delta[np.arange(n), actions] = (2.0 / n) * residual

        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * self.num_layers  # type: ignore[list-item]
        for i in range(last, -1, -1):
            grads[i] = (activations[i].T @ delta, delta.sum(axis=0))
            if i > 0:
                delta = delta @ self.weights[i].T
                delta *= activations[i] > 0.0
        return grads, loss

    def apply_rmsprop(self, grads: list[tuple[np.ndarray, np.ndarray]],
                      lr: float, decay: float, epsilon: float,
                      grad_clip: float | None = None) -> None:
        """In-place RMSProp step.

        cache <- decay*cache + (1-decay)*g^2 and
        param <- param - lr * g / (sqrt(cache) + epsilon), elementwise.
        """
        if grad_clip is not None:
            total = 0.0
            for dw, db in grads:
                total += float(np.sum(dw * dw)) + float(np.sum(db * db))
            norm = math.sqrt(total)
            if norm > grad_clip:
                scale = grad_clip / norm
                grads = [(dw * scale, db * scale) for dw, db in grads]
        for i, (dw, db) in enumerate(grads):
            for param, grad, cache in ((self.weights[i], dw, self.cache_w[i]),
                                       (self.biases[i], db, self.cache_b[i])):
                cache *= decay
                cache += (1.0 - decay) * grad * grad
                param -= lr * grad / (np.sqrt(cache) + epsilon)

    def clone(self) -> "QNetwork":
        """Deep value copy; training the original leaves the copy untouched."""
        copy = QNetwork(self.spec, [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases], self.dtype)
        copy.cache_w = [c.copy() for c in self.cache_w]
        copy.cache_b = [c.copy() for c in self.cache_b]
        return copy

    # ---- checkpointing ---------------------------------------------------

    def save(self, path: str | Path) -> None:
        arrays: dict[str, np.ndarray] = {
            "version": np.array(CHECKPOINT_VERSION),
            "layer_sizes": np.array(self.spec.layer_sizes, dtype=np.int64),
        }
        for i in range(self.num_layers):
            arrays[f"w{i}"] = self.weights[i]
            arrays[f"b{i}"] = self.biases[i]
            arrays[f"cw{i}"] = self.cache_w[i]
            arrays[f"cb{i}"] = self.cache_b[i]
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path: str | Path) -> "QNetwork":
        with np.load(path) as data:
            version = int(data["version"])
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            spec = MlpSpec(tuple(int(s) for s in data["layer_sizes"]))
            n = len(spec.layer_sizes) - 1
            weights = [data[f"w{i}"] for i in range(n)]
            biases = [data[f"b{i}"] for i in range(n)]
            net = cls(spec, weights, biases, weights[0].dtype)
            net.cache_w = [data[f"cw{i}"] for i in range(n)]
            net.cache_b = [data[f"cb{i}"] for i in range(n)]
        return net
