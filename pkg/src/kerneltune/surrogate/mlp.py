"""Fully connected regression network: ReLU hidden layers, linear scalar output.

Weights are stored ``fan_in x fan_out`` so a batch ``X`` of shape
``(rows, fan_in)`` propagates as ``X @ W + b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class DivergenceError(FloatingPointError):
    """A forward pass or loss produced a non-finite value."""


@dataclass
class MlpModel:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        _validate_sizes(self.layer_sizes)
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("one weight matrix and one bias vector per layer transition")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_sizes[k], self.layer_sizes[k + 1])
            if W.shape != shape or b.shape != (shape[1],):
                raise ValueError(f"layer {k}: expected W{shape} and b({shape[1]},), "
                                 f"got W{W.shape} and b{b.shape}")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    def params(self) -> list[np.ndarray]:
        """Flat parameter list ``[W0, b0, W1, b1, ...]`` (views, not copies)."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self) -> "MlpModel":
        return MlpModel(self.layer_sizes, [W.copy() for W in self.weights],
                        [b.copy() for b in self.biases])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params())


def _validate_sizes(sizes: Sequence[int]):
    if len(sizes) < 2:
        raise ValueError("need at least input and output sizes")
    if any(s <= 0 for s in sizes):
        raise ValueError(f"layer sizes must be positive: {tuple(sizes)}")
    if sizes[-1] != 1:
        raise ValueError("output layer must have size 1")


def mlp_init(layer_sizes: Sequence[int], seed: int) -> MlpModel:
    """He-normal weights, ``N(0, 2 / fan_in)``; zero biases."""
    sizes = tuple(int(s) for s in layer_sizes)
    _validate_sizes(sizes)
    rng = np.random.default_rng(seed)
    weights = [rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, n_out))
               for n_in, n_out in zip(sizes[:-1], sizes[1:])]
    biases = [np.zeros(n_out) for n_out in sizes[1:]]
    return MlpModel(sizes, weights, biases)


def _activations(model: MlpModel, X: np.ndarray) -> list[np.ndarray]:
    acts = [X]
    last = len(model.weights) - 1
    for k, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ W + b
        acts.append(z if k == last else np.maximum(z, 0.0))
    return acts


def _as_batch(model: MlpModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_inputs:
        raise ValueError(f"model takes {model.n_inputs} features, got shape {X.shape}")
    return X


def forward(model: MlpModel, x) -> float:
    """Prediction for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("forward takes one feature vector; use forward_batch for matrices")
    return float(forward_batch(model, x)[0])


def forward_batch(model: MlpModel, X) -> np.ndarray:
    out = _activations(model, _as_batch(model, X))[-1][:, 0]
    if not np.all(np.isfinite(out)):
        raise DivergenceError("non-finite network output")
    return out


def _check_batch(model: MlpModel, X, y) -> tuple[np.ndarray, np.ndarray]:
    X = _as_batch(model, X)
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(y) == 0:
        raise ValueError("empty batch")
    if len(y) != X.shape[0]:
        raise ValueError(f"{X.shape[0]} rows but {len(y)} targets")
    return X, y


def _penalty(model: MlpModel, alpha: float, rows: int) -> float:
    return alpha * sum(float(np.sum(W * W)) for W in model.weights) / (2.0 * rows)


def loss(model: MlpModel, X, y, alpha: float) -> float:
    """Batch mean squared error plus ``alpha * sum ||W||_F^2 / (2 * rows)``.

    Biases are not penalized.
    """
    X, y = _check_batch(model, X, y)
    err = _activations(model, X)[-1][:, 0] - y
    value = float(np.mean(err * err)) + _penalty(model, alpha, len(y))
    if not np.isfinite(value):
        raise DivergenceError("non-finite loss")
    return value


def loss_and_gradients(model: MlpModel, X, y, alpha: float) -> tuple[float, list[np.ndarray]]:
    """Loss and its exact gradient, ordered like :meth:`MlpModel.params`.

    The ReLU derivative at exactly zero is taken as zero.
    """
    X, y = _check_batch(model, X, y)
    n = len(y)
    acts = _activations(model, X)
    err = acts[-1][:, 0] - y
    value = float(np.mean(err * err)) + _penalty(model, alpha, n)

    delta = (2.0 / n) * err[:, None]
    grads: list[np.ndarray] = []
    for k in range(len(model.weights) - 1, -1, -1):
        W = model.weights[k]
        gW = acts[k].T @ delta + (alpha / n) * W
        gb = delta.sum(axis=0)
        grads += [gb, gW]
        if k > 0:
            delta = (delta @ W.T) * (acts[k] > 0.0)
    grads.reverse()
    return value, grads


def gradients(model: MlpModel, X, y, alpha: float) -> list[np.ndarray]:
    return loss_and_gradients(model, X, y, alpha)[1]
