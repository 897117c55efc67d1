"""Training hyperparameters, the Adam update and the adaptive learning-rate rule."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

# Divisor applied to the learning rate on stagnation, and the number of
# consecutive stagnant epochs that triggers it.
LR_DIVISOR = 5.0
STAGNANT_EPOCHS = 2
MIN_LR = 1e-8


@dataclass
class TrainConfig:
    alpha: float = 1e-4
    beta1: float = 0.95
    beta2: float = 0.90
    lr0: float = 9e-4
    lr_schedule: str = "adaptive"
    max_epochs: int = 200
    batch_size: int = 200
    tol: float = 1e-6
    eps: float = 1e-9
    hidden_sizes: tuple[int, ...] = (64, 64, 64)
    seed: int = 0

    def __post_init__(self):
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.lr0 <= 0 or self.tol <= 0 or self.eps <= 0:
            raise ValueError("lr0, tol and eps must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be at least 1")
        if self.lr_schedule not in ("adaptive", "constant"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")
        if any(h <= 0 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training settings: {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
              t: int, lr: float, beta1: float, beta2: float, eps: float) -> None:
    """One bias-corrected Adam update, applied in place to ``params`` and ``state``."""
    if t < 1:
        raise ValueError("Adam step index starts at 1")
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    state.t = t


@dataclass
class AdaptiveLearningRate:
    """Divide the rate by 5 after two consecutive epochs whose loss fails to
    drop below the previous epoch's by at least ``tol``.

    ``converged`` turns true once a reduction takes the rate below 1e-8.
    """

    lr: float
    tol: float
    enabled: bool = True
    previous: float = field(default=np.inf)
    stagnant: int = 0
    converged: bool = False

    def update(self, epoch_loss: float) -> bool:
        """Record one epoch; return True if the rate was reduced."""
        improved = epoch_loss < self.previous - self.tol
        self.previous = epoch_loss
        if improved:
            self.stagnant = 0
            return False
        self.stagnant += 1
        if not self.enabled or self.stagnant < STAGNANT_EPOCHS:
            return False
        self.stagnant = 0
        self.lr /= LR_DIVISOR
        if self.lr < MIN_LR:
            self.converged = True
        return True
