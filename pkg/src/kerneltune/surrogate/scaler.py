"""Per-column standardization (mean removal and unit-variance scaling)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ScalerState:
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64).ravel()
        self.stds = np.asarray(self.stds, dtype=np.float64).ravel()
        if self.means.shape != self.stds.shape:
            raise ValueError("means and stds differ in length")
        if np.any(self.stds < 0):
            raise ValueError("negative standard deviation")

    @property
    def constant(self) -> np.ndarray:
        """Mask of columns with zero spread."""
        return self.stds == 0.0

    def __len__(self) -> int:
        return len(self.means)

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerState":
        return cls(np.array(d["means"], dtype=np.float64), np.array(d["stds"], dtype=np.float64))


def _as_2d(X) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        return X[:, None], True
    if X.ndim != 2:
        raise ValueError(f"expected a 1- or 2-D array, got {X.ndim}-D")
    return X, False


def scaler_fit(X) -> ScalerState:
    """Column means and population (ddof=0) standard deviations.

    A 1-D input is treated as a single column.
    """
    X, _ = _as_2d(X)
    if X.size == 0:
        raise ValueError("cannot fit a scaler on an empty matrix")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    # constant columns: exact zero spread and the exact value as mean,
    # whatever the round-off in the summation
    const = np.all(X == X[0], axis=0)
    stds[const] = 0.0
    means[const] = X[0, const]
    return ScalerState(means, stds)


def _check(state: ScalerState, X: np.ndarray):
    if X.shape[1] != len(state):
        raise ValueError(f"scaler expects {len(state)} columns, got {X.shape[1]}")


def scaler_transform(state: ScalerState, X) -> np.ndarray:
    X, flat = _as_2d(X)
    _check(state, X)
    const = state.constant
    safe = np.where(const, 1.0, state.stds)
    Z = (X - state.means) / safe
    Z[:, const] = 0.0
    return Z[:, 0] if flat else Z


def scaler_inverse(state: ScalerState, Z) -> np.ndarray:
    """Undo :func:`scaler_transform`; constant columns come back as their mean."""
    Z, flat = _as_2d(Z)
    _check(state, Z)
    X = Z * state.stds + state.means
    return X[:, 0] if flat else X
