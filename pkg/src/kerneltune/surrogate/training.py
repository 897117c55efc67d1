"""Mini-batch training, prediction and regression metrics."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .mlp import DivergenceError, MlpModel, forward_batch, loss_and_gradients, mlp_init
from .optim import AdamState, AdaptiveLearningRate, TrainConfig, adam_step
from .scaler import ScalerState, scaler_fit, scaler_inverse, scaler_transform


class StopReason(str, enum.Enum):
    MAX_EPOCHS = "max_epochs"
    TOL_CONVERGED = "tol_converged"


class TrainingDiverged(DivergenceError):
    def __init__(self, epoch: int, batch: int, value: float):
        super().__init__(f"non-finite loss {value} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass
class TrainReport:
    loss_history: list[float] = field(default_factory=list)
    lr_history: list[float] = field(default_factory=list)
    r2_train: float = 0.0
    r2_test: Optional[float] = None
    r2_train_degenerate: bool = False
    r2_test_degenerate: bool = False
    epochs_run: int = 0
    final_lr: float = 0.0
    stop_reason: StopReason = StopReason.MAX_EPOCHS


@dataclass
class R2Result:
    value: float
    degenerate: bool

    def __float__(self) -> float:
        return self.value


def r2_score(actual, predicted) -> R2Result:
    """Coefficient of determination ``1 - SS_res / SS_tot``.

    When the actual values have no spread (``SS_tot == 0``) the score is
    reported as 0 and flagged degenerate.
    """
    a = np.asarray(actual, dtype=np.float64).ravel()
    p = np.asarray(predicted, dtype=np.float64).ravel()
    if len(a) != len(p):
        raise ValueError(f"length mismatch: {len(a)} actual vs {len(p)} predicted")
    if len(a) == 0:
        raise ValueError("r2 of an empty sample")
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        return R2Result(0.0, True)
    ss_res = float(np.sum((a - p) ** 2))
    return R2Result(1.0 - ss_res / ss_tot, False)


def r2(actual, predicted) -> float:
    return r2_score(actual, predicted).value


def mse(actual, predicted) -> float:
    a = np.asarray(actual, dtype=np.float64).ravel()
    p = np.asarray(predicted, dtype=np.float64).ravel()
    if len(a) != len(p) or len(a) == 0:
        raise ValueError("mse needs two equal, non-empty samples")
    return float(np.mean((a - p) ** 2))


def predict(model: MlpModel, x_scaler: ScalerState, y_scaler: ScalerState, X) -> np.ndarray:
    """Runtimes in target units for the rows of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != len(x_scaler):
        raise ValueError(f"expected {len(x_scaler)} features, got {X.shape[1]}")
    z = forward_batch(model, scaler_transform(x_scaler, X))
    return scaler_inverse(y_scaler, z)


EpochObserver = Callable[[int, float], Optional[float]]


def train(model: MlpModel, train_set, test_set, cfg: TrainConfig,
          observe_epoch: Optional[EpochObserver] = None):
    """Fit ``model`` in place on ``train_set = (X, y)``.

    Both scalers are fit on the training rows only. Each epoch visits the
    rows in a fresh seeded order in batches of ``cfg.batch_size`` (the last
    one may be short). ``observe_epoch(epoch, loss)`` may return a
    replacement loss for the learning-rate rule; it exists for testing the
    schedule.

    Returns ``(model, x_scaler, y_scaler, report)``.
    """
    X, y = (np.asarray(a, dtype=np.float64) for a in train_set)
    y = y.ravel()
    if len(y) == 0:
        raise ValueError("empty training set")
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("training features and targets disagree in length")
    if X.shape[1] != model.n_inputs:
        raise ValueError(f"model takes {model.n_inputs} features, data has {X.shape[1]}")

    x_scaler = scaler_fit(X)
    y_scaler = scaler_fit(y)
    Xs = scaler_transform(x_scaler, X)
    ys = scaler_transform(y_scaler, y)

    rng = np.random.default_rng([cfg.seed, 1])
    params = model.params()
    adam = AdamState.zeros_like(params)
    schedule = AdaptiveLearningRate(cfg.lr0, cfg.tol, enabled=cfg.lr_schedule == "adaptive")
    report = TrainReport()
    n = len(ys)
    t = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                value, grads = loss_and_gradients(model, Xs[idx], ys[idx], cfg.alpha)
            if not np.isfinite(value):
                raise TrainingDiverged(epoch, b, value)
            total += value * len(idx)
            t += 1
            adam_step(params, grads, adam, t, schedule.lr, cfg.beta1, cfg.beta2, cfg.eps)
        epoch_loss = total / n
        report.loss_history.append(epoch_loss)
        report.lr_history.append(schedule.lr)
        if observe_epoch is not None:
            replaced = observe_epoch(epoch, epoch_loss)
            if replaced is not None:
                epoch_loss = replaced
        schedule.update(epoch_loss)
        if schedule.converged:
            report.stop_reason = StopReason.TOL_CONVERGED
            break

    report.epochs_run = len(report.loss_history)
    report.final_lr = schedule.lr
    if not model.is_finite():
        raise TrainingDiverged(report.epochs_run, -1, float("nan"))

    score = r2_score(y, predict(model, x_scaler, y_scaler, X))
    report.r2_train, report.r2_train_degenerate = score.value, score.degenerate
    if test_set is not None and len(test_set[1]) > 0:
        Xt, yt = (np.asarray(a, dtype=np.float64) for a in test_set)
        score = r2_score(yt, predict(model, x_scaler, y_scaler, Xt))
        report.r2_test, report.r2_test_degenerate = score.value, score.degenerate
    return model, x_scaler, y_scaler, report


def fit(X, y, cfg: TrainConfig, test_set=None):
    """Build a fresh network sized for ``X`` and train it."""
    X = np.asarray(X, dtype=np.float64)
    model = mlp_init((X.shape[1], *cfg.hidden_sizes, 1), cfg.seed)
    return train(model, (X, y), test_set, cfg)
