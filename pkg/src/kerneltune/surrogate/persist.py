"""Versioned JSON model files and loss-history CSV export.

Model file layout (``format_version`` 1)::

    {
      "format_version": 1,
      "layer_sizes": [14, 64, 64, 64, 1],
      "weights": [[row, row, ...], ...],   # per layer, fan_in rows of fan_out floats
      "biases": [[...], ...],
      "x_scaler": {"means": [...], "stds": [...]},
      "y_scaler": {"means": [m], "stds": [s]},
      "train_config": {...},
      "feature_names": [...],
      "r2_train": 0.97, "r2_test": 0.95
    }

Floats are written with ``repr`` precision so a reload is bit-exact.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .mlp import MlpModel
from .optim import TrainConfig
from .scaler import ScalerState
from .training import predict

FORMAT_VERSION = 1


class ModelFileError(ValueError):
    """Unreadable or structurally invalid model file."""


class ModelVersionError(ModelFileError):
    pass


@dataclass
class Surrogate:
    model: MlpModel
    x_scaler: ScalerState
    y_scaler: ScalerState
    train_config: TrainConfig = field(default_factory=TrainConfig)
    feature_names: list[str] = field(default_factory=list)
    r2_train: Optional[float] = None
    r2_test: Optional[float] = None

    @property
    def n_features(self) -> int:
        return self.model.n_inputs

    @property
    def device_feature(self) -> bool:
        return bool(self.feature_names) and self.feature_names[-1] == "device_gflops"

    def predict(self, X) -> np.ndarray:
        return predict(self.model, self.x_scaler, self.y_scaler, X)


def _float_or_none(x):
    return None if x is None else float(x)


def to_dict(s: Surrogate) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "layer_sizes": list(s.model.layer_sizes),
        "weights": [W.tolist() for W in s.model.weights],
        "biases": [b.tolist() for b in s.model.biases],
        "x_scaler": s.x_scaler.to_dict(),
        "y_scaler": s.y_scaler.to_dict(),
        "train_config": s.train_config.to_dict(),
        "feature_names": list(s.feature_names),
        "r2_train": _float_or_none(s.r2_train),
        "r2_test": _float_or_none(s.r2_test),
    }


def from_dict(d: dict) -> Surrogate:
    if not isinstance(d, dict) or "format_version" not in d:
        raise ModelFileError("not a model file: missing format_version")
    if d["format_version"] != FORMAT_VERSION:
        raise ModelVersionError(
            f"model format version {d['format_version']!r} is not supported "
            f"(this build reads version {FORMAT_VERSION})")
    try:
        model = MlpModel(
            tuple(d["layer_sizes"]),
            [np.array(W, dtype=np.float64).reshape(a, b) for W, a, b in
             zip(d["weights"], d["layer_sizes"][:-1], d["layer_sizes"][1:])],
            [np.array(b, dtype=np.float64) for b in d["biases"]],
        )
        x_scaler = ScalerState.from_dict(d["x_scaler"])
        y_scaler = ScalerState.from_dict(d["y_scaler"])
        cfg = TrainConfig.from_dict(d.get("train_config", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"malformed model file: {exc}") from exc
    if len(x_scaler) != model.n_inputs or len(y_scaler) != 1:
        raise ModelFileError("scaler dimensions do not match the network")
    if not model.is_finite():
        raise ModelFileError("model contains non-finite parameters")
    return Surrogate(model, x_scaler, y_scaler, cfg, list(d.get("feature_names", [])),
                     d.get("r2_train"), d.get("r2_test"))


def save_model(path, surrogate: Surrogate) -> None:
    path = Path(path)
    path.write_text(json.dumps(to_dict(surrogate), allow_nan=False))


def load_model(path) -> Surrogate:
    try:
        d = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ModelFileError(f"model file {path} does not exist") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFileError(f"corrupt model file {path}: {exc}") from exc
    return from_dict(d)


def write_loss_csv(path, loss_history: Sequence[float]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "loss"])
        for i, v in enumerate(loss_history, start=1):
            w.writerow([i, repr(float(v)) if math.isfinite(v) else "nan"])
