"""Experiment orchestration: single/combined training, surrogate search,
re-measurement of the predicted best configurations and report output."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .harness.backends import Backend, measure
from .harness.cost import DeviceSpec
from .harness.dataset import DEVICE_COLUMN, Dataset, Sample, concat
from .space import ParamSpace, enumerate_all, sample_random, space_size, split_indices
from .surrogate import (
    Surrogate,
    TrainConfig,
    TrainReport,
    mlp_init,
    r2_score,
    train,
    write_loss_csv,
)

REPORT_VERSION = 1
DEFAULT_CANDIDATES = 100_000
DEFAULT_ENUMERATION_CAP = 200_000


class TuningError(ValueError):
    pass


@dataclass
class SplitPredictions:
    actual: np.ndarray
    predicted: np.ndarray

    @property
    def r2(self) -> float:
        return r2_score(self.actual, self.predicted).value


@dataclass
class TrainResult:
    surrogate: Surrogate
    report: TrainReport
    train: SplitPredictions
    test: SplitPredictions
    per_device_r2: dict[str, float] = field(default_factory=dict)


def _fit_split(X: np.ndarray, y: np.ndarray, feature_names: list[str], cfg: TrainConfig,
               train_fraction: float, split_seed: int):
    tr, te = split_indices(len(y), train_fraction, split_seed)
    model = mlp_init((X.shape[1], *cfg.hidden_sizes, 1), cfg.seed)
    model, xs, ys, report = train(model, (X[tr], y[tr]), (X[te], y[te]), cfg)
    surrogate = Surrogate(model, xs, ys, cfg, feature_names, report.r2_train, report.r2_test)
    result = TrainResult(
        surrogate, report,
        SplitPredictions(y[tr], surrogate.predict(X[tr])),
        SplitPredictions(y[te], surrogate.predict(X[te])),
    )
    return result, tr, te


def train_single(dataset: Dataset, cfg: TrainConfig, train_fraction: float = 0.75,
                 split_seed: Optional[int] = None) -> TrainResult:
    """75/25 split, scalers fit on the training rows, one network."""
    if dataset.device_column and len(dataset.devices()) > 1:
        raise TuningError("dataset mixes devices; use combined training with the device feature")
    if len(dataset) < 2:
        raise TuningError(f"need at least 2 rows to split, got {len(dataset)}")
    X = dataset.features(with_device=False)
    y = dataset.targets()
    seed = cfg.seed if split_seed is None else split_seed
    result, _, _ = _fit_split(X, y, list(dataset.param_names), cfg, train_fraction, seed)
    return result


def train_combined(datasets: Mapping[str, Dataset], devices: Mapping[str, DeviceSpec],
                   cfg: TrainConfig, train_fraction: float = 0.75,
                   split_seed: Optional[int] = None) -> TrainResult:
    """Pool per-device datasets with the device GFLOPS appended as the last
    feature and train one network; R² is also broken down per device on
    the test split."""
    if len(datasets) < 2:
        raise TuningError("combined training needs datasets from at least 2 devices")
    parts, labels = [], []
    names = None
    for dev_name, ds in datasets.items():
        if dev_name not in devices:
            raise TuningError(f"device {dev_name!r} is not in the device table")
        if ds.device_column and len(ds.devices()) > 1:
            raise TuningError(f"dataset for {dev_name!r} mixes devices")
        if names is None:
            names = ds.param_names
        elif ds.param_names != names:
            raise TuningError("datasets disagree on the parameter list")
        parts.append(ds.with_device(devices[dev_name].gflops))
        labels += [dev_name] * len(ds)
    pooled = concat(parts)
    X = pooled.features(with_device=True)
    y = pooled.targets()
    labels = np.array(labels)
    seed = cfg.seed if split_seed is None else split_seed
    result, _, te = _fit_split(X, y, list(names) + [DEVICE_COLUMN], cfg, train_fraction, seed)
    for dev_name in datasets:
        mask = labels[te] == dev_name
        if mask.any():
            result.per_device_r2[dev_name] = r2_score(result.test.actual[mask],
                                                      result.test.predicted[mask]).value
    return result


def _check_layout(surrogate: Surrogate, space: ParamSpace, device_gflops) -> None:
    want = len(space) + (1 if surrogate.device_feature else 0)
    if surrogate.n_features != want:
        raise TuningError(f"model takes {surrogate.n_features} features; space gives {want}")
    if surrogate.feature_names and surrogate.feature_names[:len(space)] != space.names:
        raise TuningError("model feature names do not match the space parameters")
    if surrogate.device_feature and device_gflops is None:
        raise TuningError("model was trained with the device feature; pass device_gflops")


def search(surrogate: Surrogate, space: ParamSpace, device_gflops: Optional[float] = None,
           n_candidates: int = DEFAULT_CANDIDATES, k: int = 10, seed: int = 0,
           enumeration_cap: int = DEFAULT_ENUMERATION_CAP,
           candidates: Optional[Sequence[Sequence[int]]] = None) -> list[tuple[tuple[int, ...], float]]:
    """The ``k`` configurations with the smallest predicted runtime.

    Spaces no larger than ``enumeration_cap`` are searched exhaustively;
    otherwise ``n_candidates`` distinct random configurations are scored.
    Ties are broken by lexicographic configuration order.
    """
    if k < 1:
        raise TuningError("k must be at least 1")
    _check_layout(surrogate, space, device_gflops)
    if candidates is None:
        if space_size(space) <= enumeration_cap:
            candidates = list(enumerate_all(space, enumeration_cap))
        else:
            candidates = sample_random(space, min(n_candidates, space_size(space)), seed)
    C = np.asarray(candidates, dtype=np.int64).reshape(-1, len(space))
    X = C.astype(np.float64)
    if surrogate.device_feature:
        X = np.column_stack([X, np.full(len(X), float(device_gflops))])
    pred = np.concatenate([surrogate.predict(X[i:i + 65536]) for i in range(0, len(X), 65536)])
    order = np.lexsort(tuple(C[:, j] for j in range(C.shape[1] - 1, -1, -1)) + (pred,))
    return [(tuple(int(v) for v in C[i]), float(pred[i])) for i in order[:k]]


def validate(backend: Backend, device: DeviceSpec, configs: Sequence[Sequence[int]],
             repeats: int = 1) -> list[Sample]:
    if not configs:
        raise TuningError("nothing to validate")
    return [measure(backend, c, device, repeats) for c in configs]


@dataclass
class TopEntry:
    config: tuple[int, ...]
    predicted_s: float
    measured_s: float
    dispersion_s: float


@dataclass
class TuneReport:
    best_predicted: list[TopEntry]
    baseline_config: tuple[int, ...]
    baseline_measured_s: float
    best_measured: TopEntry
    speedup: float
    r2_train: Optional[float]
    r2_test: Optional[float]
    search_candidates: int
    device: str
    param_names: list[str]
    loss_csv: str = "loss.csv"
    per_device_r2: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        entry = lambda e: {"config": dict(zip(self.param_names, e.config)),
                           "predicted_s": e.predicted_s, "measured_s": e.measured_s,
                           "dispersion_s": e.dispersion_s}
        return {
            "report_version": REPORT_VERSION,
            "device": self.device,
            "top_k": [entry(e) for e in self.best_predicted],
            "best": entry(self.best_measured),
            "baseline": {"config": dict(zip(self.param_names, self.baseline_config)),
                         "measured_s": self.baseline_measured_s},
            "speedup": self.speedup,
            "r2_train": self.r2_train,
            "r2_test": self.r2_test,
            "per_device_r2": self.per_device_r2,
            "search_candidates": self.search_candidates,
            "loss_history": self.loss_csv,
        }


def write_scatter(path, split: SplitPredictions) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["actual_s", "predicted_s"])
        for a, p in zip(split.actual.tolist(), split.predicted.tolist()):
            w.writerow([repr(a), repr(p)])


def write_training_artifacts(out_dir, result: TrainResult) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_scatter(out / "scatter_train.csv", result.train)
    write_scatter(out / "scatter_test.csv", result.test)
    write_loss_csv(out / "loss.csv", result.report.loss_history)


def make_report(out_dir, space: ParamSpace, device: DeviceSpec,
                top: Sequence[tuple[tuple[int, ...], float]], measured: Sequence[Sample],
                baseline: Sample, train_result: Optional[TrainResult] = None,
                search_candidates: int = 0) -> TuneReport:
    """Assemble the report and write ``report.json``, ``topk.csv`` and, when
    a training result is given, the scatter and loss CSVs."""
    if len(top) != len(measured) or not top:
        raise TuningError("every top-k configuration needs one measurement")
    entries = [TopEntry(c, p, s.runtime_s, s.dispersion_s) for (c, p), s in zip(top, measured)]
    best = min(entries, key=lambda e: (e.measured_s, e.config))
    surrogate = train_result.surrogate if train_result else None
    report = TuneReport(
        entries, baseline.config, baseline.runtime_s, best,
        baseline.runtime_s / best.measured_s,
        surrogate.r2_train if surrogate else None,
        surrogate.r2_test if surrogate else None,
        search_candidates, device.name, space.names,
        per_device_r2=dict(train_result.per_device_r2) if train_result else {},
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if train_result is not None:
        write_training_artifacts(out, train_result)
    with open(out / "topk.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["rank", *space.names, "predicted_s", "measured_s", "dispersion_s"])
        for rank, e in enumerate(entries, start=1):
            w.writerow([rank, *e.config, repr(e.predicted_s), repr(e.measured_s), repr(e.dispersion_s)])
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2))
    return report


def tune(surrogate: Surrogate, space: ParamSpace, backend: Backend, device: DeviceSpec,
         out_dir, k: int = 10, n_candidates: int = DEFAULT_CANDIDATES, seed: int = 0,
         repeats: int = 1, enumeration_cap: int = DEFAULT_ENUMERATION_CAP,
         baseline: Optional[Sequence[int]] = None,
         train_result: Optional[TrainResult] = None) -> TuneReport:
    """Search, re-measure the top ``k`` and the baseline, write the report.

    The baseline defaults to the middle grid value of every parameter.
    """
    gflops = float(device.gflops) if surrogate.device_feature else None
    top = search(surrogate, space, gflops, n_candidates, k, seed, enumeration_cap)
    measured = validate(backend, device, [c for c, _ in top], repeats)
    base_cfg = space.check(baseline) if baseline is not None else space.midpoint()
    base = measure(backend, base_cfg, device, repeats)
    n_cand = space_size(space) if space_size(space) <= enumeration_cap else min(n_candidates, space_size(space))
    return make_report(out_dir, space, device, top, measured, base, train_result, n_cand)
