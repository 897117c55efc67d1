"""Measured samples and their CSV representation.

CSV layout: a header ``p1,...,pK[,device_gflops],runtime_s,repeats,dispersion_s``
followed by one row per sample. Reals are written with 17 significant digits
so that a save/load round-trip is exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

DEVICE_COLUMN = "device_gflops"
TAIL_COLUMNS = ("runtime_s", "repeats", "dispersion_s")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Sample:
    config: tuple[int, ...]
    device_gflops: Optional[float]
    runtime_s: float
    repeats: int = 1
    dispersion_s: float = 0.0

    def __post_init__(self):
        if not self.runtime_s > 0:
            raise DatasetError(f"runtime must be positive, got {self.runtime_s}")
        if self.repeats < 1:
            raise DatasetError("repeats must be at least 1")

    @property
    def key(self) -> tuple:
        return self.config, self.device_gflops


@dataclass
class Dataset:
    param_names: list[str]
    device_column: bool = False
    rows: list[Sample] = field(default_factory=list)

    def __post_init__(self):
        self.param_names = list(self.param_names)
        rows, self.rows, self._keys = self.rows, [], set()
        for r in rows:
            self.append(r)

    @property
    def columns(self) -> list[str]:
        cols = list(self.param_names)
        if self.device_column:
            cols.append(DEVICE_COLUMN)
        return cols + list(TAIL_COLUMNS)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __contains__(self, key) -> bool:
        return key in self._keys

    def append(self, sample: Sample) -> None:
        if len(sample.config) != len(self.param_names):
            raise DatasetError(f"sample has {len(sample.config)} parameters, schema has {len(self.param_names)}")
        if self.device_column != (sample.device_gflops is not None):
            raise DatasetError("sample device column does not match the schema")
        if sample.key in self._keys:
            raise DatasetError(f"duplicate configuration {sample.config}")
        self._keys.add(sample.key)
        self.rows.append(sample)

    def empty_like(self) -> "Dataset":
        return Dataset(self.param_names, self.device_column)

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(self.param_names, self.device_column, [self.rows[i] for i in indices])

    def configs(self) -> np.ndarray:
        return np.array([r.config for r in self.rows], dtype=np.int64).reshape(len(self), len(self.param_names))

    def features(self, with_device: Optional[bool] = None) -> np.ndarray:
        """Feature matrix; the device column is appended last when present."""
        with_device = self.device_column if with_device is None else with_device
        X = self.configs().astype(np.float64)
        if with_device:
            if not self.device_column:
                raise DatasetError("dataset has no device column")
            X = np.column_stack([X, self.device_values()])
        return X

    def targets(self) -> np.ndarray:
        return np.array([r.runtime_s for r in self.rows], dtype=np.float64)

    def device_values(self) -> np.ndarray:
        return np.array([r.device_gflops for r in self.rows], dtype=np.float64)

    def devices(self) -> list[float]:
        """Distinct device GFLOPS values in first-seen order."""
        return list(dict.fromkeys(r.device_gflops for r in self.rows)) if self.device_column else []

    def by_device(self) -> dict[float, "Dataset"]:
        if not self.device_column:
            raise DatasetError("dataset has no device column")
        groups: dict[float, Dataset] = {}
        for r in self.rows:
            groups.setdefault(r.device_gflops, self.empty_like()).append(r)
        return groups

    def with_device(self, gflops: float) -> "Dataset":
        """Copy with every row's device column set to ``gflops``."""
        return Dataset(self.param_names, True,
                       [Sample(r.config, float(gflops), r.runtime_s, r.repeats, r.dispersion_s)
                        for r in self.rows])

    def without_device(self) -> "Dataset":
        return Dataset(self.param_names, False,
                       [Sample(r.config, None, r.runtime_s, r.repeats, r.dispersion_s) for r in self.rows])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.param_names == other.param_names and self.device_column == other.device_column
                and self.rows == other.rows)


def concat(parts: Sequence[Dataset]) -> Dataset:
    if not parts:
        raise DatasetError("nothing to concatenate")
    first = parts[0]
    out = first.empty_like()
    for p in parts:
        if p.param_names != first.param_names or p.device_column != first.device_column:
            raise DatasetError("datasets have different schemas")
        for r in p:
            out.append(r)
    return out


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_row(sample: Sample) -> list[str]:
    row = [str(v) for v in sample.config]
    if sample.device_gflops is not None:
        row.append(_fmt(sample.device_gflops))
    return row + [_fmt(sample.runtime_s), str(sample.repeats), _fmt(sample.dispersion_s)]


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(dataset.columns)
        for r in dataset:
            w.writerow(format_row(r))


def parse_header(header: Sequence[str]) -> tuple[list[str], bool]:
    header = [h.strip() for h in header]
    if len(header) < 4 or tuple(header[-3:]) != TAIL_COLUMNS:
        raise DatasetError(f"header must end with {','.join(TAIL_COLUMNS)}; got {','.join(header)}")
    names = header[:-3]
    device = bool(names) and names[-1] == DEVICE_COLUMN
    if device:
        names = names[:-1]
    if not names:
        raise DatasetError("header names no tuning parameters")
    if len(set(names)) != len(names):
        raise DatasetError("header repeats a parameter name")
    return names, device


def load_dataset(path, expected_params: Optional[Sequence[str]] = None) -> Dataset:
    """Read a dataset CSV; malformed rows are reported by file line number."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        names, device = parse_header(header)
        if expected_params is not None and list(expected_params) != names:
            raise DatasetError(f"{path}: parameters {names} do not match expected {list(expected_params)}")
        ds = Dataset(names, device)
        width = len(header)
        k = len(names)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DatasetError(f"{path}:{line}: expected {width} fields, got {len(row)}")
            try:
                config = tuple(int(v) for v in row[:k])
                gflops = float(row[k]) if device else None
                off = k + (1 if device else 0)
                sample = Sample(config, gflops, float(row[off]), int(row[off + 1]), float(row[off + 2]))
                ds.append(sample)
            except (ValueError, DatasetError) as exc:
                raise DatasetError(f"{path}:{line}: {exc}") from None
    return ds
