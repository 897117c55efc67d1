"""Discrete tuning-parameter spaces: cardinality, sampling, enumeration, encoding."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

import numpy as np

# Identical draws are redrawn up to this many times the requested count.
MAX_DRAW_FACTOR = 100

GANG_VALUES = tuple(range(100, 1001, 100))
VECTOR_VALUES = tuple(range(32, 385, 32))
KERNELS = (
    "xi_limiter",
    "eta_limiter",
    "xi_flux",
    "eta_flux",
    "source_term",
    "rhs",
    "update_solution",
)


class SpaceError(ValueError):
    """Invalid space definition or a request the space cannot satisfy."""


@dataclass(frozen=True)
class ParamSpec:
    name: str
    values: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if not self.name or not self.name.isidentifier():
            raise SpaceError(f"parameter name {self.name!r} is not an identifier")
        if not self.values:
            raise SpaceError(f"parameter {self.name!r} has no values")
        if any(v <= 0 for v in self.values):
            raise SpaceError(f"parameter {self.name!r} has non-positive values")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise SpaceError(f"values of {self.name!r} must be strictly increasing")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ParamSpace:
    specs: tuple[ParamSpec, ...]
    device_feature: bool = False
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        if not self.specs:
            raise SpaceError("a space needs at least one parameter")
        names = [s.name for s in self.specs]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SpaceError(f"duplicate parameter names: {', '.join(dupes)}")
        index = [{v: i for i, v in enumerate(s.values)} for s in self.specs]
        object.__setattr__(self, "_index", index)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.specs]

    @property
    def n_features(self) -> int:
        return len(self.specs) + (1 if self.device_feature else 0)

    def __len__(self) -> int:
        return len(self.specs)

    def with_device_feature(self, enabled: bool = True) -> "ParamSpace":
        return ParamSpace(self.specs, device_feature=enabled)

    def subspace(self, names: Sequence[str]) -> "ParamSpace":
        by_name = {s.name: s for s in self.specs}
        return ParamSpace(tuple(by_name[n] for n in names), self.device_feature)

    def contains(self, config: Sequence[int]) -> bool:
        if len(config) != len(self.specs):
            return False
        return all(v in idx for v, idx in zip(config, self._index))

    def check(self, config: Sequence[int]) -> tuple[int, ...]:
        """Return ``config`` as a tuple, raising if it is not a member."""
        config = tuple(int(v) for v in config)
        if len(config) != len(self.specs):
            raise SpaceError(f"config has {len(config)} values, space has {len(self.specs)}")
        for v, spec, idx in zip(config, self.specs, self._index):
            if v not in idx:
                raise SpaceError(f"{v} is not a value of {spec.name!r}")
        return config

    def indices(self, config: Sequence[int]) -> tuple[int, ...]:
        return tuple(idx[v] for v, idx in zip(config, self._index))

    def midpoint(self) -> tuple[int, ...]:
        return tuple(s.values[(len(s) - 1) // 2] for s in self.specs)


# A configuration is a plain tuple of ints, one per spec.
Config = tuple[int, ...]


def space_size(space: ParamSpace) -> int:
    """Exact number of configurations (Python ints never overflow)."""
    return math.prod(len(s) for s in space.specs)


def sample_random(space: ParamSpace, n: int, seed: int) -> list[tuple[int, ...]]:
    """Draw ``n`` distinct configurations uniformly from the product space.

    Each parameter is drawn independently and uniformly with a PCG64
    generator (``numpy.random.default_rng(seed)``). A draw identical to an
    earlier one is discarded and redrawn; at most ``100 * n`` draws are made.
    """
    if n < 0:
        raise SpaceError("n must be non-negative")
    if n == 0:
        return []
    size = space_size(space)
    if size < n:
        raise SpaceError(f"space has {size} configurations, {n} requested")

    rng = np.random.default_rng(seed)
    lengths = np.array([len(s) for s in space.specs])
    values = [np.asarray(s.values) for s in space.specs]
    seen: set[tuple[int, ...]] = set()
    out: list[tuple[int, ...]] = []
    budget = MAX_DRAW_FACTOR * n
    while len(out) < n and budget > 0:
        batch = min(budget, max(n - len(out), 16))
        budget -= batch
        idx = (rng.random((batch, len(lengths))) * lengths).astype(np.int64)
        cols = [values[k][idx[:, k]] for k in range(len(lengths))]
        for row in zip(*(c.tolist() for c in cols)):
            if row in seen:
                continue
            seen.add(row)
            out.append(row)
            if len(out) == n:
                break
    if len(out) < n:
        raise SpaceError(f"only {len(out)} distinct configurations after {MAX_DRAW_FACTOR * n} draws")
    return out


def enumerate_all(space: ParamSpace, cap: int) -> Iterator[tuple[int, ...]]:
    """Yield every configuration once, last parameter varying fastest."""
    size = space_size(space)
    if size > cap:
        raise SpaceError(f"space has {size} configurations, enumeration cap is {cap}")
    return itertools.product(*(s.values for s in space.specs))


def encode(config: Sequence[int], space: ParamSpace, device_gflops: float | None = None) -> np.ndarray:
    if space.device_feature and device_gflops is None:
        raise SpaceError("space has a device feature but no device_gflops was given")
    if not space.device_feature and device_gflops is not None:
        raise SpaceError("device_gflops given but the space has no device feature")
    vec = [float(v) for v in space.check(config)]
    if space.device_feature:
        vec.append(float(device_gflops))
    return np.array(vec, dtype=np.float64)


def encode_many(configs: Sequence[Sequence[int]], space: ParamSpace,
                device_gflops: float | None = None) -> np.ndarray:
    """Row-stacked :func:`encode` without the per-row membership check."""
    if space.device_feature != (device_gflops is not None):
        raise SpaceError("device feature mismatch")
    X = np.asarray(configs, dtype=np.float64).reshape(len(configs), len(space.specs))
    if space.device_feature:
        X = np.column_stack([X, np.full(len(X), float(device_gflops))])
    return X


def split(rows: Sequence[Any], train_fraction: float, seed: int) -> tuple[list, list]:
    """Seeded shuffle, then the first ``round(fraction * N)`` rows train."""
    if not 0.0 < train_fraction < 1.0:
        raise SpaceError("train_fraction must lie strictly between 0 and 1")
    n = len(rows)
    if n < 2:
        raise SpaceError(f"cannot split {n} row(s)")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = min(max(int(round(train_fraction * n)), 1), n - 1)
    return [rows[i] for i in perm[:n_train]], [rows[i] for i in perm[n_train:]]


def split_indices(n: int, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    train, test = split(range(n), train_fraction, seed)
    return np.asarray(train, dtype=np.int64), np.asarray(test, dtype=np.int64)


# --- definition files -------------------------------------------------------

def _expand_values(entry: dict, where: str) -> list[int]:
    if "values" in entry and "range" in entry:
        raise SpaceError(f"{where}: give either 'values' or 'range', not both")
    if "values" in entry:
        vals = entry["values"]
        if not isinstance(vals, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in vals):
            raise SpaceError(f"{where}.values: expected a list of integers")
        return vals
    if "range" in entry:
        r = entry["range"]
        try:
            start, stop, step = int(r["start"]), int(r["stop"]), int(r.get("step", 1))
        except (KeyError, TypeError, ValueError) as exc:
            raise SpaceError(f"{where}.range: needs integer start, stop[, step]") from exc
        if step <= 0:
            raise SpaceError(f"{where}.range.step must be positive")
        # stop is inclusive
        return list(range(start, stop + 1, step))
    raise SpaceError(f"{where}: missing 'values' or 'range'")


def space_from_dict(data: dict) -> ParamSpace:
    """Build a space from a parsed definition.

    Schema::

        device_feature: false          # optional
        params:
          - name: xi_limiter_gang
            range: {start: 100, stop: 1000, step: 100}   # stop inclusive
          - name: xi_limiter_vector
            values: [32, 64, 96]
    """
    if not isinstance(data, dict):
        raise SpaceError("space: expected a mapping")
    params = data.get("params")
    if not isinstance(params, list) or not params:
        raise SpaceError("space.params: expected a non-empty list")
    specs = []
    for i, entry in enumerate(params):
        where = f"space.params[{i}]"
        if not isinstance(entry, dict) or "name" not in entry:
            raise SpaceError(f"{where}: expected a mapping with a 'name'")
        try:
            specs.append(ParamSpec(str(entry["name"]), _expand_values(entry, where)))
        except SpaceError as exc:
            if str(exc).startswith(where):
                raise
            raise SpaceError(f"{where}: {exc}") from None
    device_feature = data.get("device_feature", False)
    if not isinstance(device_feature, bool):
        raise SpaceError("space.device_feature: expected true or false")
    return ParamSpace(tuple(specs), device_feature)


def space_to_dict(space: ParamSpace) -> dict:
    return {
        "device_feature": space.device_feature,
        "params": [{"name": s.name, "values": list(s.values)} for s in space.specs],
    }


def kernel_space(kernels: Sequence[str] = KERNELS, device_feature: bool = False) -> ParamSpace:
    """Gang/vector pair per kernel with the 10- and 12-value grids."""
    specs = []
    for k in kernels:
        specs.append(ParamSpec(f"{k}_gang", GANG_VALUES))
        specs.append(ParamSpec(f"{k}_vector", VECTOR_VALUES))
    return ParamSpace(tuple(specs), device_feature)
