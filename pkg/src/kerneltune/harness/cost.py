"""Deterministic synthetic runtime surface standing in for GPU timings.

For each kernel stage ``k`` with gang/vector parameters ``(g_k, v_k)``::

    t = base(device)
        + sum_k A_k * log2(g_k / g*_k)**2 + B_k * log2(v_k / v*_k)**2
        + c_int * sum_k log2(g_k / g*_k) * log2(v_k / v*_k)
        + noise

    base(device) = base_scale * 4700 / gflops

and the whole expression is multiplied by ``time_scale``. Noise is a normal
draw seeded by hashing ``(config, device, seed)``, so it is reproducible.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..space import KERNELS, ParamSpace

REFERENCE_GFLOPS = 4700.0
DEFAULT_WINDOW = (0.8, 2.0)

# Optimum grid indices and relative curvatures, one entry per kernel in
# KERNELS order. Limiter optima sit mid-grid, the rest near the low end; the
# two flux stages dominate.
_GANG_OPT_IDX = (4, 5, 0, 1, 1, 2, 1)
_VECTOR_OPT_IDX = (5, 4, 0, 1, 2, 1, 2)
_GANG_AMP = (1.0, 1.0, 3.0, 3.0, 0.3, 0.5, 0.4)
_VECTOR_AMP = (1.2, 1.0, 3.0, 2.5, 0.3, 0.6, 0.4)
_INTERACTION = 0.5  # times min_k sqrt(A_k * B_k); keeps every stage convex


@dataclass(frozen=True)
class DeviceSpec:
    name: str
    gflops: float
    base_scale: float = 0.8

    def __post_init__(self):
        if not self.gflops > 0:
            raise ValueError(f"device {self.name!r}: gflops must be positive")
        if not self.base_scale > 0:
            raise ValueError(f"device {self.name!r}: base_scale must be positive")

    def base_time(self) -> float:
        return self.base_scale * (REFERENCE_GFLOPS / self.gflops)


REFERENCE_DEVICES = (
    DeviceSpec("C2075", 513.0),
    DeviceSpec("P100", 4700.0),
    DeviceSpec("V100", 7500.0),
)


@dataclass(frozen=True)
class StageCost:
    gang: str
    vector: Optional[str]
    gang_opt: int
    vector_opt: Optional[int]
    gang_amp: float
    vector_amp: float = 0.0

    def __post_init__(self):
        if self.gang_amp < 0 or self.vector_amp < 0:
            raise ValueError(f"stage {self.gang}: amplitudes must be non-negative")


@dataclass
class CostModelSpec:
    stages: list[StageCost]
    interaction: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0
    time_scale: float = 1.0
    # resolved column positions, filled by bind()
    _cols: Optional[list] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.time_scale <= 0:
            raise ValueError("time_scale must be positive")

    def bind(self, space: ParamSpace) -> "CostModelSpec":
        """Check the optima lie on the space's grids and cache column indices."""
        names = space.names
        cols = []
        for st in self.stages:
            if st.gang not in names:
                raise ValueError(f"cost stage references unknown parameter {st.gang!r}")
            gi = names.index(st.gang)
            if st.gang_opt not in space.specs[gi].values:
                raise ValueError(f"optimum {st.gang_opt} is not a value of {st.gang!r}")
            vi = None
            if st.vector is not None:
                if st.vector not in names:
                    raise ValueError(f"cost stage references unknown parameter {st.vector!r}")
                vi = names.index(st.vector)
                if st.vector_opt not in space.specs[vi].values:
                    raise ValueError(f"optimum {st.vector_opt} is not a value of {st.vector!r}")
            cols.append((gi, vi))
        self._cols = cols
        return self

    def to_dict(self) -> dict:
        return {
            "stages": [asdict(s) for s in self.stages],
            "interaction": self.interaction,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "time_scale": self.time_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CostModelSpec":
        return cls(
            [StageCost(**s) for s in d["stages"]],
            float(d.get("interaction", 0.0)),
            float(d.get("noise_sigma", 0.0)),
            int(d.get("seed", 0)),
            float(d.get("time_scale", 1.0)),
        )


def _pair_stages(space: ParamSpace) -> list[tuple[str, Optional[str]]]:
    """Group ``<kernel>_gang`` with ``<kernel>_vector``; otherwise pair in order."""
    names = space.names
    pairs, used = [], set()
    for n in names:
        if n.endswith("_gang") and n[:-5] + "_vector" in names:
            pairs.append((n, n[:-5] + "_vector"))
            used.update(pairs[-1])
    rest = [n for n in names if n not in used]
    for i in range(0, len(rest), 2):
        pairs.append((rest[i], rest[i + 1] if i + 1 < len(rest) else None))
    return pairs


def _stage_excess_max(st: StageCost, space: ParamSpace, interaction: float) -> float:
    """Largest stage contribution over the corners of its (gang, vector) box."""
    names = space.names
    gv = space.specs[names.index(st.gang)].values
    g_ends = [math.log2(gv[0] / st.gang_opt), math.log2(gv[-1] / st.gang_opt)]
    if st.vector is None:
        return max(st.gang_amp * d * d for d in g_ends)
    vv = space.specs[names.index(st.vector)].values
    v_ends = [math.log2(vv[0] / st.vector_opt), math.log2(vv[-1] / st.vector_opt)]
    return max(st.gang_amp * dg * dg + st.vector_amp * dv * dv + interaction * dg * dv
               for dg in g_ends for dv in v_ends)


def default_cost_model(space: ParamSpace, calibration_device: DeviceSpec = REFERENCE_DEVICES[1],
                       window: tuple[float, float] = DEFAULT_WINDOW, noise_sigma: float = 0.0,
                       seed: int = 0) -> CostModelSpec:
    """Cost surface whose noiseless range on ``calibration_device`` is ``window``.

    The minimum (all stages at their optima) equals the device's base time,
    which must match ``window[0]``; curvatures are scaled so the worst corner
    of the space reaches ``window[1]``. The surface is convex in log2
    coordinates, so the corners bound it.
    """
    lo, hi = window
    base = calibration_device.base_time()
    if not math.isclose(base, lo, rel_tol=1e-12):
        raise ValueError(f"device {calibration_device.name} has base time {base}, window starts at {lo}")
    names = space.names
    stages = []
    for pos, (g, v) in enumerate(_pair_stages(space)):
        kernel = g[:-5] if g.endswith("_gang") else None
        k = KERNELS.index(kernel) if kernel in KERNELS else pos
        gv = space.specs[names.index(g)].values
        g_opt = gv[min(_GANG_OPT_IDX[k % 7], len(gv) - 1)]
        v_opt = None
        if v is not None:
            vv = space.specs[names.index(v)].values
            v_opt = vv[min(_VECTOR_OPT_IDX[k % 7], len(vv) - 1)]
        stages.append(StageCost(g, v, g_opt, v_opt, _GANG_AMP[k % 7],
                                _VECTOR_AMP[k % 7] if v is not None else 0.0))
    paired = [s for s in stages if s.vector is not None]
    interaction = _INTERACTION * min(math.sqrt(s.gang_amp * s.vector_amp) for s in paired) if paired else 0.0
    excess = sum(_stage_excess_max(s, space, interaction) for s in stages)
    scale = (hi - lo) / excess if excess > 0 else 0.0
    stages = [StageCost(s.gang, s.vector, s.gang_opt, s.vector_opt,
                        s.gang_amp * scale, s.vector_amp * scale) for s in stages]
    return CostModelSpec(stages, interaction * scale, noise_sigma, seed).bind(space)


def noise_draw(config: Sequence[int], device: DeviceSpec, seed: int) -> float:
    """Standard normal variate fixed by ``(config, device, seed)``."""
    key = repr((tuple(int(v) for v in config), device.name, float(device.gflops), int(seed)))
    digest = hashlib.blake2b(key.encode(), digest_size=8).digest()
    return float(np.random.default_rng(int.from_bytes(digest, "little")).standard_normal())


def _surface(spec: CostModelSpec, C: np.ndarray) -> np.ndarray:
    out = np.zeros(C.shape[0])
    for st, (gi, vi) in zip(spec.stages, spec._cols):
        dg = np.log2(C[:, gi] / st.gang_opt)
        out += st.gang_amp * dg * dg
        if vi is not None:
            dv = np.log2(C[:, vi] / st.vector_opt)
            out += st.vector_amp * dv * dv + spec.interaction * dg * dv
    return out


def synthetic_cost_many(configs, device: DeviceSpec, spec: CostModelSpec,
                        space: Optional[ParamSpace] = None) -> np.ndarray:
    if space is not None:
        spec.bind(space)
    if spec._cols is None:
        raise ValueError("cost model is not bound to a space; pass space=")
    C = np.asarray(configs, dtype=np.float64)
    if C.ndim == 1:
        C = C[None, :]
    t = device.base_time() + _surface(spec, C)
    if spec.noise_sigma > 0:
        t = t + spec.noise_sigma * np.array([noise_draw(c, device, spec.seed) for c in C.astype(np.int64).tolist()])
    # noise cannot produce a non-positive runtime
    t = np.maximum(t, 1e-3 * device.base_time())
    return t * spec.time_scale


def synthetic_cost(config: Sequence[int], device: DeviceSpec, spec: CostModelSpec,
                   space: Optional[ParamSpace] = None) -> float:
    return float(synthetic_cost_many([tuple(config)], device, spec, space)[0])


def optimum_config(space: ParamSpace, spec: CostModelSpec) -> tuple[int, ...]:
    """Per-axis grid point nearest the optima in log2 distance (exact optimum
    when the interaction term vanishes or the optima lie on the grid)."""
    spec.bind(space)
    target = {}
    for st in spec.stages:
        target[st.gang] = st.gang_opt
        if st.vector is not None:
            target[st.vector] = st.vector_opt
    out = []
    for s in space.specs:
        if s.name not in target:
            out.append(s.values[0])
            continue
        out.append(min(s.values, key=lambda v: (abs(math.log2(v / target[s.name])), v)))
    return tuple(out)
