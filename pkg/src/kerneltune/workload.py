"""Tunable CPU workload: a 2-D finite-volume Euler pipeline in seven stages.

Each iteration runs xi limiter, eta limiter, xi flux, eta flux, source, RHS
and update. Every stage walks its index space in ``tile_i x tile_j`` blocks,
so the tiling changes the runtime but not the numbers: each output element
is produced by the same elementwise float64 operations whatever the block
shape, which keeps results bitwise tiling-invariant.

Layout: conserved variables ``q[c, j, i]`` with ``c`` in (rho, rho*u, rho*v,
rho*e_t), ``j`` along eta (rows), ``i`` along xi (columns), and two ghost
layers on every side. Boundaries are periodic, the grid is the unit square
with uniform spacing, and the face flux is local Lax-Friedrichs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .space import KERNELS, ParamSpace

GAMMA = 1.4
NG = 2  # ghost layers per side
STAGES = KERNELS
N_STAGES = len(STAGES)
CFL = 0.3
# component weights of the manufactured source
_SOURCE_WEIGHTS = np.array([1.0, 0.5, -0.5, 2.0])


class WorkloadError(RuntimeError):
    pass


class PositivityError(WorkloadError):
    def __init__(self, component: str, j: int, i: int, value: float):
        super().__init__(f"{component} = {value!r} <= 0 at interior cell (j={j}, i={i})")
        self.cell = (j, i)


@dataclass(frozen=True)
class WorkloadSpec:
    nx: int = 64
    ny: int = 64
    steps: int = 1
    epsilon: float = 1.0
    kappa: float = -1.0
    tiles: tuple[tuple[int, int], ...] = ((16, 64),) * N_STAGES
    seed: int = 0
    field: str = "smooth"  # or "uniform"
    source_amplitude: float = 0.05
    dt: Optional[float] = None  # None: CFL-based constant from the initial field

    def __post_init__(self):
        tiles = tuple((int(a), int(b)) for a, b in self.tiles)
        object.__setattr__(self, "tiles", tiles)
        if self.nx < 8 or self.ny < 8:
            raise ValueError("nx and ny must be at least 8")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if len(tiles) != N_STAGES:
            raise ValueError(f"need exactly {N_STAGES} tile pairs, got {len(tiles)}")
        if any(a <= 0 or b <= 0 for a, b in tiles):
            raise ValueError("tile sizes must be positive")
        if self.epsilon not in (0, 1):
            raise ValueError("epsilon must be 0 or 1")
        if not -1.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must lie in [-1, 1]")
        if self.field not in ("smooth", "uniform"):
            raise ValueError(f"unknown initial field {self.field!r}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def dx(self) -> float:
        return 1.0 / self.nx

    @property
    def dy(self) -> float:
        return 1.0 / self.ny

    @property
    def volume(self) -> float:
        return self.dx * self.dy

    def with_tiles(self, tiles) -> "WorkloadSpec":
        return replace(self, tiles=tuple(tiles))


@dataclass
class WorkloadResult:
    elapsed_seconds: float
    checksum: float
    residual_norm: float


@dataclass
class Grid:
    spec: WorkloadSpec
    q: np.ndarray
    xc: np.ndarray  # cell-centre coordinates, (ny, nx)
    yc: np.ndarray
    dt: float = field(default=0.0)

    @property
    def interior(self) -> np.ndarray:
        return self.q[:, NG:-NG, NG:-NG]


def _blocks(n_rows: int, n_cols: int, tile_i: int, tile_j: int) -> Iterator[tuple[slice, slice]]:
    for r0 in range(0, n_rows, tile_i):
        rs = slice(r0, min(r0 + tile_i, n_rows))
        for c0 in range(0, n_cols, tile_j):
            yield rs, slice(c0, min(c0 + tile_j, n_cols))


def fill_ghosts(q: np.ndarray) -> None:
    """Periodic ghost layers, xi first then eta (corners come out periodic too)."""
    q[:, :, :NG] = q[:, :, -2 * NG:-NG]
    q[:, :, -NG:] = q[:, :, NG:2 * NG]
    q[:, :NG, :] = q[:, -2 * NG:-NG, :]
    q[:, -NG:, :] = q[:, NG:2 * NG, :]


def conserved(rho, u, v, p) -> np.ndarray:
    return np.stack([rho, rho * u, rho * v, p / (GAMMA - 1.0) + 0.5 * rho * (u * u + v * v)])


def pressure(q: np.ndarray) -> np.ndarray:
    rho = q[0]
    return (GAMMA - 1.0) * (q[3] - 0.5 * (q[1] * q[1] + q[2] * q[2]) / rho)


def stable_dt(q: np.ndarray, dx: float, dy: float) -> float:
    rho = q[0]
    c = np.sqrt(GAMMA * pressure(q) / rho)
    lam_x = float(np.max(np.abs(q[1] / rho) + c))
    lam_y = float(np.max(np.abs(q[2] / rho) + c))
    return CFL / (lam_x / dx + lam_y / dy)


def init_grid(spec: WorkloadSpec) -> Grid:
    """Smooth periodic field plus a seeded 1e-3 density perturbation."""
    nx, ny = spec.nx, spec.ny
    x = (np.arange(nx) + 0.5) / nx
    y = (np.arange(ny) + 0.5) / ny
    X, Y = np.meshgrid(x, y)
    if spec.field == "uniform":
        rho = np.ones((ny, nx))
        u = np.full((ny, nx), 0.3)
        v = np.full((ny, nx), 0.2)
        p = np.ones((ny, nx))
    else:
        tau = 2.0 * math.pi
        rho = 1.0 + 0.2 * np.sin(tau * X) * np.sin(tau * Y)
        rho *= 1.0 + 1e-3 * np.random.default_rng(spec.seed).standard_normal((ny, nx))
        u = 0.3 * np.sin(tau * Y)
        v = 0.3 * np.cos(tau * X)
        p = 1.0 + 0.1 * np.cos(tau * (X + Y))
    q = np.zeros((4, ny + 2 * NG, nx + 2 * NG))
    q[:, NG:-NG, NG:-NG] = conserved(rho, u, v, p)
    fill_ghosts(q)
    check_positivity(q[:, NG:-NG, NG:-NG])
    dt = spec.dt if spec.dt is not None else stable_dt(q[:, NG:-NG, NG:-NG], spec.dx, spec.dy)
    return Grid(spec, q, X, Y, dt)


def check_positivity(interior: np.ndarray) -> None:
    for c, name in ((0, "rho"), (3, "rho*e_t")):
        bad = ~(interior[c] > 0)
        if bad.any():
            j, i = (int(k) for k in np.argwhere(bad)[0])
            raise PositivityError(name, j, i, float(interior[c, j, i]))


def van_leer(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Van Leer limiter of the ratio ``num / den``; 1 where ``den == 0``."""
    zero = den == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / np.where(zero, 1.0, den)
        a = np.abs(r)
        psi = (r + a) / (1.0 + a)
    return np.where(zero, 1.0, psi)


def muscl_reconstruct(q_km1, q_k, q_kp1, q_kp2, epsilon: float, kappa: float, psi=None):
    """Left/right states at face ``k+1/2``.

    ``psi`` is ``(psi_plus[k-1/2], psi_minus[k+1/2], psi_plus[k+1/2],
    psi_minus[k+3/2])``; ``None`` means no limiting (all ones).
    """
    if psi is None:
        pp_km, pm_k, pp_k, pm_kp = 1.0, 1.0, 1.0, 1.0
    else:
        pp_km, pm_k, pp_k, pm_kp = psi
    e4 = epsilon / 4.0
    qL = q_k + e4 * ((1.0 - kappa) * pp_km * (q_k - q_km1) + (1.0 + kappa) * pm_k * (q_kp1 - q_k))
    qR = q_kp1 - e4 * ((1.0 + kappa) * pp_k * (q_kp1 - q_k) + (1.0 - kappa) * pm_kp * (q_kp2 - q_kp1))
    return qL, qR


def euler_flux(q: np.ndarray, nx: float, ny: float) -> tuple[np.ndarray, np.ndarray]:
    """Inviscid normal flux and the largest normal wave speed."""
    rho = q[0]
    u = q[1] / rho
    v = q[2] / rho
    p = (GAMMA - 1.0) * (q[3] - 0.5 * rho * (u * u + v * v))
    vn = nx * u + ny * v
    f = np.stack([rho * vn, q[1] * vn + nx * p, q[2] * vn + ny * p, (q[3] + p) * vn])
    c = np.sqrt(np.maximum(GAMMA * p / rho, 0.0))
    return f, np.abs(vn) + c


def rusanov(qL: np.ndarray, qR: np.ndarray, nx: float, ny: float) -> np.ndarray:
    fL, sL = euler_flux(qL, nx, ny)
    fR, sR = euler_flux(qR, nx, ny)
    lam = np.maximum(sL, sR)
    return 0.5 * (fL + fR) - 0.5 * lam * (qR - qL)


def _sweep_view(q: np.ndarray, direction: str) -> np.ndarray:
    """View with the sweep direction on the last axis."""
    if direction == "xi":
        return q
    if direction == "eta":
        return q.transpose(0, 2, 1)
    raise ValueError(f"direction must be 'xi' or 'eta', got {direction!r}")


def limiter_stage(q: np.ndarray, direction: str, tiles: tuple[int, int]):
    """Van Leer limiter values on every face along ``direction``.

    Returns ``(psi_plus, psi_minus)`` of shape ``(4, rows, n_faces)`` over the
    interior rows, where face ``f`` sits between padded cells ``f`` and
    ``f+1``. ``psi_plus`` limits with the next face's jump and
    ``psi_minus`` with the previous one; faces with no neighbour get 1.
    """
    Q = _sweep_view(q, direction)[:, NG:-NG, :]
    n_rows, n_cells = Q.shape[1], Q.shape[2]
    n_faces = n_cells - 1
    psi_p = np.ones((4, n_rows, n_faces))
    psi_m = np.ones((4, n_rows, n_faces))
    for rs, fs in _blocks(n_rows, n_faces, *tiles):
        f = np.arange(fs.start, fs.stop)
        d = Q[:, rs, f + 1] - Q[:, rs, f]
        has_next = f + 2 < n_cells
        has_prev = f >= 1
        fn = f[has_next]
        psi_p[:, rs, fn] = van_leer(Q[:, rs, fn + 2] - Q[:, rs, fn + 1], d[:, :, has_next])
        fp = f[has_prev]
        psi_m[:, rs, fp] = van_leer(Q[:, rs, fp] - Q[:, rs, fp - 1], d[:, :, has_prev])
    return psi_p, psi_m


def flux_stage(q: np.ndarray, limiters, direction: str, epsilon: float, kappa: float,
               tiles: tuple[int, int]) -> np.ndarray:
    """Face fluxes along ``direction`` for the interior rows.

    Output shape ``(4, rows, n + 1)``; entry ``k`` is the face on the low
    side of interior cell ``k`` (entry ``n`` closes the last cell).
    """
    psi_p, psi_m = limiters
    Q = _sweep_view(q, direction)[:, NG:-NG, :]
    normal = (1.0, 0.0) if direction == "xi" else (0.0, 1.0)
    n_rows, n_cells = Q.shape[1], Q.shape[2]
    n_out = n_cells - 2 * NG + 1
    out = np.empty((4, n_rows, n_out))
    for rs, ks in _blocks(n_rows, n_out, *tiles):
        f = np.arange(ks.start, ks.stop) + NG - 1  # padded face index
        psi = (psi_p[:, rs, f - 1], psi_m[:, rs, f], psi_p[:, rs, f], psi_m[:, rs, f + 1])
        qL, qR = muscl_reconstruct(Q[:, rs, f - 1], Q[:, rs, f], Q[:, rs, f + 1], Q[:, rs, f + 2],
                                   epsilon, kappa, psi)
        out[:, rs, ks] = rusanov(qL, qR, *normal)
    return out


def source_stage(grid: Grid, tiles: tuple[int, int]) -> np.ndarray:
    """Cell volume times the manufactured source, ``(4, ny, nx)``."""
    spec = grid.spec
    amp = spec.source_amplitude * spec.volume
    out = np.empty((4, spec.ny, spec.nx))
    w = _SOURCE_WEIGHTS[:, None, None]
    for rs, cs in _blocks(spec.ny, spec.nx, *tiles):
        x = grid.xc[rs, cs]
        y = grid.yc[rs, cs]
        shape = 16.0 * x * (1.0 - x) * y * (1.0 - y) + 0.5 * x * y
        out[:, rs, cs] = (amp * w) * shape
    return out


def rhs_stage(f_xi: np.ndarray, f_eta: np.ndarray, source: np.ndarray, dx: float, dy: float,
              tiles: tuple[int, int]) -> np.ndarray:
    """Residual per cell: sum of outward face fluxes times face length minus volume source."""
    ny, nx = source.shape[1:]
    g = f_eta.transpose(0, 2, 1)  # (4, ny + 1, nx)
    res = np.empty_like(source)
    for rs, cs in _blocks(ny, nx, *tiles):
        cs1 = slice(cs.start + 1, cs.stop + 1)
        rs1 = slice(rs.start + 1, rs.stop + 1)
        res[:, rs, cs] = ((f_xi[:, rs, cs1] - f_xi[:, rs, cs]) * dy
                          + (g[:, rs1, cs] - g[:, rs, cs]) * dx) - source[:, rs, cs]
    return res


def update_stage(q: np.ndarray, residual: np.ndarray, dt: float, volume: float,
                 tiles: tuple[int, int]) -> np.ndarray:
    """Forward Euler ``U <- U - dt * R / |Omega|`` on the interior, in place."""
    interior = q[:, NG:-NG, NG:-NG]
    ny, nx = residual.shape[1:]
    scale = dt / volume
    for rs, cs in _blocks(ny, nx, *tiles):
        interior[:, rs, cs] -= scale * residual[:, rs, cs]
    check_positivity(interior)
    return q


def iterate(grid: Grid) -> np.ndarray:
    """One pass of the seven stages; returns the residual it applied."""
    spec = grid.spec
    t = spec.tiles
    q = grid.q
    fill_ghosts(q)
    lim_xi = limiter_stage(q, "xi", t[0])
    lim_eta = limiter_stage(q, "eta", t[1])
    f_xi = flux_stage(q, lim_xi, "xi", spec.epsilon, spec.kappa, t[2])
    f_eta = flux_stage(q, lim_eta, "eta", spec.epsilon, spec.kappa, t[3])
    src = source_stage(grid, t[4])
    res = rhs_stage(f_xi, f_eta, src, spec.dx, spec.dy, t[5])
    update_stage(q, res, grid.dt, spec.volume, t[6])
    return res


def checksum(grid: Grid) -> float:
    """Exactly rounded sum of absolute interior values (order-independent)."""
    return math.fsum(np.abs(grid.interior).ravel().tolist())


def run_workload(spec: WorkloadSpec) -> WorkloadResult:
    """Initialise, then time only the ``steps`` stage iterations."""
    grid = init_grid(spec)
    res = None
    start = time.perf_counter()
    for _ in range(spec.steps):
        res = iterate(grid)
    elapsed = time.perf_counter() - start
    norm = 0.0 if res is None else math.sqrt(math.fsum((res * res).ravel().tolist()))
    return WorkloadResult(max(elapsed, 1e-9), checksum(grid), norm)


def tiles_from_config(config: Sequence[int], space: ParamSpace, nx: int, ny: int,
                      default: tuple[int, int] = (16, 64)) -> tuple[tuple[int, int], ...]:
    """Map gang/vector values onto per-stage tiles.

    ``tile_i = (gang - 1) % ny + 1`` wraps gang counts onto row-block sizes;
    ``tile_j = min(vector, nx)``. Stages without ``<kernel>_gang`` /
    ``<kernel>_vector`` parameters keep ``default``.
    """
    values = dict(zip(space.names, config))
    tiles = []
    for kernel in STAGES:
        g = values.get(f"{kernel}_gang")
        v = values.get(f"{kernel}_vector")
        ti = (int(g) - 1) % ny + 1 if g is not None else default[0]
        tj = min(int(v), nx) if v is not None else default[1]
        tiles.append((ti, tj))
    return tuple(tiles)


# --- golden snapshots ---------------------------------------------------------
# Layout: int64 ndim, ndim x int64 dims, then row-major float64 values; all
# little-endian.

def write_snapshot(path, array: np.ndarray) -> None:
    a = np.ascontiguousarray(array, dtype="<f8")
    with open(path, "wb") as f:
        f.write(np.array([a.ndim, *a.shape], dtype="<i8").tobytes())
        f.write(a.tobytes())


def read_snapshot(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise ValueError(f"{path}: truncated snapshot")
    ndim = int(np.frombuffer(raw[:8], dtype="<i8")[0])
    head = 8 * (1 + ndim)
    shape = tuple(int(d) for d in np.frombuffer(raw[8:head], dtype="<i8"))
    n = math.prod(shape)
    if len(raw) != head + 8 * n:
        raise ValueError(f"{path}: expected {n} values for shape {shape}")
    return np.frombuffer(raw[head:], dtype="<f8").reshape(shape).copy()
