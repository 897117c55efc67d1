"""Fast built-in numerical checks run by ``kerneltune selfcheck``.

Each check returns a short detail string on success and raises
``AssertionError`` on failure. Implementations are looked up through their
modules at call time so a patched function is what gets checked.
"""

from __future__ import annotations

import time
from typing import Callable

import numpy as np

from . import workload
from .surrogate import mlp, scaler, training

ARCHITECTURES = ((14, 64, 64, 1), (2, 8, 1), (4, 16, 8, 1), (7, 5, 5, 5, 1), (1, 3, 1))
FD_STEP = 1e-6
GRAD_TOL = 1e-5


def gradient_relative_error(sizes, seed: int, rows: int = 6, alpha: float = 1e-4,
                            max_checked: int = 200) -> float:
    """Worst per-array relative error ``|a - n| / max(|a|, |n|)`` (2-norms)
    between analytic and central-difference gradients.

    Arrays with more than ``max_checked`` entries are compared on a random
    subset of them. Norms rather than entries keep near-zero gradients,
    where central differences are pure roundoff, from dominating.
    """
    rng = np.random.default_rng(seed)
    model = mlp.mlp_init(sizes, seed)
    # nonzero biases keep pre-activations away from the ReLU kink
    for b in model.biases:
        b[:] = rng.normal(0.0, 0.1, b.shape)
    X = rng.normal(size=(rows, sizes[0]))
    y = rng.normal(size=rows)
    analytic = mlp.loss_and_gradients(model, X, y, alpha)[1]
    worst = 0.0
    for p, ga in zip(model.params(), analytic):
        flat, gaf = p.reshape(-1), ga.reshape(-1)
        idx = np.arange(flat.size)
        if flat.size > max_checked:
            idx = np.sort(rng.choice(flat.size, max_checked, replace=False))
        num = np.empty(len(idx))
        for j, i in enumerate(idx):
            old = flat[i]
            flat[i] = old + FD_STEP
            up = mlp.loss(model, X, y, alpha)
            flat[i] = old - FD_STEP
            down = mlp.loss(model, X, y, alpha)
            flat[i] = old
            num[j] = (up - down) / (2.0 * FD_STEP)
        a = gaf[idx]
        scale = max(np.linalg.norm(a), np.linalg.norm(num))
        if scale > 0:
            worst = max(worst, float(np.linalg.norm(a - num) / scale))
    return worst


def check_gradients() -> str:
    errs = [gradient_relative_error(s, seed) for seed, s in enumerate(ARCHITECTURES)]
    worst = max(errs)
    assert worst <= GRAD_TOL, f"max relative error {worst:.3g} > {GRAD_TOL}"
    return f"{len(errs)} architectures, max rel err {worst:.2e}"


def check_scaler() -> str:
    rng = np.random.default_rng(0)
    X = rng.normal(3.0, 2.0, size=(50, 4))
    X[:, 2] = 5.0
    st = scaler.scaler_fit(X)
    Z = scaler.scaler_transform(st, X)
    back = scaler.scaler_inverse(st, Z)
    err = float(np.max(np.abs(back[:, [0, 1, 3]] - X[:, [0, 1, 3]])))
    assert err <= 1e-12, f"round-trip error {err:.3g}"
    assert st.constant.tolist() == [False, False, True, False], "constant column not flagged"
    assert np.all(Z[:, 2] == 0.0), "constant column does not map to 0"
    st1 = scaler.scaler_fit(np.array([[1.0], [3.0]]))
    assert st1.means[0] == 2.0 and st1.stds[0] == 1.0, "[1, 3] should give mean 2, std 1"
    return f"round-trip err {err:.1e}"


def check_r2() -> str:
    cases = [
        ([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 1.0),
        ([1.0, 2.0, 3.0], [2.0, 2.0, 2.0], 0.0),
        ([1.0, 2.0, 3.0], [1.5, 2.0, 2.5], 0.75),
    ]
    for a, p, want in cases:
        got = training.r2_score(a, p)
        assert abs(got.value - want) <= 1e-12 and not got.degenerate, f"r2({a}, {p}) = {got.value}, want {want}"
    deg = training.r2_score([4.0, 4.0], [1.0, 2.0])
    assert deg.value == 0.0 and deg.degenerate, "constant actuals must give 0 flagged degenerate"
    return f"{len(cases) + 1} hand cases"


def check_muscl_linear() -> str:
    x = np.linspace(-1.0, 2.0, 9)
    q = 0.7 * x + 0.3
    worst = 0.0
    for kappa in (-1.0, 0.0, 1.0 / 3.0, 0.5, 1.0):
        qL, qR = workload.muscl_reconstruct(q[:-3], q[1:-2], q[2:-1], q[3:], 1.0, kappa)
        face = 0.7 * 0.5 * (x[1:-2] + x[2:-1]) + 0.3
        worst = max(worst, float(np.max(np.abs(qL - face))), float(np.max(np.abs(qR - face))))
    assert worst <= 1e-12, f"linear data not reproduced at faces, err {worst:.3g}"
    return f"max face err {worst:.1e}"


def check_tiling() -> str:
    base = workload.WorkloadSpec(nx=24, ny=20, steps=2)
    tilings = [((1, 1),) * 7, ((20, 24),) * 7, ((3, 5), (7, 2), (20, 1), (1, 24), (6, 6), (9, 11), (2, 13))]
    sums = {workload.run_workload(base.with_tiles(t)).checksum for t in tilings}
    assert len(sums) == 1, f"checksums differ across tilings: {sorted(sums)}"
    return f"{len(tilings)} tilings agree bitwise"


CHECKS: list[tuple[str, Callable[[], str]]] = [
    ("gradient", check_gradients),
    ("scaler_roundtrip", check_scaler),
    ("r2_hand_cases", check_r2),
    ("muscl_linear", check_muscl_linear),
    ("tiling_invariance", check_tiling),
]


def run_all(out=print) -> bool:
    """Run every check, print a pass/fail table, return True iff all pass."""
    ok = True
    out(f"{'check':<20} {'result':<6} {'time_s':>7}  detail")
    for name, fn in CHECKS:
        start = time.perf_counter()
        try:
            detail, passed = fn(), True
        except Exception as exc:  # a crashing check is a failing check
            detail, passed = f"{type(exc).__name__}: {exc}", False
        ok &= passed
        out(f"{name:<20} {'PASS' if passed else 'FAIL':<6} {time.perf_counter() - start:7.2f}  {detail}")
    out("selfcheck: " + ("all checks passed" if ok else "FAILED"))
    return ok
