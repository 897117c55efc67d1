"""The eleven acceptance criteria, one test each. Every test prints a single
``PASS``/``FAIL criterion N`` line to the terminal before asserting."""

import time

import numpy as np
import pytest

from kerneltune import cli
from kerneltune.harness import (
    REFERENCE_DEVICES,
    Dataset,
    MeasurementError,
    Sample,
    SyntheticBackend,
    collect,
    default_cost_model,
    load_dataset,
    optimum_config,
    save_dataset,
    synthetic_cost_many,
)
from kerneltune.space import KERNELS, enumerate_all, kernel_space, sample_random
from kerneltune.surrogate import (
    AdamState,
    AdaptiveLearningRate,
    Surrogate,
    TrainConfig,
    adam_step,
    load_model,
    loss_and_gradients,
    mlp_init,
    r2_score,
    save_model,
    scaler_fit,
    scaler_inverse,
    scaler_transform,
    train,
)
from kerneltune.tuner import search, train_combined, train_single
from kerneltune.workload import WorkloadSpec, flux_stage, init_grid, limiter_stage, muscl_reconstruct, run_workload

from oracles import central_differences, first_order_xi_flux, rel_err

C2075, P100, V100 = REFERENCE_DEVICES


@pytest.fixture
def verdict(capsys):
    def report(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, f"criterion {n}: {detail}"
    return report


def synthetic_dataset(space, n, device, seed, sigma=0.0):
    cost = default_cost_model(space, noise_sigma=sigma, seed=seed)
    configs = sample_random(space, n, seed)
    t = synthetic_cost_many(configs, device, cost)
    return Dataset(space.names, True, [Sample(c, device.gflops, float(x)) for c, x in zip(configs, t)])


def test_criterion_01_gradients(verdict):
    start = time.perf_counter()
    archs = [(14, 64, 64, 1), (2, 8, 1), (4, 16, 8, 1), (7, 5, 5, 5, 1), (1, 3, 1)]
    worst = 0.0
    for seed, sizes in enumerate(archs):
        rng = np.random.default_rng(seed)
        m = mlp_init(sizes, seed)
        for b in m.biases:
            b[:] = rng.normal(0, 0.1, b.shape)
        X, y = rng.normal(size=(4, sizes[0])), rng.normal(size=4)
        analytic = loss_and_gradients(m, X, y, 1e-4)[1]
        numeric = central_differences(m, X, y, 1e-4)
        worst = max(worst, max(rel_err(a, n) for a, n in zip(analytic, numeric)))
    elapsed = time.perf_counter() - start
    verdict(1, worst <= 1e-5 and elapsed < 10,
            f"{len(archs)} architectures, max rel err {worst:.2e}, {elapsed:.1f} s")


def test_criterion_02_r2(verdict):
    cases = [([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 1.0), ([1.0, 2.0, 3.0], [2.0, 2.0, 2.0], 0.0),
             ([1.0, 2.0, 3.0], [1.5, 2.0, 2.5], 0.75), ([1.0, 2.0, 3.0], [3.0, 2.0, 1.0], -3.0)]
    worst = max(abs(r2_score(a, p).value - want) for a, p, want in cases)
    deg = r2_score([5.0, 5.0, 5.0], [4.0, 5.0, 6.0])
    verdict(2, worst <= 1e-12 and deg.value == 0.0 and deg.degenerate,
            f"{len(cases)} hand cases, max err {worst:.1e}; constant actuals -> {deg.value} flagged={deg.degenerate}")


def test_criterion_03_scaler(verdict):
    rng = np.random.default_rng(3)
    X = rng.normal(50.0, 20.0, size=(500, 6))
    X[:, 4] = 7.25
    st = scaler_fit(X)
    Z = scaler_transform(st, X)
    err = float(np.max(np.abs(scaler_inverse(st, Z) - X)))
    const_ok = bool(st.constant[4]) and np.all(Z[:, 4] == 0.0) and np.all(scaler_inverse(st, Z)[:, 4] == 7.25)
    verdict(3, err <= 1e-12 and const_ok, f"round-trip err {err:.1e}, constant column ok={const_ok}")


def test_criterion_04_adam(verdict):
    cfg = TrainConfig()
    p = [np.zeros(1)]
    s = AdamState.zeros_like(p)
    adam_step(p, [np.ones(1)], s, 1, cfg.lr0, cfg.beta1, cfg.beta2, cfg.eps)
    theta = float(p[0][0])
    ok = (abs(theta + 0.0009) <= 1e-12 and abs(s.m[0][0] - 0.05) <= 1e-15 and abs(s.v[0][0] - 0.1) <= 1e-15)
    verdict(4, ok, f"theta={theta!r}, m={float(s.m[0][0])!r}, v={float(s.v[0][0])!r}")


def test_criterion_05_surrogate_quality(verdict):
    start = time.perf_counter()
    sp = kernel_space()
    clean = train_single(synthetic_dataset(sp, 10_000, P100, 0), TrainConfig())
    noisy = train_single(synthetic_dataset(sp, 10_000, P100, 0, sigma=0.02), TrainConfig())
    elapsed = time.perf_counter() - start
    sizes = (len(clean.train.actual), len(clean.test.actual))
    ok = (sizes == (7_500, 2_500) and clean.test.r2 >= 0.90 and noisy.test.r2 >= 0.80 and elapsed < 300)
    verdict(5, ok, f"split {sizes}, noiseless test R2 {clean.test.r2:.4f} (>=0.90), "
                   f"sigma=0.02 test R2 {noisy.test.r2:.4f} (>=0.80), {elapsed:.1f} s")


def test_criterion_06_combined(verdict):
    sp = kernel_space()
    devices = {d.name: d for d in REFERENCE_DEVICES}
    data = {d.name: synthetic_dataset(sp, 7_500, d, i) for i, d in enumerate(REFERENCE_DEVICES)}
    combined = train_combined(data, devices, TrainConfig())
    single = {n: train_single(ds, TrainConfig()).test.r2 for n, ds in data.items()}
    gaps = {n: combined.per_device_r2[n] - single[n] for n in data}
    rows = len(combined.train.actual) + len(combined.test.actual)
    ok = rows == 22_500 and combined.test.r2 >= 0.90 and all(abs(g) <= 0.05 for g in gaps.values())
    detail = ", ".join(f"{n} {combined.per_device_r2[n]:.4f} vs single {single[n]:.4f}" for n in data)
    verdict(6, ok, f"{rows} rows, overall test R2 {combined.test.r2:.4f}; {detail}")


def test_criterion_07_tuning_optimality(verdict):
    start = time.perf_counter()
    sp = kernel_space(KERNELS[:2])
    cost = default_cost_model(sp)
    configs = list(enumerate_all(sp, 20_000))
    truth = dict(zip(configs, synthetic_cost_many(configs, P100, cost)))
    optimum = min(truth.values())
    assert truth[optimum_config(sp, cost)] == optimum
    gaps = []
    for seed in range(5):
        ds = collect(sp, 1_500, SyntheticBackend(sp, cost), P100, seed=seed, progress=None)
        sur = train_single(ds, TrainConfig(seed=seed)).surrogate
        top = search(sur, sp, k=10)
        gaps.append(min(truth[c] for c, _ in top) / optimum - 1.0)
    elapsed = time.perf_counter() - start
    verdict(7, max(gaps) <= 0.05 and elapsed < 120,
            f"gaps to optimum {', '.join(f'{g:.2%}' for g in gaps)} (<=5%), {elapsed:.1f} s")


def test_criterion_08_adaptive_lr(verdict):
    rule = AdaptiveLearningRate(9e-4, 1e-6)
    reduced = [rule.update(v) for v in (1.0, 1.0 - 1e-7, 1.0 - 2e-7)]
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(60, 2))
    plateau = [1.0, 1.0 - 1e-7, 1.0 - 2e-7, 0.5]
    _, _, _, rep = train(mlp_init((2, 4, 1), 0), (X, X.sum(axis=1)), None,
                         TrainConfig(hidden_sizes=(4,), max_epochs=4),
                         observe_epoch=lambda e, loss: plateau[e - 1])
    ok = reduced == [False, False, True] and rep.lr_history == [9e-4, 9e-4, 9e-4, 9e-4 / 5]
    verdict(8, ok, f"reductions {reduced}, lr per epoch {rep.lr_history}")


def test_criterion_09_workload(verdict):
    base = WorkloadSpec(nx=32, ny=24, steps=3, seed=7)
    tilings = [((1, 1),) * 7, ((24, 32),) * 7, ((5, 3), (24, 32), (7, 1), (1, 9), (11, 13), (2, 32), (24, 4))]
    sums = {run_workload(base.with_tiles(t)).checksum for t in tilings}
    const = run_workload(WorkloadSpec(nx=16, ny=16, steps=3, field="uniform", source_amplitude=0.0)).residual_norm
    x = np.linspace(0.0, 1.0, 10)
    q = 2.0 * x + 1.0
    mid = 0.5 * (q[1:-2] + q[2:-1])
    muscl = max(float(np.max(np.abs(side - mid)))
                for kappa in (-1.0, 0.0, 1.0 / 3.0, 1.0)
                for side in muscl_reconstruct(q[:-3], q[1:-2], q[2:-1], q[3:], 1.0, kappa))
    g = init_grid(WorkloadSpec(nx=20, ny=14, seed=5))
    f = flux_stage(g.q, limiter_stage(g.q, "xi", (4, 4)), "xi", 0.0, -1.0, (4, 4))
    first = float(np.max(np.abs(f - first_order_xi_flux(g.q))))
    ok = len(sums) == 1 and const <= 1e-12 and muscl <= 1e-12 and first <= 1e-14
    verdict(9, ok, f"{len(tilings)} tilings -> {len(sums)} checksum, constant-state residual {const:.1e}, "
                   f"MUSCL linear err {muscl:.1e}, first-order err {first:.1e}")


def test_criterion_10_persistence(verdict, tmp_path):
    sp = kernel_space(KERNELS[:2])
    ds = synthetic_dataset(sp, 300, V100, 1, sigma=0.01)
    save_dataset(ds, tmp_path / "d.csv")
    data_ok = load_dataset(tmp_path / "d.csv") == ds
    res = train_single(ds, TrainConfig(hidden_sizes=(16, 16), max_epochs=20))
    save_model(tmp_path / "m.json", res.surrogate)
    back = load_model(tmp_path / "m.json")
    X = ds.features(with_device=False)
    model_ok = isinstance(back, Surrogate) and np.array_equal(back.predict(X), res.surrogate.predict(X))

    class Crash:
        name = "crash"

        def __init__(self, inner, limit):
            self.inner, self.limit, self.calls = inner, limit, 0

        def run(self, config, device):
            self.calls += 1
            if self.calls > self.limit:
                raise MeasurementError("interrupted")
            return self.inner.run(config, device)

    be = SyntheticBackend(sp, default_cost_model(sp))
    path = tmp_path / "partial.csv"
    try:
        collect(sp, 200, Crash(be, 73), P100, seed=2, out_path=path, progress=None)
    except MeasurementError:
        pass
    partial = len(load_dataset(path))
    collect(sp, 200, be, P100, seed=2, out_path=path, resume=True, progress=None)
    final = len(load_dataset(path))
    verdict(10, data_ok and model_ok and partial == 73 and final == 200,
            f"dataset lossless={data_ok}, predictions bitwise={model_ok}, resume {partial} -> {final} of 200")


def test_criterion_11_selfcheck(verdict, capsys):
    start = time.perf_counter()
    code = cli.main(["selfcheck"])
    elapsed = time.perf_counter() - start
    verdict(11, code == 0 and elapsed < 60, f"exit code {code}, {elapsed:.2f} s")
