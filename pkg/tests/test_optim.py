import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kerneltune.surrogate import AdamState, AdaptiveLearningRate, TrainConfig, adam_step
from kerneltune.surrogate.optim import LR_DIVISOR, MIN_LR


def test_config_defaults():
    c = TrainConfig()
    assert (c.alpha, c.beta1, c.beta2, c.lr0) == (1e-4, 0.95, 0.90, 9e-4)
    assert (c.max_epochs, c.batch_size, c.tol, c.eps) == (200, 200, 1e-6, 1e-9)
    assert c.lr_schedule == "adaptive"


@pytest.mark.parametrize("kw", [{"beta1": 1.0}, {"beta2": -0.1}, {"lr0": 0.0}, {"batch_size": 0},
                                {"tol": 0.0}, {"eps": 0.0}, {"lr_schedule": "cosine"},
                                {"hidden_sizes": (4, 0)}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


def test_config_round_trip_and_unknown_key():
    c = TrainConfig(hidden_sizes=(8, 4), seed=3)
    assert TrainConfig.from_dict(c.to_dict()) == c
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"epochs": 3})


def one_step(theta, g, t=1, m=0.0, v=0.0, lr=9e-4, b1=0.95, b2=0.90, eps=1e-9):
    p = [np.array([theta])]
    s = AdamState([np.array([m])], [np.array([v])])
    adam_step(p, [np.array([g])], s, t, lr, b1, b2, eps)
    return p[0][0], s.m[0][0], s.v[0][0]


def test_adam_hand_case():
    theta, m, v = one_step(0.0, 1.0)
    assert m == pytest.approx(0.05, abs=1e-15)
    assert v == pytest.approx(0.1, abs=1e-15)
    # m_hat = v_hat = 1, so theta = -lr / (1 + eps)
    assert abs(theta - (-9e-4 / (1.0 + 1e-9))) <= 1e-12
    assert abs(theta + 0.0009) <= 1e-12


def test_adam_second_step_bias_correction():
    p = [np.zeros(1)]
    s = AdamState.zeros_like(p)
    g = [np.ones(1)]
    adam_step(p, g, s, 1, 9e-4, 0.95, 0.90, 1e-9)
    adam_step(p, g, s, 2, 9e-4, 0.95, 0.90, 1e-9)
    m2 = 0.95 * 0.05 + 0.05
    v2 = 0.90 * 0.1 + 0.1
    step2 = 9e-4 * (m2 / (1 - 0.95 ** 2)) / (np.sqrt(v2 / (1 - 0.90 ** 2)) + 1e-9)
    assert s.m[0][0] == pytest.approx(m2, rel=1e-15)
    assert s.v[0][0] == pytest.approx(v2, rel=1e-15)
    assert abs(p[0][0] - (-9e-4 / (1 + 1e-9) - step2)) <= 1e-15


def test_adam_zero_gradient_is_identity():
    p = [np.array([[1.5, -2.0]]), np.array([0.25])]
    before = [a.copy() for a in p]
    s = AdamState.zeros_like(p)
    adam_step(p, [np.zeros_like(a) for a in p], s, 1, 1e-3, 0.95, 0.9, 1e-9)
    for a, b in zip(p, before):
        assert np.array_equal(a, b)


def test_adam_rejects_t0():
    with pytest.raises(ValueError):
        one_step(0.0, 1.0, t=0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.integers(1, 50),
       st.floats(0, 1), st.floats(0, 10))
def test_adam_matches_formula(theta, g, t, m, v):
    got, m1, v1 = one_step(theta, g, t, m, v)
    em = 0.95 * m + 0.05 * g
    ev = 0.90 * v + 0.10 * g * g
    want = theta - 9e-4 * (em / (1 - 0.95 ** t)) / (np.sqrt(ev / (1 - 0.90 ** t)) + 1e-9)
    assert m1 == pytest.approx(em, rel=1e-12, abs=1e-300)
    assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


# --- adaptive learning rate ------------------------------------------------

def test_lr_drops_after_exactly_two_stagnant_epochs():
    s = AdaptiveLearningRate(9e-4, 1e-6)
    assert not s.update(1.0)          # first epoch always improves on inf
    assert not s.update(1.0 - 5e-7)   # stagnant #1 (improvement < tol)
    assert s.lr == 9e-4
    assert s.update(1.0 - 9e-7)       # stagnant #2
    assert s.lr == pytest.approx(9e-4 / 5, rel=1e-15)


def test_improvement_resets_counter():
    s = AdaptiveLearningRate(1.0, 1e-6)
    for loss in (1.0, 1.0, 0.5, 0.5):
        s.update(loss)
    assert s.lr == 1.0
    s.update(0.5)
    assert s.lr == 1.0 / LR_DIVISOR


def test_constant_schedule_never_changes():
    s = AdaptiveLearningRate(1.0, 1e-6, enabled=False)
    for _ in range(10):
        s.update(1.0)
    assert s.lr == 1.0 and not s.converged


def test_converges_below_min_lr():
    s = AdaptiveLearningRate(9e-4, 1e-6)
    drops = 0
    while not s.converged:
        drops += s.update(1.0)
    # 9e-4 / 5**k < 1e-8 first at k = 8
    assert drops == 8 and s.lr < MIN_LR <= s.lr * LR_DIVISOR
