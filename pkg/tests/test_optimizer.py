import numpy as np
import pytest

from bgattack import (AmsGradState, ConfigError, ContractError,
                      DimensionError, LrMode, LrSchedule, lr_at, step)


def test_first_step_is_sign_like():
    rng = np.random.default_rng(0)
    g = rng.normal(0, 3, (50,))
    p = rng.random((50,))
    state = AmsGradState.init(p.shape)
    out = step(state, p, g, lr=0.03)
    expected = p - 0.03 * g / (np.abs(g) + state.eps)
    assert np.abs(out - expected).max() <= 1e-12
    assert state.t == 1


def test_zero_gradient_moves_nothing():
    p = np.random.default_rng(1).random((20,))
    state = AmsGradState.init(p.shape)
    out = step(state, p, np.zeros_like(p), lr=0.1)
    assert np.array_equal(out, p)
    assert np.array_equal(state.m, np.zeros_like(p))
    assert np.array_equal(state.v, np.zeros_like(p))
    assert np.array_equal(state.v_hat, np.zeros_like(p))


def brute_force_reference(grads, p0, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Independent scalar recurrence, written from the update equations."""
    m = v = v_hat = 0.0
    p = p0
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = max(v_hat, v / (1 - beta2 ** t))
        p = p - lr * m_hat / (v_hat ** 0.5 + eps)
    return p, m, v, v_hat


def test_two_step_recurrence_matches_brute_force():
    # gradient sequence (1, -1): the max rule pins v_hat at its step-1
    # bias-corrected value 1
    state = AmsGradState.init((1,))
    p = np.array([0.5])
    p = step(state, p, np.array([1.0]), lr=0.03)
    assert state.v_hat[0] == pytest.approx(1.0, abs=1e-12)
    p = step(state, p, np.array([-1.0]), lr=0.03)
    assert state.v_hat[0] == pytest.approx(1.0, abs=1e-12)
    ref_p, ref_m, ref_v, ref_vhat = brute_force_reference([1.0, -1.0], 0.5, 0.03)
    assert p[0] == pytest.approx(ref_p, abs=1e-12)
    assert state.m[0] == pytest.approx(ref_m, abs=1e-12)
    assert state.v[0] == pytest.approx(ref_v, abs=1e-12)
    assert state.v_hat[0] == pytest.approx(ref_vhat, abs=1e-12)


def test_long_random_sequence_matches_brute_force():
    rng = np.random.default_rng(2)
    grads = rng.normal(0, 2, 200)
    state = AmsGradState.init((1,))
    p = np.array([0.1])
    for g in grads:
        p = step(state, p, np.array([g]), lr=0.01)
    ref_p, _, _, ref_vhat = brute_force_reference(list(grads), 0.1, 0.01)
    assert p[0] == pytest.approx(ref_p, rel=1e-12)
    assert state.v_hat[0] == pytest.approx(ref_vhat, rel=1e-12)


def test_v_hat_monotone_under_random_steps():
    rng = np.random.default_rng(3)
    state = AmsGradState.init((32,))
    p = rng.random((32,))
    prev = state.v_hat.copy()
    for _ in range(2000):
        p = step(state, p, rng.normal(0, 1, (32,)), lr=0.001)
        assert np.all(state.v_hat >= prev)
        prev = state.v_hat.copy()


def test_first_step_magnitude_bound():
    rng = np.random.default_rng(4)
    g = rng.normal(0, 5, (100,))
    p = np.zeros(100)
    state = AmsGradState.init(p.shape)
    out = step(state, p, g, lr=0.03)
    assert np.abs(out - p).max() <= 0.03 * (1.0 + 1e-6)


def test_quadratic_convergence_sanity():
    # f(p) = (p - 0.5)^2 from p=0 at constant lr 0.03 reaches |p-0.5|<0.01
    state = AmsGradState.init((1,))
    p = np.array([0.0])
    for _ in range(500):
        p = step(state, p, 2.0 * (p - 0.5), lr=0.03)
        if abs(p[0] - 0.5) < 0.01:
            break
    assert abs(p[0] - 0.5) < 0.01


def test_determinism():
    grads = np.random.default_rng(5).normal(size=(50, 8))
    outs = []
    for _ in range(2):
        state = AmsGradState.init((8,))
        p = np.zeros(8)
        for g in grads:
            p = step(state, p, g, lr=0.02)
        outs.append((p, state.m.copy(), state.v_hat.copy()))
    assert np.array_equal(outs[0][0], outs[1][0])
    assert np.array_equal(outs[0][1], outs[1][1])
    assert np.array_equal(outs[0][2], outs[1][2])


def test_step_errors():
    state = AmsGradState.init((4,))
    with pytest.raises(DimensionError):
        step(state, np.zeros(5), np.zeros(5), lr=0.1)
    with pytest.raises(ConfigError):
        step(state, np.zeros(4), np.zeros(4), lr=0.0)
    with pytest.raises(ConfigError):
        AmsGradState.init((4,), beta1=1.0)


def test_lr_at():
    assert lr_at(LrSchedule(alpha0=0.03), 1) == 0.03
    assert lr_at(LrSchedule(alpha0=0.03), 1000) == 0.03
    poly = LrSchedule(alpha0=0.03, exponent=0.5, mode=LrMode.POLY_DECAY)
    assert lr_at(poly, 1) == 0.03
    assert lr_at(poly, 4) == pytest.approx(0.015, abs=1e-15)
    flat = LrSchedule(alpha0=0.03, exponent=0.0, mode=LrMode.POLY_DECAY)
    assert lr_at(flat, 17) == pytest.approx(0.03, abs=1e-15)
    with pytest.raises(ContractError):
        lr_at(poly, 0)
    with pytest.raises(ConfigError):
        LrSchedule(alpha0=-0.1)
