import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cooldown.optim import (
    OptimError, OptimizerConfig, OptimizerState, SfoState, adamw_step, clip_global_norm, sfo_step,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_clip_examples():
    np.testing.assert_allclose(clip_global_norm(np.array([3.0, 4.0]), 1.0), [0.6, 0.8], rtol=1e-15)
    g = np.array([0.1, 0.0])
    assert clip_global_norm(g, 1.0) is g
    assert not clip_global_norm(np.zeros(3), 1.0).any()
    with pytest.raises(OptimError):
        clip_global_norm(g, 0.0)


@given(arrays(float, st.integers(1, 50), elements=finite), st.floats(1e-3, 1e3))
def test_clip_bound(g, c):
    out = clip_global_norm(g, c)
    assert np.linalg.norm(out) <= c + 1e-12
    if np.linalg.norm(g) <= c:
        assert out is g


def reference_adamw(m, v, t, w, g, lr, b1, b2, eps, wd):
    """Scalar loop over coordinates; the recursion written out longhand."""
    t1 = t + 1
    m2, v2, w2 = [], [], []
    for mi, vi, wi, gi in zip(m, v, w, g):
        mn = b1 * mi + (1 - b1) * gi
        vn = b2 * vi + (1 - b2) * gi * gi
        mh = mn / (1 - b1**t1)
        vh = vn / (1 - b2**t1)
        w2.append(wi - lr * (mh / (vh**0.5 + eps) + wd * wi))
        m2.append(mn)
        v2.append(vn)
    return np.array(m2), np.array(v2), np.array(w2)


def test_oracle_equivalence_1000_draws():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 20))
        cfg = OptimizerConfig(rng.uniform(0, 0.999), rng.uniform(0, 0.999), 10 ** rng.uniform(-10, -6), rng.uniform(0, 0.5), None)
        st_ = OptimizerState(rng.standard_normal(n), rng.random(n) * 2, int(rng.integers(0, 1000)))
        w, g, lr = rng.standard_normal(n), rng.standard_normal(n) * 10, rng.uniform(0, 0.1)
        w2, s2 = adamw_step(st_, w, g, lr, cfg)
        m, v, wr = reference_adamw(st_.m, st_.v, st_.t, w, g, lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay)
        assert s2.t == st_.t + 1
        worst = max(worst, np.max(np.abs(w2 - wr)), np.max(np.abs(s2.m - m)), np.max(np.abs(s2.v - v)))
    assert worst <= 1e-12


def test_first_step_and_decay_only():
    cfg = OptimizerConfig(weight_decay=0.0)
    w2, _ = adamw_step(OptimizerState.zeros(1), np.array([0.0]), np.array([2.0]), 1e-3, cfg)
    assert w2[0] == pytest.approx(-1e-3, rel=1e-8)
    cfg = OptimizerConfig(weight_decay=0.1)
    w2, _ = adamw_step(OptimizerState.zeros(1), np.array([1.0]), np.array([0.0]), 1e-3, cfg)
    assert w2[0] == pytest.approx(0.9999, abs=1e-15)


def test_zero_grad_no_decay_stationary():
    w = np.array([1.0, -2.0, 3.0])
    w2, _ = adamw_step(OptimizerState.zeros(3), w, np.zeros(3), 1e-2, OptimizerConfig(weight_decay=0.0))
    assert np.array_equal(w, w2)


@given(st.integers(2, 30), st.integers(0, 29), st.floats(1e-3, 10), st.booleans())
def test_single_coordinate_moves_alone(n, k, gk, neg):
    k = k % n
    gk = -gk if neg else gk
    g = np.zeros(n)
    g[k] = gk
    w = np.linspace(-1, 1, n)
    w2, _ = adamw_step(OptimizerState.zeros(n), w, g, 1e-2, OptimizerConfig(weight_decay=0.0))
    changed = np.nonzero(w2 != w)[0]
    assert list(changed) == [k]


@given(st.integers(1, 200), arrays(float, 4, elements=st.floats(-5, 5)))
def test_bias_correction_identical_grads(k, g):
    cfg = OptimizerConfig(weight_decay=0.0)
    s, w = OptimizerState.zeros(4), np.zeros(4)
    for _ in range(k):
        w, s = adamw_step(s, w, g, 0.0, cfg)
    m_hat = s.m / (1 - cfg.beta1**s.t)
    np.testing.assert_allclose(m_hat, g, rtol=1e-12, atol=1e-12)


def test_inputs_not_mutated_and_dims():
    s = OptimizerState.zeros(3)
    w, g = np.ones(3), np.ones(3)
    adamw_step(s, w, g, 0.1, OptimizerConfig())
    assert not s.m.any() and not s.v.any() and s.t == 0 and (w == 1).all()
    with pytest.raises(OptimError):
        adamw_step(s, np.ones(2), np.ones(2), 0.1, OptimizerConfig())


def test_config_validation():
    for kw in (dict(beta1=1.0), dict(beta2=-0.1), dict(weight_decay=-1), dict(eps=0.0), dict(clip_max=0.0)):
        with pytest.raises(OptimError):
            OptimizerConfig(**kw)


def test_sfo_first_step_replaces_average():
    s = SfoState.start(np.array([1.0, 2.0]), 0.9)
    s2 = sfo_step(s, lambda y: np.array([0.5, -0.5]), 1e-2, OptimizerConfig(weight_decay=0.0))
    assert np.array_equal(s2.x, s2.z) and s2.t == 1


def test_sfo_zero_gradient_stationary():
    s = SfoState.start(np.array([1.0, -3.0]), 0.9)
    for _ in range(5):
        s = sfo_step(s, lambda y: np.zeros(2), 1e-2, OptimizerConfig(weight_decay=0.0))
    assert np.array_equal(s.z, [1.0, -3.0]) and np.array_equal(s.x, [1.0, -3.0])


def test_sfo_gradient_point():
    seen = []
    s = SfoState(np.array([0.0]), np.array([4.0]), np.zeros(1), 3, 1.0)
    sfo_step(s, lambda y: seen.append(y.copy()) or np.ones(1), 1e-2, OptimizerConfig())
    assert seen[0][0] == 4.0  # interp = 1 evaluates at x
    s = SfoState(np.array([0.0]), np.array([4.0]), np.zeros(1), 3, 0.25)
    sfo_step(s, lambda y: seen.append(y.copy()) or np.ones(1), 1e-2, OptimizerConfig())
    assert seen[1][0] == 0.75 * 0.0 + 0.25 * 4.0


def test_sfo_average_is_uniform_mean_of_z():
    rng = np.random.default_rng(1)
    s = SfoState.start(rng.standard_normal(3), 0.9)
    zs = []
    for _ in range(50):
        s = sfo_step(s, lambda y: rng.standard_normal(3), 1e-2, OptimizerConfig(weight_decay=0.0))
        zs.append(s.z)
    np.testing.assert_allclose(s.x, np.mean(zs, axis=0), rtol=1e-12, atol=1e-14)


def test_sfo_bad_interp_and_dims():
    with pytest.raises(OptimError):
        SfoState.start(np.zeros(2), 1.5)
    s = SfoState.start(np.zeros(2), 0.5)
    with pytest.raises(OptimError):
        sfo_step(s, lambda y: np.zeros(3), 1e-2, OptimizerConfig())
