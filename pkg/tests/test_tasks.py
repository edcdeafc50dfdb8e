import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cooldown.tasks import LMOptions, QuadraticOptions, TaskError, TaskSpec, make_task

SMALL_LM = LMOptions(vocab=12, context=4, embed_dim=6, hidden=10, corpus_len=5000, eval_len=512)


def quad(sigma=1.0, dim=10, seed=0):
    return make_task(TaskSpec("noisy_quadratic", seed, QuadraticOptions(dim=dim, noise_scale=sigma)))


@given(arrays(float, 10, elements=st.floats(-100, 100)), st.integers(1, 64))
def test_quadratic_noiseless_gradient(w, b):
    t = quad(sigma=0.0)
    _, g = t.sample(w, np.random.default_rng(0), b)
    assert np.array_equal(g, t.h * w)


def test_quadratic_minimum_and_spectrum():
    t = quad()
    assert t.loss(np.zeros(10)) == 0.0
    assert t.h[0] == pytest.approx(0.01) and t.h[-1] == pytest.approx(1.0)
    assert np.all(np.diff(np.log(t.h)) == pytest.approx(np.log(100) / 9))


def test_quadratic_noise_is_unbiased():
    t = quad(sigma=2.0)
    w = np.linspace(-1, 1, 10)
    rng = np.random.default_rng(5)
    gs = np.array([t.sample(w, rng, 4)[1] for _ in range(20000)])
    assert np.allclose(gs.mean(axis=0), t.h * w, atol=0.05)
    assert np.allclose(gs.std(axis=0), 2.0 / 2, rtol=0.03)


def test_uniform_predictor_is_ln_vocab():
    t = make_task(TaskSpec("synthetic_lm", 0, SMALL_LM))
    w = np.zeros(t.dim)
    assert abs(t.eval_loss(w) - math.log(SMALL_LM.vocab)) <= 1e-9


def test_lm_gradient_matches_finite_differences():
    t = make_task(TaskSpec("synthetic_lm", 3, SMALL_LM))
    rng = np.random.default_rng(0)
    w = t.init_params() + 0.1 * rng.standard_normal(t.dim)
    ctx, tgt = t._windows(rng.integers(0, 3000, size=64))
    _, g = t.grad_on(w, ctx, tgt)
    h = 1e-5
    worst = 0.0
    for i in rng.choice(t.dim, size=100, replace=False):
        e = np.zeros(t.dim)
        e[i] = h
        fd = (t.loss_on(w + e, ctx, tgt) - t.loss_on(w - e, ctx, tgt)) / (2 * h)
        denom = max(abs(fd), abs(g[i]), 1e-7)
        worst = max(worst, abs(fd - g[i]) / denom)
    assert worst <= 1e-4


def test_lm_deterministic_corpus_and_init():
    a = make_task(TaskSpec("synthetic_lm", 1, SMALL_LM))
    b = make_task(TaskSpec("synthetic_lm", 1, SMALL_LM))
    assert np.array_equal(a.corpus, b.corpus)
    assert np.array_equal(a.init_params(), b.init_params())
    assert not np.array_equal(a.init_params(), make_task(TaskSpec("synthetic_lm", 2, SMALL_LM)).init_params())
    assert a.corpus.min() >= 0 and a.corpus.max() < SMALL_LM.vocab


def test_task_validation():
    with pytest.raises(TaskError):
        TaskSpec("noisy_quadratic", 0, QuadraticOptions(eigen_min=0.0))
    with pytest.raises(TaskError):
        TaskSpec("noisy_quadratic", 0, QuadraticOptions(noise_scale=-1.0))
    with pytest.raises(TaskError):
        TaskSpec("synthetic_lm", 0, LMOptions(vocab=1))
    with pytest.raises(TaskError):
        TaskSpec("synthetic_lm", 0, QuadraticOptions())
    with pytest.raises(TaskError):
        TaskSpec("mnist", 0)
