import numpy as np
import pytest

from cevae.autodiff import Value, backward
from cevae.dists import (
    LOG_2PI,
    bernoulli_log_prob,
    bernoulli_logit_log_prob,
    gaussian_log_prob,
    sample_gaussian_reparam,
)


def test_bernoulli_half_at_one():
    lp = bernoulli_log_prob(Value(0.5), 1.0)
    assert abs(float(lp.data) - np.log(0.5)) < 1e-12


def test_bernoulli_normalizes():
    for pi in (0.1, 0.5, 0.93):
        total = sum(
            np.exp(float(bernoulli_log_prob(Value(pi), x).data)) for x in (0.0, 1.0)
        )
        assert abs(total - 1.0) < 1e-12


def test_bernoulli_logit_matches_probability_form():
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(5, 3))
    x = (rng.random((5, 3)) < 0.5).astype(float)
    from scipy.special import expit

    a = bernoulli_logit_log_prob(Value(logits), x).data
    b = bernoulli_log_prob(Value(expit(logits)), x).data
    assert np.allclose(a, b, atol=1e-9)


def test_clamping_avoids_infinite_loss():
    lp0 = bernoulli_log_prob(Value(0.0), 1.0)
    lp1 = bernoulli_log_prob(Value(1.0), 0.0)
    assert np.isfinite(lp0.data) and np.isfinite(lp1.data)


def test_gaussian_at_mean_unit_variance():
    lp = gaussian_log_prob(0.7, Value(0.7), 1.0)
    assert abs(float(lp.data) - (-0.5 * LOG_2PI)) < 1e-12


def test_gaussian_matches_closed_form():
    x, mu, var = 1.3, -0.2, 2.5
    lp = float(gaussian_log_prob(x, Value(mu), var).data)
    expected = -0.5 * np.log(2 * np.pi * var) - (x - mu) ** 2 / (2 * var)
    assert abs(lp - expected) < 1e-12


def test_reparam_zero_noise_returns_mean():
    mu = Value(np.array([[1.0, -2.0]]), op="param")
    out = sample_gaussian_reparam(mu, np.array([[4.0, 0.25]]), np.zeros((1, 2)))
    assert np.array_equal(out.data, mu.data)


def test_reparam_rejects_nonpositive_variance():
    mu = Value(np.zeros((1, 2)))
    with pytest.raises(ValueError, match="positive"):
        sample_gaussian_reparam(mu, np.array([[1.0, 0.0]]), np.zeros((1, 2)))
    with pytest.raises(ValueError, match="positive"):
        sample_gaussian_reparam(mu, np.array([[1.0, -1.0]]), np.zeros((1, 2)))


def test_reparam_gradient_wrt_mean_is_one():
    for eps in (-1.7, 0.0, 2.3):
        mu = Value(np.array(0.4), op="param")
        out = sample_gaussian_reparam(mu, Value(np.array(2.0)), np.array(eps))
        backward(out)
        assert abs(float(mu.grad) - 1.0) < 1e-12


def test_reparam_is_deterministic_given_noise():
    mu = Value(np.array([0.5]))
    var = Value(np.array([2.0]))
    noise = np.array([0.3])
    a = sample_gaussian_reparam(mu, var, noise).data
    b = sample_gaussian_reparam(mu, var, noise).data
    assert np.array_equal(a, b)
