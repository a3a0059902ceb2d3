"""Log densities and sampling primitives used by the generative models.

Bernoulli and Gaussian log probabilities come in two parameterizations:
probability/variance (with clamping of probabilities away from 0 and 1) and
logit (numerically stable, used by the network heads).
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Value

__all__ = [
    "PROB_EPS",
    "LOG_2PI",
    "bernoulli_log_prob",
    "bernoulli_logit_log_prob",
    "gaussian_log_prob",
    "sample_gaussian_reparam",
]

# Probabilities are clamped to [PROB_EPS, 1 - PROB_EPS] before taking logs.
PROB_EPS = 1e-7

LOG_2PI = float(np.log(2.0 * np.pi))


def bernoulli_log_prob(pi, x) -> Value:
    """log Bern(x; pi), with pi clamped away from {0, 1}."""
    pi = ad.clip(pi, PROB_EPS, 1.0 - PROB_EPS)
    x = np.asarray(x, dtype=np.float64)
    return x * ad.log(pi) + (1.0 - x) * ad.log(1.0 - pi)


def bernoulli_logit_log_prob(logits, x) -> Value:
    """log Bern(x; sigmoid(logits)) computed stably from logits."""
    x = np.asarray(x, dtype=np.float64)
    return -(x * ad.softplus(-logits) + (1.0 - x) * ad.softplus(logits))


def gaussian_log_prob(x, mean, var) -> Value:
    """log N(x; mean, var) with ``var`` a Value, array, or scalar."""
    var = ad.as_value(var)
    diff = ad.as_value(x) - mean
    return -0.5 * (LOG_2PI + ad.log(var)) - ad.square(diff) / (2.0 * var)


def sample_gaussian_reparam(mean, var, noise) -> Value:
    """Reparameterized draw mean + sqrt(var) * noise with gradient flow.

    ``noise`` is a fixed standard-normal array; gradients flow to ``mean``
    and ``var`` only.
    """
    var = ad.as_value(var)
    if np.any(var.data <= 0.0):
        raise ValueError("variance must be strictly positive")
    noise = np.asarray(noise, dtype=np.float64)
    return mean + ad.sqrt(var) * noise
