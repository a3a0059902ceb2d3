"""Ground-truth-bearing synthetic generators.

Two families:

* ``gen_toy`` - a 1-D Gaussian-mixture process with a hidden binary
  confounder: z ~ Bern(0.5), x|z ~ N(z, 5^2 z + 3^2 (1-z)),
  t|z ~ Bern(0.75 z + 0.25 (1-z)), y|t,z ~ Bern(sigmoid(3(z + 2(2t-1)))).

* ``gen_synthetic_twins`` - a stand-in for the twin-birth benchmark: an
  ordinal hidden confounder z in {0..9} (gestation-length decile), 45 mixed
  covariates mildly correlated with z, binary mortality outcomes calibrated
  to marginal rates 18.9% (control) / 16.4% (treated) so the true average
  effect is about -0.025, treatment assigned from z plus covariates, and
  30 proxy bits (three one-hot codings of z, each bit flipped independently
  with a configurable probability). The covariate and outcome models are an
  invention of this package (the original records are not shipped); the
  construction, rates, and treatment mechanism follow the benchmark recipe.

``build_twins_benchmark`` applies the treatment/proxy/hiding construction to
any base table with columns (z, x, y0, y1), so a user-supplied real table
can be run through the same pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import Dataset

__all__ = [
    "ToyConfig",
    "TwinsProxyConfig",
    "TwinsBase",
    "gen_toy",
    "toy_true_ate",
    "draw_treatment_weights",
    "make_twins_treatment",
    "make_proxies",
    "build_twins_benchmark",
    "gen_synthetic_twins",
]


# toy mixture process --------------------------------------------------------

@dataclass(frozen=True)
class ToyConfig:
    n: int
    sigma_z0: float = 3.0
    sigma_z1: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.sigma_z0 <= 0 or self.sigma_z1 <= 0:
            raise ValueError("mixture stddevs must be positive")


def _toy_outcome_prob(z: np.ndarray, t: int) -> np.ndarray:
    return expit(3.0 * (z + 2.0 * (2.0 * t - 1.0)))


def toy_true_ate() -> float:
    """Population average effect of the toy process, in closed form."""
    return 0.5 * float(
        (_toy_outcome_prob(np.array(1.0), 1) - _toy_outcome_prob(np.array(1.0), 0))
        + (_toy_outcome_prob(np.array(0.0), 1) - _toy_outcome_prob(np.array(0.0), 0))
    )


def gen_toy(config: ToyConfig) -> Dataset:
    """Draw one toy dataset; both potential-outcome means are stored."""
    rng = np.random.default_rng(config.seed)
    n = config.n
    z = rng.random(n) < 0.5
    z = z.astype(np.float64)
    sigma = np.where(z == 1.0, config.sigma_z1, config.sigma_z0)
    x = rng.normal(z, sigma)[:, None]
    t = (rng.random(n) < (0.75 * z + 0.25 * (1.0 - z))).astype(np.int64)
    mu1 = _toy_outcome_prob(z, 1)
    mu0 = _toy_outcome_prob(z, 0)
    u = rng.random(n)
    y1 = (u < mu1).astype(np.float64)
    y0 = (u < mu0).astype(np.float64)
    y = np.where(t == 1, y1, y0)
    y_cf = np.where(t == 1, y0, y1)
    return Dataset(
        x=x,
        t=t,
        y=y,
        covariate_kinds=["continuous"],
        outcome_kind="binary",
        y_cf=y_cf,
        mu0=mu0,
        mu1=mu1,
    )


# twins-style proxy construction ---------------------------------------------

@dataclass(frozen=True)
class TwinsProxyConfig:
    flip_prob: float
    replications: int = 3
    categories: int = 10
    w_o_scale: float = 0.1   # variance of the covariate weights in t|x,z
    w_h_mean: float = 5.0
    w_h_var: float = 0.1
    randomized: bool = False  # assign t ~ Bern(0.5) instead (randomized trial)
    design_seed: int = 7      # fixes the stand-in covariate/outcome design
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 0.5:
            raise ValueError("flip_prob must lie in [0, 0.5]")
        if self.replications < 1 or self.categories < 2:
            raise ValueError("need >= 1 replications and >= 2 categories")


def draw_treatment_weights(d_x: int, config: TwinsProxyConfig, rng) -> tuple:
    """One draw of (w_o, w_h): covariate weights and the confounder weight."""
    w_o = rng.normal(0.0, np.sqrt(config.w_o_scale), size=d_x)
    w_h = rng.normal(config.w_h_mean, np.sqrt(config.w_h_var))
    return w_o, w_h


def make_twins_treatment(x: np.ndarray, z: np.ndarray, w_o: np.ndarray,
                         w_h: float, rng, categories: int = 10) -> np.ndarray:
    """t | x, z ~ Bern(sigmoid(w_o . x + w_h (z / categories - 0.1)))."""
    z = np.asarray(z)
    if np.any((z < 0) | (z >= categories)):
        raise ValueError(f"z must lie in 0..{categories - 1}")
    logits = x @ w_o + w_h * (z / categories - 0.1)
    return (rng.random(len(z)) < expit(logits)).astype(np.int64)


def make_proxies(z: np.ndarray, flip_prob: float, rng, replications: int = 3,
                 categories: int = 10) -> np.ndarray:
    """One-hot code z, replicated, with each bit flipped independently."""
    if not 0.0 <= flip_prob <= 0.5:
        raise ValueError("flip_prob must lie in [0, 0.5]")
    z = np.asarray(z, dtype=np.int64)
    onehot = np.zeros((len(z), categories))
    onehot[np.arange(len(z)), z] = 1.0
    bits = np.tile(onehot, (1, replications))
    flips = rng.random(bits.shape) < flip_prob
    return np.abs(bits - flips.astype(np.float64))


@dataclass
class TwinsBase:
    """Pre-treatment table: hidden confounder, covariates, both outcomes."""

    z: np.ndarray             # (n,) ints in 0..categories-1
    x: np.ndarray             # (n, d) covariates
    y0: np.ndarray            # (n,) realized outcome if untreated
    y1: np.ndarray            # (n,) realized outcome if treated
    covariate_kinds: list[str]
    mu0: np.ndarray | None = None
    mu1: np.ndarray | None = None


def build_twins_benchmark(base: TwinsBase, config: TwinsProxyConfig,
                          rng) -> Dataset:
    """Assign treatment, attach noisy proxies, and hide the unobserved twin.

    The proxy bits are appended after the base covariates, so the emitted
    matrix is [x0..x{d-1}, 30 proxy bits]. The hidden z itself is dropped.
    """
    n = len(base.z)
    if config.randomized:
        t = (rng.random(n) < 0.5).astype(np.int64)
    else:
        w_o, w_h = draw_treatment_weights(base.x.shape[1], config, rng)
        t = make_twins_treatment(base.x, base.z, w_o, w_h, rng,
                                 categories=config.categories)
    proxies = make_proxies(base.z, config.flip_prob, rng,
                           replications=config.replications,
                           categories=config.categories)
    y = np.where(t == 1, base.y1, base.y0)
    y_cf = np.where(t == 1, base.y0, base.y1)
    return Dataset(
        x=np.concatenate([base.x, proxies], axis=1),
        t=t,
        y=y.astype(np.float64),
        covariate_kinds=list(base.covariate_kinds)
        + ["binary"] * proxies.shape[1],
        outcome_kind="binary",
        y_cf=y_cf.astype(np.float64),
        mu0=base.mu0,
        mu1=base.mu1,
    )


# synthetic stand-in design ---------------------------------------------------

_N_BIN = 30
_N_CONT = 15
_CONTROL_RATE = 0.189
_TREATED_RATE = 0.164
_CALIBRATION_DRAWS = 200_000
_RATE_TOL = 1e-6


@dataclass
class _TwinsDesign:
    bin_intercepts: np.ndarray
    bin_slopes: np.ndarray
    cont_slopes: np.ndarray
    out_weights: np.ndarray   # loadings of the outcome on all 45 covariates
    z_coef_control: float     # confounder slope of the untreated outcome
    z_coef_treated: float     # confounder slope of the treated outcome
    a0: float                 # calibrated control intercept
    a1: float                 # calibrated treated intercept


def _confounder_scale(z: np.ndarray, categories: int) -> np.ndarray:
    """Map z in {0..categories-1} onto roughly [-1, 1]."""
    half = (categories - 1) / 2.0
    return (z - half) / half


def _draw_population(design: _TwinsDesign, n: int, config: TwinsProxyConfig,
                     rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    z = rng.integers(0, config.categories, size=n)
    u = _confounder_scale(z, config.categories)
    p_bin = expit(design.bin_intercepts + np.outer(u, design.bin_slopes))
    x_bin = (rng.random((n, _N_BIN)) < p_bin).astype(np.float64)
    # half-unit scale keeps the continuous columns comparable to the binary
    # ones inside the treatment logit w_o . x (correlation with z unchanged)
    x_cont = 0.5 * (np.outer(u, design.cont_slopes)
                    + rng.standard_normal((n, _N_CONT)))
    x = np.concatenate([x_bin, x_cont], axis=1)
    return z, u, x


def _outcome_logits(design: _TwinsDesign, u: np.ndarray, x: np.ndarray,
                    treated: bool) -> np.ndarray:
    slope = design.z_coef_treated if treated else design.z_coef_control
    return slope * u + x @ design.out_weights


def _calibrate_intercept(eta: np.ndarray, target: float) -> float:
    """Bisect a such that mean(sigmoid(a + eta)) hits the target rate."""
    lo, hi = -20.0, 20.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if expit(mid + eta).mean() < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < _RATE_TOL:
            break
    return 0.5 * (lo + hi)


def _make_design(config: TwinsProxyConfig) -> _TwinsDesign:
    rng = np.random.default_rng(np.random.SeedSequence([config.design_seed, 94]))
    design = _TwinsDesign(
        bin_intercepts=rng.normal(0.0, 0.5, size=_N_BIN),
        bin_slopes=rng.uniform(0.2, 0.9, size=_N_BIN),
        cont_slopes=rng.uniform(0.1, 0.45, size=_N_CONT),
        out_weights=np.concatenate([
            rng.normal(0.0, 0.05, size=_N_BIN),
            rng.normal(0.0, 0.1, size=_N_CONT),
        ]),
        # mortality falls with gestation length in both arms, more steeply
        # without the treatment (heterogeneous effect)
        z_coef_control=-1.3,
        z_coef_treated=-0.8,
        a0=0.0,
        a1=0.0,
    )
    z, u, x = _draw_population(design, _CALIBRATION_DRAWS, config, rng)
    design.a0 = _calibrate_intercept(_outcome_logits(design, u, x, False),
                                     _CONTROL_RATE)
    design.a1 = _calibrate_intercept(_outcome_logits(design, u, x, True),
                                     _TREATED_RATE)
    return design


def gen_synthetic_twins(n: int, config: TwinsProxyConfig) -> Dataset:
    """Draw a synthetic twins-style dataset of ``n`` units."""
    if n < 1:
        raise ValueError("n must be >= 1")
    design = _make_design(config)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 17]))
    z, u, x = _draw_population(design, n, config, rng)
    mu0 = expit(design.a0 + _outcome_logits(design, u, x, False))
    mu1 = expit(design.a1 + _outcome_logits(design, u, x, True))
    draw = rng.random(n)
    y0 = (draw < mu0).astype(np.float64)
    y1 = (draw < mu1).astype(np.float64)
    base = TwinsBase(
        z=z,
        x=x,
        y0=y0,
        y1=y1,
        covariate_kinds=["binary"] * _N_BIN + ["continuous"] * _N_CONT,
        mu0=mu0,
        mu1=mu1,
    )
    return build_twins_benchmark(base, config, rng)
