"""Latent-confounder VAE for treatment-effect estimation (CEVAE).

Generative model over a latent confounder z:

    p(z)      standard normal per dimension (or Bern(0.5) for the binary
              latent variant),
    p(x|z)    factorized per covariate: Bernoulli logits for binary columns,
              Gaussian mean/variance for continuous ones (one network),
    p(t|z)    Bernoulli through a single-hidden-layer logit network,
    p(y|t,z)  two treatment-specific heads mixed by t: Gaussian with fixed
              variance for continuous outcomes, Bernoulli for binary ones.

Inference side: q(z|x,t,y) with a shared trunk over (x, y) and
treatment-specific heads, plus auxiliary predictors q(t|x) and q(y|x,t)
used to impute (t, y) for new units before inferring z. Throughout, t = 1
selects the "treated" head and t = 0 the control head.

Training maximizes the reparameterized single-sample ELBO plus the
auxiliary log-likelihoods; the binary latent variant instead marginalizes
the (small) discrete z exactly, which keeps its objective deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import autodiff as ad
from .autodiff import Value
from .data import Dataset
from .dists import (
    bernoulli_logit_log_prob,
    gaussian_log_prob,
    sample_gaussian_reparam,
    LOG_2PI,
)
from .layers import DenseNet, DEFAULT_WIDTH, DEFAULT_INIT_SCALE

__all__ = [
    "CevaeConfig",
    "CevaeModel",
    "EstimateReport",
    "generative_log_joint",
    "posterior_params",
    "posterior_logits",
    "elbo",
    "aux_log_likelihood",
    "full_objective",
    "posterior_sample_new",
    "predict_do",
    "predict_potential_outcomes",
    "estimate_effects",
    "save_checkpoint",
    "load_checkpoint",
]

# Additive floor under every softplus-linked variance.
VAR_EPS = 1e-6

MAX_EXACT_LATENT_DIM = 10

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class CevaeConfig:
    """Architecture and fixed-variance choices for a CEVAE instance."""

    d_x: int
    covariate_kinds: tuple
    outcome_kind: str
    d_z: int = 20
    latent_kind: str = "gaussian"  # "gaussian" | "bernoulli"
    n_hidden: int = 3
    width: int = DEFAULT_WIDTH
    y_var: float = 1.0       # fixed outcome variance of p(y|t,z), continuous case
    aux_y_var: float = 1.0   # fixed variance of q(y|x,t), continuous case
    init_scale: float = DEFAULT_INIT_SCALE
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "covariate_kinds", tuple(self.covariate_kinds))
        if len(self.covariate_kinds) != self.d_x:
            raise ValueError("covariate_kinds length must equal d_x")
        if self.outcome_kind not in ("binary", "continuous"):
            raise ValueError(f"unknown outcome kind {self.outcome_kind!r}")
        if self.latent_kind not in ("gaussian", "bernoulli"):
            raise ValueError(f"unknown latent kind {self.latent_kind!r}")
        if self.d_z < 1:
            raise ValueError("d_z must be >= 1")
        if self.latent_kind == "bernoulli" and self.d_z > MAX_EXACT_LATENT_DIM:
            raise ValueError(
                f"binary latent uses exact marginalization; d_z must be "
                f"<= {MAX_EXACT_LATENT_DIM}, got {self.d_z}"
            )
        if self.n_hidden < 0:
            raise ValueError("n_hidden must be >= 0")
        if self.y_var <= 0 or self.aux_y_var <= 0:
            raise ValueError("fixed outcome variances must be positive")


class CevaeModel:
    """Parameter bundle for the generative, inference, and auxiliary nets."""

    def __init__(self, config: CevaeConfig):
        self.config = config
        self.bin_cols = np.array(
            [k == "binary" for k in config.covariate_kinds], dtype=bool
        )
        self.cont_cols = ~self.bin_cols
        n_bin = int(self.bin_cols.sum())
        n_cont = int(self.cont_cols.sum())
        x_param_dim = n_bin + 2 * n_cont
        z_param_dim = 2 * config.d_z if config.latent_kind == "gaussian" else config.d_z

        rng = np.random.default_rng(config.seed)
        w, nh, dz, dx = config.width, config.n_hidden, config.d_z, config.d_x
        scale = config.init_scale

        def net(sizes, activate_final=False):
            return DenseNet(sizes, rng, activate_final=activate_final,
                            init_scale=scale)

        hidden = [w] * nh
        # generative side
        self.p_x_net = net([dz] + hidden + [x_param_dim])
        self.f_t = net([dz, w, 1])                       # p(t|z), 1 hidden layer
        self.f_y_treated = net([dz] + hidden + [1])      # p(y|t=1,z)
        self.f_y_control = net([dz] + hidden + [1])      # p(y|t=0,z)
        # inference side
        self.q_z_trunk = net([dx + 1] + hidden, activate_final=True) if nh else None
        trunk_out = w if nh else dx + 1
        self.q_z_treated = net([trunk_out, z_param_dim])
        self.q_z_control = net([trunk_out, z_param_dim])
        # auxiliary predictors for new units
        self.q_t_net = net([dx, w, 1])                   # q(t|x), 1 hidden layer
        self.q_y_trunk = net([dx] + hidden, activate_final=True) if nh else None
        y_trunk_out = w if nh else dx
        self.q_y_treated = net([y_trunk_out, 1])
        self.q_y_control = net([y_trunk_out, 1])

        # standardization state, set by the training loop
        self.x_shift = np.zeros(dx)
        self.x_scale = np.ones(dx)
        self.y_shift = 0.0
        self.y_scale = 1.0

        self.trained = False
        self.diagnostics = None

    _NET_NAMES = (
        "p_x_net", "f_t", "f_y_treated", "f_y_control",
        "q_z_trunk", "q_z_treated", "q_z_control",
        "q_t_net", "q_y_trunk", "q_y_treated", "q_y_control",
    )

    def params(self) -> dict[str, Value]:
        out: dict[str, Value] = {}
        for name in self._NET_NAMES:
            net = getattr(self, name)
            if net is not None:
                out.update(net.params(name))
        return out

    def mark_trained(self) -> None:
        """Flag a hand-parameterized model as ready for inference."""
        self.trained = True

    # standardization ------------------------------------------------------
    def set_standardization(self, x_shift, x_scale, y_shift, y_scale) -> None:
        self.x_shift = np.asarray(x_shift, dtype=np.float64)
        self.x_scale = np.asarray(x_scale, dtype=np.float64)
        self.y_shift = float(y_shift)
        self.y_scale = float(y_scale)

    def standardize_x(self, x_raw: np.ndarray) -> np.ndarray:
        return (np.asarray(x_raw, dtype=np.float64) - self.x_shift) / self.x_scale

    def standardize_y(self, y_raw: np.ndarray) -> np.ndarray:
        return (np.asarray(y_raw, dtype=np.float64) - self.y_shift) / self.y_scale

    def destandardize_y(self, y_model: np.ndarray) -> np.ndarray:
        return y_model * self.y_scale + self.y_shift


# generative pieces (model-space arrays; z may be a Value or an array) -------

def _softplus_var(raw: Value) -> Value:
    return ad.softplus(raw) + VAR_EPS


def _log_px_given_z(model: CevaeModel, z, x: np.ndarray) -> Value:
    """Per-unit log p(x|z), shape (n, 1); broadcasts a (1, d_z) z row."""
    cfg = model.config
    params = model.p_x_net.forward(z)
    n_bin = int(model.bin_cols.sum())
    n_cont = int(model.cont_cols.sum())
    total = None
    if n_bin:
        logits = ad.cols(params, 0, n_bin)
        ll = bernoulli_logit_log_prob(logits, x[:, model.bin_cols])
        total = ll.sum(axis=1, keepdims=True)
    if n_cont:
        mean = ad.cols(params, n_bin, n_bin + n_cont)
        var = _softplus_var(ad.cols(params, n_bin + n_cont, n_bin + 2 * n_cont))
        ll = gaussian_log_prob(x[:, model.cont_cols], mean, var)
        ll = ll.sum(axis=1, keepdims=True)
        total = ll if total is None else total + ll
    return total


def _log_pt_given_z(model: CevaeModel, z, t: np.ndarray) -> Value:
    return bernoulli_logit_log_prob(model.f_t.forward(z), t)


def _log_py_given_tz(model: CevaeModel, z, t: np.ndarray, y: np.ndarray) -> Value:
    param = t * model.f_y_treated.forward(z) + (1.0 - t) * model.f_y_control.forward(z)
    if model.config.outcome_kind == "binary":
        return bernoulli_logit_log_prob(param, y)
    return gaussian_log_prob(y, param, model.config.y_var)


def _log_pz(model: CevaeModel, z) -> Value:
    if model.config.latent_kind == "bernoulli":
        z = ad.as_value(z)
        n = z.data.shape[0]
        return Value(np.full((n, 1), model.config.d_z * np.log(0.5)), op="const")
    z = ad.as_value(z)
    term = -0.5 * (LOG_2PI + ad.square(z))
    return term.sum(axis=1, keepdims=True)


def generative_log_joint(model: CevaeModel, z, x, t, y) -> Value:
    """log p(z) + log p(x|z) + log p(t|z) + log p(y|t,z), summed over the batch."""
    x, t, y = _as_batch(model, x, t, y)
    z = ad.as_value(z)
    if z.data.ndim != 2 or z.data.shape[1] != model.config.d_z:
        raise ValueError(
            f"z must have shape (n, {model.config.d_z}), got {z.data.shape}"
        )
    per_unit = (
        _log_pz(model, z)
        + _log_px_given_z(model, z, x)
        + _log_pt_given_z(model, z, t)
        + _log_py_given_tz(model, z, t, y)
    )
    return per_unit.sum()


def _as_batch(model: CevaeModel, x, t, y):
    """Validate shapes; returns x (n,d), t (n,1), y (n,1) float arrays."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.config.d_x:
        raise ValueError(f"x must have shape (n, {model.config.d_x}), got {x.shape}")
    n = x.shape[0]
    t = np.asarray(t, dtype=np.float64).reshape(n, 1)
    y = np.asarray(y, dtype=np.float64).reshape(n, 1)
    return x, t, y


# posterior and auxiliary networks -------------------------------------------

def _q_z_raw(model: CevaeModel, x: np.ndarray, t: np.ndarray, y: np.ndarray) -> Value:
    h = np.concatenate([x, y], axis=1)
    rep = model.q_z_trunk.forward(h) if model.q_z_trunk is not None else ad.as_value(h)
    treated = model.q_z_treated.forward(rep)
    control = model.q_z_control.forward(rep)
    return t * treated + (1.0 - t) * control


def posterior_params(model: CevaeModel, x, t, y) -> tuple[Value, Value]:
    """Gaussian posterior (mean, variance), each (n, d_z)."""
    if model.config.latent_kind != "gaussian":
        raise ValueError("posterior_params applies to the gaussian latent")
    x, t, y = _as_batch(model, x, t, y)
    raw = _q_z_raw(model, x, t, y)
    dz = model.config.d_z
    return ad.cols(raw, 0, dz), _softplus_var(ad.cols(raw, dz, 2 * dz))


def posterior_logits(model: CevaeModel, x, t, y) -> Value:
    """Bernoulli posterior logits, (n, d_z), for the binary latent variant."""
    if model.config.latent_kind != "bernoulli":
        raise ValueError("posterior_logits applies to the bernoulli latent")
    x, t, y = _as_batch(model, x, t, y)
    return _q_z_raw(model, x, t, y)


def _aux_y_param(model: CevaeModel, x: np.ndarray, t: np.ndarray) -> Value:
    rep = model.q_y_trunk.forward(x) if model.q_y_trunk is not None else ad.as_value(x)
    return t * model.q_y_treated.forward(rep) + (1.0 - t) * model.q_y_control.forward(rep)


def aux_log_likelihood(model: CevaeModel, x, t, y) -> Value:
    """sum_i log q(t_i|x_i) + log q(y_i|x_i,t_i) (the new-unit predictors)."""
    x, t, y = _as_batch(model, x, t, y)
    t_term = bernoulli_logit_log_prob(model.q_t_net.forward(x), t)
    y_param = _aux_y_param(model, x, t)
    if model.config.outcome_kind == "binary":
        y_term = bernoulli_logit_log_prob(y_param, y)
    else:
        y_term = gaussian_log_prob(y, y_param, model.config.aux_y_var)
    return (t_term + y_term).sum()


# variational objective -------------------------------------------------------

def _latent_configs(d_z: int) -> np.ndarray:
    """All 2^d_z binary latent configurations, one per row."""
    grid = np.indices((2,) * d_z).reshape(d_z, -1).T
    return grid.astype(np.float64)


def elbo(model: CevaeModel, x, t, y, rng=None, noise=None) -> Value:
    """Single-sample reparameterized ELBO (gaussian latent) or the exact
    marginalized bound (bernoulli latent), summed over the batch.

    ``noise`` fixes the standard-normal draw (gaussian latent only);
    otherwise it is drawn from ``rng``.
    """
    x, t, y = _as_batch(model, x, t, y)
    if model.config.latent_kind == "bernoulli":
        return _elbo_exact_binary(model, x, t, y)
    mu, var = posterior_params(model, x, t, y)
    if noise is None:
        if rng is None:
            raise ValueError("elbo needs rng or an explicit noise array")
        noise = rng.standard_normal(mu.data.shape)
    z = sample_gaussian_reparam(mu, var, noise)
    log_q = gaussian_log_prob(z, mu, var).sum(axis=1, keepdims=True)
    per_unit = (
        _log_pz(model, z)
        + _log_px_given_z(model, z, x)
        + _log_pt_given_z(model, z, t)
        + _log_py_given_tz(model, z, t, y)
        - log_q
    )
    value = per_unit.sum()
    if not np.isfinite(value.data):
        raise ValueError("ELBO is not finite")
    return value


def _elbo_exact_binary(model: CevaeModel, x, t, y) -> Value:
    logits = _q_z_raw(model, x, t, y)
    total = None
    for config_row in _latent_configs(model.config.d_z):
        row = config_row[None, :]
        log_w = bernoulli_logit_log_prob(logits, row).sum(axis=1, keepdims=True)
        w = ad.exp(log_w)
        data_ll = (
            _log_pz(model, Value(row, op="const"))
            + _log_px_given_z(model, row, x)
            + _log_pt_given_z(model, row, t)
            + _log_py_given_tz(model, row, t, y)
        )
        contrib = w * (data_ll - log_w)
        total = contrib if total is None else total + contrib
    value = total.sum()
    if not np.isfinite(value.data):
        raise ValueError("ELBO is not finite")
    return value


def full_objective(model: CevaeModel, x, t, y, rng=None, noise=None,
                   include_aux=True) -> Value:
    """ELBO plus the auxiliary log-likelihood terms (the training objective)."""
    bound = elbo(model, x, t, y, rng=rng, noise=noise)
    if not include_aux:
        return bound
    return bound + aux_log_likelihood(model, x, t, y)


# frozen-model inference (plain numpy) ----------------------------------------

def _softplus_np(a: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, a)


def _q_z_raw_np(model, x, t, y):
    h = np.concatenate([x, y], axis=1)
    rep = model.q_z_trunk.forward_np(h) if model.q_z_trunk is not None else h
    return (
        t * model.q_z_treated.forward_np(rep)
        + (1.0 - t) * model.q_z_control.forward_np(rep)
    )


def posterior_sample_new(model: CevaeModel, x, rng) -> np.ndarray:
    """Ancestral posterior draw for new units: t' ~ q(t|x), y' ~ q(y|x,t'),
    z ~ q(z|x,t',y'). ``x`` is in model space; returns z of shape (n, d_z)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    t_prob = expit(model.q_t_net.forward_np(x))
    t_s = (rng.random((n, 1)) < t_prob).astype(np.float64)
    rep = model.q_y_trunk.forward_np(x) if model.q_y_trunk is not None else x
    y_param = (
        t_s * model.q_y_treated.forward_np(rep)
        + (1.0 - t_s) * model.q_y_control.forward_np(rep)
    )
    if model.config.outcome_kind == "binary":
        y_s = (rng.random((n, 1)) < expit(y_param)).astype(np.float64)
    else:
        y_s = y_param + np.sqrt(model.config.aux_y_var) * rng.standard_normal((n, 1))
    raw = _q_z_raw_np(model, x, t_s, y_s)
    dz = model.config.d_z
    if model.config.latent_kind == "bernoulli":
        return (rng.random((n, dz)) < expit(raw)).astype(np.float64)
    mu = raw[:, :dz]
    var = _softplus_np(raw[:, dz:]) + VAR_EPS
    return mu + np.sqrt(var) * rng.standard_normal((n, dz))


def _outcome_head_np(model: CevaeModel, z: np.ndarray, t_value: int) -> np.ndarray:
    net = model.f_y_treated if t_value == 1 else model.f_y_control
    param = net.forward_np(z)[:, 0]
    if model.config.outcome_kind == "binary":
        return expit(param)
    return model.destandardize_y(param)


def _require_trained(model: CevaeModel) -> None:
    if not model.trained:
        raise RuntimeError(
            "model has not been trained (or marked trained); refusing to predict"
        )


def predict_potential_outcomes(model: CevaeModel, x_raw, n_samples: int,
                               rng) -> tuple[np.ndarray, np.ndarray]:
    """Posterior-averaged E[y|x,do(t=1)] and E[y|x,do(t=0)], original units.

    Shares the posterior draws between the two heads, so a model with
    identical heads yields exactly zero estimated effect at any sample count.
    """
    _require_trained(model)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    x = model.standardize_x(x_raw)
    n = x.shape[0]
    y1 = np.zeros(n)
    y0 = np.zeros(n)
    for _ in range(n_samples):
        z = posterior_sample_new(model, x, rng)
        y1 += _outcome_head_np(model, z, 1)
        y0 += _outcome_head_np(model, z, 0)
    return y1 / n_samples, y0 / n_samples


def predict_do(model: CevaeModel, x_raw, t_value: int, n_samples: int,
               rng) -> np.ndarray:
    """Monte Carlo estimate of E[y | x, do(t=t_value)] per unit."""
    if t_value not in (0, 1):
        raise ValueError("t_value must be 0 or 1")
    y1, y0 = predict_potential_outcomes(model, x_raw, n_samples, rng)
    return y1 if t_value == 1 else y0


@dataclass
class EstimateReport:
    """Per-unit potential-outcome predictions and population summaries."""

    y1_hat: np.ndarray
    y0_hat: np.ndarray
    ite: np.ndarray
    ate: float
    att: float
    final_train_objective: float | None = None
    final_val_objective: float | None = None
    epochs_run: int | None = None


def estimate_effects(model: CevaeModel, dataset: Dataset, n_samples: int,
                     seed: int = 0) -> EstimateReport:
    """ITE per unit via shared posterior draws; ATE over all units, ATT over
    the treated (nan when the dataset has none)."""
    rng = np.random.default_rng(seed)
    y1, y0 = predict_potential_outcomes(model, dataset.x, n_samples, rng)
    ite = y1 - y0
    treated = dataset.t == 1
    att = float(ite[treated].mean()) if treated.any() else float("nan")
    diag = model.diagnostics
    return EstimateReport(
        y1_hat=y1,
        y0_hat=y0,
        ite=ite,
        ate=float(ite.mean()),
        att=att,
        final_train_objective=None if diag is None else diag.train_objective[-1],
        final_val_objective=None if diag is None else diag.val_objective[-1],
        epochs_run=None if diag is None else diag.epochs_run,
    )


# checkpoints -----------------------------------------------------------------

def save_checkpoint(model: CevaeModel, path) -> None:
    """Self-describing npz archive: config header + named parameter arrays."""
    cfg = model.config
    header = {
        "checkpoint_version": CHECKPOINT_VERSION,
        "config": {
            "d_x": cfg.d_x,
            "covariate_kinds": list(cfg.covariate_kinds),
            "outcome_kind": cfg.outcome_kind,
            "d_z": cfg.d_z,
            "latent_kind": cfg.latent_kind,
            "n_hidden": cfg.n_hidden,
            "width": cfg.width,
            "y_var": cfg.y_var,
            "aux_y_var": cfg.aux_y_var,
            "init_scale": cfg.init_scale,
            "seed": cfg.seed,
        },
        "trained": model.trained,
    }
    arrays = {f"param:{name}": p.data for name, p in model.params().items()}
    arrays["x_shift"] = model.x_shift
    arrays["x_scale"] = model.x_scale
    arrays["y_shift"] = np.array(model.y_shift)
    arrays["y_scale"] = np.array(model.y_scale)
    arrays["header"] = np.frombuffer(
        json.dumps(header, sort_keys=True).encode(), dtype=np.uint8
    )
    np.savez(path, **arrays)


def load_checkpoint(path) -> CevaeModel:
    with np.load(path) as bundle:
        header = json.loads(bytes(bundle["header"]).decode())
        if header["checkpoint_version"] != CHECKPOINT_VERSION:
            raise ValueError(
                f"unsupported checkpoint version {header['checkpoint_version']}"
            )
        model = CevaeModel(CevaeConfig(**header["config"]))
        params = model.params()
        for key in bundle.files:
            if key.startswith("param:"):
                name = key[len("param:"):]
                if name not in params:
                    raise ValueError(f"checkpoint has unknown parameter {name!r}")
                params[name].data = np.asarray(bundle[key], dtype=np.float64)
        model.set_standardization(
            bundle["x_shift"], bundle["x_scale"],
            float(bundle["y_shift"]), float(bundle["y_scale"]),
        )
        model.trained = bool(header["trained"])
    return model
