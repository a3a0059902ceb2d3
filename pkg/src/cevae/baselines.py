"""Reference estimators: LR1, LR2, TARnet, and the naive difference of means.

LR1 fits one regression on the concatenated features (x, t); LR2 fits one
regression per treatment group; TARnet shares a representation trunk with
two affine outcome heads trained on the factual log-likelihood. Binary
outcomes get a logistic head, continuous ones a linear head. All fits run
through the same Adamax loop as the VAE (no bespoke convex solver).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import autodiff as ad
from .autodiff import Value, backward
from .data import Dataset
from .dists import bernoulli_logit_log_prob, gaussian_log_prob
from .layers import DenseNet
from .optim import Adamax
from .training import TrainConfig

__all__ = [
    "FitError",
    "LinearPredictor",
    "GroupedPredictor",
    "TarnetPredictor",
    "NaivePredictor",
    "fit_lr1",
    "fit_lr2",
    "fit_tarnet",
    "fit_naive",
]

# Shared convex-fit settings for the LR baselines.
LR_L2 = 1e-4
LR_LEARNING_RATE = 0.2
LR_LR_DECAY = 0.995
LR_MAX_STEPS = 3000
LR_TOL = 1e-6


class FitError(RuntimeError):
    """A baseline cannot be fit on the given data (degenerate design)."""


@dataclass
class _Scaler:
    x_shift: np.ndarray
    x_scale: np.ndarray
    y_shift: float
    y_scale: float

    @classmethod
    def fit(cls, dataset: Dataset) -> "_Scaler":
        x_shift = np.zeros(dataset.d)
        x_scale = np.ones(dataset.d)
        cont = np.array([k == "continuous" for k in dataset.covariate_kinds])
        if cont.any():
            x_shift[cont] = dataset.x[:, cont].mean(axis=0)
            std = dataset.x[:, cont].std(axis=0)
            x_scale[cont] = np.where(std > 1e-8, std, 1.0)
        y_shift, y_scale = 0.0, 1.0
        if dataset.outcome_kind == "continuous":
            y_shift = float(dataset.y.mean())
            std = float(dataset.y.std())
            y_scale = std if std > 1e-8 else 1.0
        return cls(x_shift, x_scale, y_shift, y_scale)

    def transform_x(self, x):
        return (np.asarray(x, dtype=np.float64) - self.x_shift) / self.x_scale

    def transform_y(self, y):
        return (np.asarray(y, dtype=np.float64) - self.y_shift) / self.y_scale

    def inverse_y(self, y):
        return y * self.y_scale + self.y_shift


def _base_rate_bias(y: np.ndarray, outcome_kind: str) -> float:
    """Bias init at the outcome base rate; keeps near-saturated groups from
    needing thousands of optimizer steps to move the intercept."""
    if outcome_kind == "binary":
        rate = np.clip(y.mean(), 1e-4, 1.0 - 1e-4)
        return float(np.log(rate / (1.0 - rate)))
    return float(y.mean())


def _fit_affine(features: np.ndarray, y: np.ndarray, outcome_kind: str,
                seed: int | None) -> tuple[np.ndarray, float]:
    """Full-batch Adamax on the (convex) regularized affine log-likelihood.

    Returns (weights, bias). ``seed`` perturbs the init at random; None
    starts deterministically at zero weights and the base-rate bias. Stops
    when the largest parameter update stays below LR_TOL.
    """
    n, d = features.shape
    w0 = np.zeros((d, 1))
    b0 = np.full(1, _base_rate_bias(y, outcome_kind))
    if seed is not None:
        rng = np.random.default_rng(seed)
        w0 = w0 + rng.normal(0.0, 0.1, size=(d, 1))
        b0 = b0 + rng.normal(0.0, 0.1, size=1)
    w = Value(w0, op="param")
    b = Value(b0, op="param")
    params = {"w": w, "b": b}
    opt = Adamax(lr=LR_LEARNING_RATE, weight_decay=LR_L2, lr_decay=LR_LR_DECAY)
    y_col = y.reshape(n, 1)
    quiet_steps = 0
    for _ in range(LR_MAX_STEPS):
        pred = ad.matmul(Value(features, op="const"), w) + b
        if outcome_kind == "binary":
            ll = bernoulli_logit_log_prob(pred, y_col)
        else:
            ll = gaussian_log_prob(y_col, pred, 1.0)
        loss = -ll.sum() / n
        backward(loss)
        before_w, before_b = w.data.copy(), b.data.copy()
        opt.step(params)
        opt.decay_lr()
        delta = max(np.abs(w.data - before_w).max(), np.abs(b.data - before_b).max())
        quiet_steps = quiet_steps + 1 if delta < LR_TOL else 0
        if quiet_steps >= 5:
            break
    return w.data[:, 0], float(b.data[0])


@dataclass
class LinearPredictor:
    """Single affine model on features (x, t); LR1."""

    w: np.ndarray
    b: float
    outcome_kind: str
    scaler: _Scaler

    def _predict(self, x_raw, t_value: int) -> np.ndarray:
        x = self.scaler.transform_x(x_raw)
        features = np.concatenate([x, np.full((x.shape[0], 1), float(t_value))], axis=1)
        raw = features @ self.w + self.b
        if self.outcome_kind == "binary":
            return expit(raw)
        return self.scaler.inverse_y(raw)

    def predict_potential(self, x_raw) -> tuple[np.ndarray, np.ndarray]:
        return self._predict(x_raw, 1), self._predict(x_raw, 0)


@dataclass
class GroupedPredictor:
    """Separate affine models for the treated and control groups; LR2."""

    w1: np.ndarray
    b1: float
    w0: np.ndarray
    b0: float
    outcome_kind: str
    scaler: _Scaler

    def predict_potential(self, x_raw) -> tuple[np.ndarray, np.ndarray]:
        x = self.scaler.transform_x(x_raw)
        raw1 = x @ self.w1 + self.b1
        raw0 = x @ self.w0 + self.b0
        if self.outcome_kind == "binary":
            return expit(raw1), expit(raw0)
        return self.scaler.inverse_y(raw1), self.scaler.inverse_y(raw0)


def fit_lr1(dataset: Dataset, seed: int | None = None) -> LinearPredictor:
    """One regression on (x, t); effect estimate is yhat(x,1) - yhat(x,0)."""
    if len(np.unique(dataset.t)) < 2:
        raise FitError("LR1 needs both treatment groups present")
    scaler = _Scaler.fit(dataset)
    features = np.concatenate(
        [scaler.transform_x(dataset.x), dataset.t.reshape(-1, 1).astype(np.float64)],
        axis=1,
    )
    w, b = _fit_affine(features, scaler.transform_y(dataset.y),
                       dataset.outcome_kind, seed)
    return LinearPredictor(w, b, dataset.outcome_kind, scaler)


def fit_lr2(dataset: Dataset, seed: int | None = None) -> GroupedPredictor:
    """Group-wise regressions fit to treated and control separately."""
    treated = dataset.t == 1
    if not treated.any() or treated.all():
        raise FitError("LR2 needs both treatment groups non-empty")
    scaler = _Scaler.fit(dataset)
    x = scaler.transform_x(dataset.x)
    y = scaler.transform_y(dataset.y)
    w1, b1 = _fit_affine(x[treated], y[treated], dataset.outcome_kind, seed)
    w0, b0 = _fit_affine(x[~treated], y[~treated], dataset.outcome_kind,
                         None if seed is None else seed + 1)
    return GroupedPredictor(w1, b1, w0, b0, dataset.outcome_kind, scaler)


class TarnetPredictor:
    """Shared representation trunk with two affine outcome heads."""

    def __init__(self, trunk: DenseNet | None, head_treated: DenseNet,
                 head_control: DenseNet, outcome_kind: str, scaler: _Scaler):
        self.trunk = trunk
        self.head_treated = head_treated
        self.head_control = head_control
        self.outcome_kind = outcome_kind
        self.scaler = scaler

    def predict_potential(self, x_raw) -> tuple[np.ndarray, np.ndarray]:
        x = self.scaler.transform_x(x_raw)
        rep = self.trunk.forward_np(x) if self.trunk is not None else x
        raw1 = self.head_treated.forward_np(rep)[:, 0]
        raw0 = self.head_control.forward_np(rep)[:, 0]
        if self.outcome_kind == "binary":
            return expit(raw1), expit(raw0)
        return self.scaler.inverse_y(raw1), self.scaler.inverse_y(raw0)


def fit_tarnet(train_ds: Dataset, val_ds: Dataset, nh: int = 3,
               width: int = 200, config: TrainConfig | None = None,
               init_seed: int = 0) -> TarnetPredictor:
    """Train a TARnet on the factual log-likelihood with early stopping.

    With nh = 0 the trunk disappears and the model reduces to two affine
    (logistic/linear) regressions, i.e. LR2.
    """
    if nh < 0:
        raise ValueError("nh must be >= 0")
    if train_ds.n == 0 or val_ds.n == 0:
        raise ValueError("train and validation splits must be non-empty")
    if len(np.unique(train_ds.t)) < 2:
        raise FitError("TARnet needs both treatment groups present")
    config = config or TrainConfig()
    scaler = _Scaler.fit(train_ds)
    rng_init = np.random.default_rng(init_seed)
    d = train_ds.d
    trunk = (
        DenseNet([d] + [width] * nh, rng_init, activate_final=True)
        if nh else None
    )
    rep_dim = width if nh else d
    head_treated = DenseNet([rep_dim, 1], rng_init)
    head_control = DenseNet([rep_dim, 1], rng_init)
    params: dict[str, Value] = {}
    if trunk is not None:
        params.update(trunk.params("trunk"))
    params.update(head_treated.params("head_treated"))
    params.update(head_control.params("head_control"))

    def factual_nll(x, t, y) -> Value:
        rep = trunk.forward(x) if trunk is not None else ad.as_value(x)
        param = t * head_treated.forward(rep) + (1.0 - t) * head_control.forward(rep)
        if train_ds.outcome_kind == "binary":
            ll = bernoulli_logit_log_prob(param, y)
        else:
            ll = gaussian_log_prob(y, param, 1.0)
        return -ll.sum()

    x_tr = scaler.transform_x(train_ds.x)
    y_tr = scaler.transform_y(train_ds.y).reshape(-1, 1)
    t_tr = train_ds.t.astype(np.float64).reshape(-1, 1)
    x_val = scaler.transform_x(val_ds.x)
    y_val = scaler.transform_y(val_ds.y).reshape(-1, 1)
    t_val = val_ds.t.astype(np.float64).reshape(-1, 1)

    rng = np.random.default_rng(config.seed)
    opt = Adamax(lr=config.lr, weight_decay=config.weight_decay,
                 lr_decay=config.lr_decay)
    best_val = np.inf
    best = {name: p.data.copy() for name, p in params.items()}
    since_best = 0
    n = train_ds.n
    for _ in range(config.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            backward(factual_nll(x_tr[idx], t_tr[idx], y_tr[idx]))
            opt.step(params)
        opt.decay_lr()
        val_loss = float(factual_nll(x_val, t_val, y_val).data)
        if val_loss < best_val:
            best_val = val_loss
            best = {name: p.data.copy() for name, p in params.items()}
            since_best = 0
        else:
            since_best += 1
            if since_best > config.patience:
                break
    for name, p in params.items():
        p.data = best[name].copy()
    return TarnetPredictor(trunk, head_treated, head_control,
                           train_ds.outcome_kind, scaler)


@dataclass
class NaivePredictor:
    """Constant group means: the unadjusted difference-of-means estimator."""

    mean_treated: float
    mean_control: float

    def predict_potential(self, x_raw) -> tuple[np.ndarray, np.ndarray]:
        n = np.asarray(x_raw).shape[0]
        return np.full(n, self.mean_treated), np.full(n, self.mean_control)


def fit_naive(dataset: Dataset) -> NaivePredictor:
    treated = dataset.t == 1
    if not treated.any() or treated.all():
        raise FitError("naive estimator needs both treatment groups non-empty")
    return NaivePredictor(
        float(dataset.y[treated].mean()), float(dataset.y[~treated].mean())
    )
