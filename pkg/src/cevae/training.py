"""Minibatch training loop with validation-based early stopping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import backward
from .data import Dataset
from .model import CevaeModel, full_objective
from .optim import Adamax, TrainingError

__all__ = ["TrainConfig", "TrainDiagnostics", "train", "fit_standardization"]


@dataclass
class TrainConfig:
    lr: float = 0.01
    weight_decay: float = 1e-4
    lr_decay: float = 0.97
    epochs: int = 200
    batch_size: int = 100
    patience: int = 10
    n_posterior_samples: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")
        if self.n_posterior_samples < 1:
            raise ValueError("n_posterior_samples must be >= 1")


@dataclass
class TrainDiagnostics:
    train_objective: list[float] = field(default_factory=list)
    val_objective: list[float] = field(default_factory=list)
    epochs_run: int = 0
    best_epoch: int = 0


def fit_standardization(model: CevaeModel, train_ds: Dataset) -> None:
    """Shift/scale continuous covariates (and a continuous outcome) to
    zero mean, unit variance on the training split; binary columns pass
    through untouched."""
    x_shift = np.zeros(train_ds.d)
    x_scale = np.ones(train_ds.d)
    cont = model.cont_cols
    if cont.any():
        x_shift[cont] = train_ds.x[:, cont].mean(axis=0)
        std = train_ds.x[:, cont].std(axis=0)
        x_scale[cont] = np.where(std > 1e-8, std, 1.0)
    y_shift, y_scale = 0.0, 1.0
    if model.config.outcome_kind == "continuous":
        y_shift = float(train_ds.y.mean())
        std = float(train_ds.y.std())
        y_scale = std if std > 1e-8 else 1.0
    model.set_standardization(x_shift, x_scale, y_shift, y_scale)


def _objective_value(model, x, t, y, rng, chunk=4096) -> float:
    """Evaluate the full objective without keeping gradients, in chunks."""
    total = 0.0
    for start in range(0, x.shape[0], chunk):
        sl = slice(start, start + chunk)
        total += float(full_objective(model, x[sl], t[sl], y[sl], rng=rng).data)
    return total


def _snapshot(model: CevaeModel) -> dict[str, np.ndarray]:
    return {name: p.data.copy() for name, p in model.params().items()}


def _restore(model: CevaeModel, snapshot: dict[str, np.ndarray]) -> None:
    for name, p in model.params().items():
        p.data = snapshot[name].copy()


def train(model: CevaeModel, train_ds: Dataset, val_ds: Dataset,
          config: TrainConfig) -> TrainDiagnostics:
    """Adamax ascent on the full objective with early stopping.

    Stops once the validation objective has failed to improve for more than
    ``patience`` consecutive epochs (or at ``epochs``), then restores the
    best-validation parameters. Returns per-epoch diagnostics.
    """
    if train_ds.n == 0 or val_ds.n == 0:
        raise ValueError("train and validation splits must be non-empty")
    fit_standardization(model, train_ds)
    x_tr = model.standardize_x(train_ds.x)
    y_tr = model.standardize_y(train_ds.y)
    t_tr = train_ds.t.astype(np.float64)
    x_val = model.standardize_x(val_ds.x)
    y_val = model.standardize_y(val_ds.y)
    t_val = val_ds.t.astype(np.float64)

    rng = np.random.default_rng(config.seed)
    opt = Adamax(lr=config.lr, weight_decay=config.weight_decay,
                 lr_decay=config.lr_decay)
    params = model.params()
    diag = TrainDiagnostics()
    best_val = -np.inf
    best_params = _snapshot(model)
    since_best = 0

    n = train_ds.n
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        epoch_total = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            try:
                objective = full_objective(model, x_tr[idx], t_tr[idx], y_tr[idx],
                                           rng=rng)
            except ValueError as err:
                raise TrainingError(
                    f"epoch {epoch}: {err} (diagnostics so far: {diag})"
                ) from err
            epoch_total += float(objective.data)
            backward(-objective)
            opt.step(params)
        opt.decay_lr()
        val_total = _objective_value(model, x_val, t_val, y_val, rng)
        if not np.isfinite(val_total):
            raise TrainingError(
                f"epoch {epoch}: validation objective is not finite "
                f"(diagnostics so far: {diag})"
            )
        diag.train_objective.append(epoch_total)
        diag.val_objective.append(val_total)
        diag.epochs_run = epoch + 1
        if val_total > best_val:
            best_val = val_total
            best_params = _snapshot(model)
            diag.best_epoch = epoch + 1
            since_best = 0
        else:
            since_best += 1
            if since_best > config.patience:
                break
    _restore(model, best_params)
    model.trained = True
    model.diagnostics = diag
    return diag
