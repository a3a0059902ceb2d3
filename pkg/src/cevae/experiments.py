"""Experiment harness: config-driven runs, results CSV, and summaries.

An experiment config is one JSON file (see ``configs/`` in the repo) naming
the experiment family, the estimator list, the evaluation grid, and the
replication count. ``run`` executes every (grid point, estimator,
replication) cell, evaluates metrics within sample (train + validation) and
out of sample (test), and writes ``results.csv`` plus ``summary.json`` to
the output directory. Rows are sorted and floats written with ``repr``, so
identical configs reproduce byte-identical outputs.

Results CSV columns (in order):
    experiment, grid_name, grid_value, estimator, replication, seed, status,
    ate_true, ate_est, ate_abs_err_in, ate_abs_err_out, sqrt_pehe_in,
    sqrt_pehe_out, att_abs_err_in, att_abs_err_out, policy_risk_in,
    policy_risk_out, auc_in, auc_out, epochs_run, config_hash

The oracle-sweep experiment emits its own schema:
    rho_t, rho_x, true_do_1, true_do_0, wrong_adjust_1, wrong_adjust_0,
    contrast_gap, config_hash
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import FitError, fit_lr1, fit_lr2, fit_naive, fit_tarnet
from .data import (
    DataNotFoundError,
    Dataset,
    SplitSpec,
    load_ihdp,
    load_jobs,
    split,
)
from .datagen import ToyConfig, TwinsProxyConfig, build_twins_benchmark, TwinsBase, gen_synthetic_twins, gen_toy
from .metrics import auc, ate_error, policy_risk, sqrt_pehe
from .model import CevaeConfig, CevaeModel, predict_potential_outcomes, save_checkpoint
from .optim import TrainingError
from .training import TrainConfig, train

__all__ = ["ExperimentConfig", "run", "summarize", "RESULT_COLUMNS"]

SUMMARY_SCHEMA_VERSION = 1

EXPERIMENTS = ("toy", "synthetic-twins", "twins", "ihdp", "jobs", "oracle-sweep")
ESTIMATOR_NAMES = ("lr1", "lr2", "tarnet", "cevae", "naive")

RESULT_COLUMNS = [
    "experiment", "grid_name", "grid_value", "estimator", "replication",
    "seed", "status",
    "ate_true", "ate_est", "ate_abs_err_in", "ate_abs_err_out",
    "sqrt_pehe_in", "sqrt_pehe_out", "att_abs_err_in", "att_abs_err_out",
    "policy_risk_in", "policy_risk_out", "auc_in", "auc_out",
    "epochs_run", "config_hash",
]

ORACLE_COLUMNS = [
    "rho_t", "rho_x", "true_do_1", "true_do_0",
    "wrong_adjust_1", "wrong_adjust_0", "contrast_gap", "config_hash",
]

METRIC_COLUMNS = [c for c in RESULT_COLUMNS
                  if c.endswith(("_in", "_out")) or c in ("ate_true", "ate_est")]


@dataclass
class ExperimentConfig:
    """Validated view of one experiment config file."""

    experiment: str
    estimators: list
    output_dir: str
    base_seed: int = 0
    replications: int = 1
    split: dict | None = None
    n_posterior_samples: int = 100
    sample_sizes: list | None = None      # toy
    n_units: int = 10000                  # twins families
    flip_probs: list | None = None        # twins families
    rho_values: list | None = None        # oracle-sweep
    replication_indices: list | None = None  # ihdp
    folds: list | None = None             # jobs
    data_dir: str | None = None           # ihdp / jobs / twins base table
    save_checkpoints: bool = False
    raw: dict | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__ if f != "raw"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        config = cls(**d, raw=dict(d))
        config.validate()
        return config

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.experiment != "oracle-sweep":
            if not self.estimators:
                raise ValueError("estimator list must be non-empty")
            for spec in self.estimators:
                if spec.get("name") not in ESTIMATOR_NAMES:
                    raise ValueError(f"unknown estimator {spec.get('name')!r}")
            if self.replications < 1:
                raise ValueError("replications must be >= 1")
        if self.experiment == "toy" and not self.sample_sizes:
            raise ValueError("toy experiment needs non-empty sample_sizes")
        if self.experiment in ("synthetic-twins", "twins") and not self.flip_probs:
            raise ValueError("twins experiments need non-empty flip_probs")
        if self.experiment == "oracle-sweep" and not self.rho_values:
            raise ValueError("oracle-sweep needs non-empty rho_values")
        if self.experiment == "ihdp" and not self.replication_indices:
            raise ValueError("ihdp experiment needs replication_indices")
        if self.experiment == "jobs" and not self.folds:
            raise ValueError("jobs experiment needs folds")

    def resolved_data_dir(self) -> str | None:
        """Config data_dir, falling back to the CEVAE_DATA_DIR env variable."""
        return self.data_dir or os.environ.get("CEVAE_DATA_DIR")

    def split_spec(self, seed: int) -> SplitSpec:
        fractions = self.split or {"train": 0.6, "val": 0.2, "test": 0.2}
        return SplitSpec(fractions["train"], fractions["val"], fractions["test"],
                         seed=seed)

    def hash(self) -> str:
        """Experiment identity: every config field except the output location."""
        identity = {k: v for k, v in self.raw.items() if k != "output_dir"}
        canonical = json.dumps(identity, sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from string parts (independent of Python hashing)."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


# estimator adapters ----------------------------------------------------------

class CevaePredictor:
    """Frozen CEVAE wrapped as a potential-outcome predictor."""

    def __init__(self, model: CevaeModel, n_samples: int, seed: int):
        self.model = model
        self.n_samples = n_samples
        self.seed = seed
        self._calls = 0

    def predict_potential(self, x_raw):
        rng = np.random.default_rng(
            np.random.SeedSequence([self.seed, self._calls])
        )
        self._calls += 1
        return predict_potential_outcomes(self.model, x_raw, self.n_samples, rng)


def _train_config(spec: dict, seed: int) -> TrainConfig:
    return TrainConfig(
        lr=spec.get("lr", 0.01),
        weight_decay=spec.get("weight_decay", 1e-4),
        lr_decay=spec.get("lr_decay", 0.97),
        epochs=spec.get("epochs", 200),
        batch_size=spec.get("batch_size", 100),
        patience=spec.get("patience", 10),
        seed=seed,
    )


def fit_estimator(spec: dict, train_ds: Dataset, val_ds: Dataset, seed: int,
                  n_posterior_samples: int):
    """Fit one estimator spec; returns (predictor, epochs_run_or_None)."""
    name = spec["name"]
    fit_set = train_ds.concat(val_ds) if val_ds.n else train_ds
    if name == "lr1":
        return fit_lr1(fit_set), None
    if name == "lr2":
        return fit_lr2(fit_set), None
    if name == "naive":
        return fit_naive(fit_set), None
    if name == "tarnet":
        predictor = fit_tarnet(
            train_ds, val_ds,
            nh=spec.get("nh", 3),
            width=spec.get("width", 200),
            config=_train_config(spec, seed),
            init_seed=seed,
        )
        return predictor, None
    if name == "cevae":
        model_config = CevaeConfig(
            d_x=train_ds.d,
            covariate_kinds=tuple(train_ds.covariate_kinds),
            outcome_kind=train_ds.outcome_kind,
            d_z=spec.get("d_z", 20),
            latent_kind=spec.get("latent_kind", "gaussian"),
            n_hidden=spec.get("n_hidden", 3),
            width=spec.get("width", 200),
            y_var=spec.get("y_var", 1.0),
            aux_y_var=spec.get("aux_y_var", 1.0),
            seed=seed,
        )
        model = CevaeModel(model_config)
        diagnostics = train(model, train_ds, val_ds, _train_config(spec, seed))
        predictor = CevaePredictor(model, n_posterior_samples,
                                   seed=derive_seed(seed, "predict"))
        return predictor, diagnostics.epochs_run
    raise ValueError(f"unknown estimator {name!r}")


# metric evaluation -----------------------------------------------------------

def _evaluate_on(predictor, ds: Dataset) -> dict:
    """Metrics for one evaluation subset; inapplicable metrics come back None."""
    out: dict = {}
    if ds.n == 0:
        return out
    y1, y0 = predictor.predict_potential(ds.x)
    ite = y1 - y0
    out["ate_est"] = float(ite.mean())
    true_ite = ds.true_ite
    if true_ite is not None:
        out["ate_true"] = float(true_ite.mean())
        out["ate_abs_err"] = ate_error(out["ate_true"], out["ate_est"])
        out["sqrt_pehe"] = sqrt_pehe(true_ite, ite)
        treated = ds.t == 1
        if treated.any():
            out["att_abs_err"] = ate_error(
                float(true_ite[treated].mean()), float(ite[treated].mean())
            )
    if ds.randomized_mask is not None and ds.randomized_mask.any():
        rand = ds.randomized_mask
        treated_rand = rand & (ds.t == 1)
        control_rand = rand & (ds.t == 0)
        if treated_rand.any() and control_rand.any():
            att_truth = float(ds.y[treated_rand].mean() - ds.y[control_rand].mean())
            treated = ds.t == 1
            out["att_abs_err"] = ate_error(att_truth, float(ite[treated].mean()))
        out["policy_risk"] = policy_risk((ite > 0).astype(int), ds).value
    if ds.outcome_kind == "binary" and ds.y_cf is not None:
        labels = ds.y_cf.astype(int)
        if len(np.unique(labels)) == 2:
            scores = np.where(ds.t == 1, y0, y1)
            out["auc"] = auc(scores, labels)
    return out


def _evaluate(predictor, within: Dataset, held_out: Dataset) -> dict:
    row = {}
    within_metrics = _evaluate_on(predictor, within)
    for key, value in within_metrics.items():
        if key in ("ate_true", "ate_est"):
            row[key] = value
        else:
            row[f"{key}_in"] = value
    for key, value in _evaluate_on(predictor, held_out).items():
        if key not in ("ate_true", "ate_est"):
            row[f"{key}_out"] = value
    return row


# per-cell task execution -----------------------------------------------------

def _load_twins_base(config: ExperimentConfig) -> TwinsBase:
    """User-supplied real twins base table (columns z, x0..x44, y0, y1)."""
    data_dir = config.resolved_data_dir()
    if not data_dir:
        raise DataNotFoundError(
            "twins experiment needs data_dir (or CEVAE_DATA_DIR) pointing at "
            "twins_base.csv with columns z, x0..x{d-1}, y0, y1"
        )
    path = Path(data_dir) / "twins_base.csv"
    if not path.exists():
        raise DataNotFoundError(
            f"twins base table not found: {path}; expected the canonical CSV "
            "layout with columns z, x0..x{d-1}, y0, y1"
        )
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    required = {"z", "y0", "y1"}
    if not required <= set(header):
        raise DataNotFoundError(
            f"{path} must contain columns z, y0, y1; found {header}"
        )
    rows = np.genfromtxt(path, delimiter=",", skip_header=1)
    cols = {name: rows[:, i] for i, name in enumerate(header)}
    x_names = [h for h in header if h.startswith("x")]
    x = np.column_stack([cols[name] for name in x_names])
    kinds = ["binary" if np.isin(np.unique(x[:, j]), (0.0, 1.0)).all()
             else "continuous" for j in range(x.shape[1])]
    return TwinsBase(
        z=cols["z"].astype(np.int64),
        x=x,
        y0=cols["y0"],
        y1=cols["y1"],
        covariate_kinds=kinds,
    )


def _make_cell_data(config: ExperimentConfig, grid_value, replication: int):
    """Build (train, val, within, held_out) for one grid cell."""
    data_seed = derive_seed(config.base_seed, config.experiment, grid_value,
                            replication)
    if config.experiment == "toy":
        ds = gen_toy(ToyConfig(n=int(grid_value), seed=data_seed))
    elif config.experiment == "synthetic-twins":
        ds = gen_synthetic_twins(
            config.n_units,
            TwinsProxyConfig(flip_prob=float(grid_value), seed=data_seed),
        )
    elif config.experiment == "twins":
        base = _load_twins_base(config)
        rng = np.random.default_rng(np.random.SeedSequence([data_seed, 3]))
        ds = build_twins_benchmark(
            base, TwinsProxyConfig(flip_prob=float(grid_value), seed=data_seed), rng
        )
    elif config.experiment == "ihdp":
        data_dir = config.resolved_data_dir()
        if not data_dir:
            raise DataNotFoundError(
                "ihdp experiment needs data_dir (or CEVAE_DATA_DIR)"
            )
        train_file = load_ihdp(data_dir, int(grid_value), "train")
        held_out = load_ihdp(data_dir, int(grid_value), "test")
        tr, va, _ = split(train_file, SplitSpec(0.7, 0.3, 0.0, seed=data_seed))
        return tr, va, train_file, held_out
    elif config.experiment == "jobs":
        data_dir = config.resolved_data_dir()
        if not data_dir:
            raise DataNotFoundError(
                "jobs experiment needs data_dir (or CEVAE_DATA_DIR)"
            )
        train_file = load_jobs(data_dir, int(grid_value), "train")
        held_out = load_jobs(data_dir, int(grid_value), "test")
        tr, va, _ = split(train_file, SplitSpec(0.7, 0.3, 0.0, seed=data_seed))
        return tr, va, train_file, held_out
    else:
        raise ValueError(config.experiment)
    tr, va, te = split(ds, config.split_spec(data_seed))
    within = tr.concat(va) if va.n else tr
    return tr, va, within, te


def _grid_name(experiment: str) -> str:
    return {"toy": "n", "synthetic-twins": "flip_prob", "twins": "flip_prob",
            "ihdp": "replication_index", "jobs": "fold"}[experiment]


def _grid_values(config: ExperimentConfig) -> list:
    return {
        "toy": config.sample_sizes,
        "synthetic-twins": config.flip_probs,
        "twins": config.flip_probs,
        "ihdp": config.replication_indices,
        "jobs": config.folds,
    }[config.experiment]


def run_cell(config: ExperimentConfig, grid_value, spec: dict,
             replication: int) -> dict:
    """Run one (grid point, estimator, replication) cell; returns a row dict."""
    label = spec.get("label", spec["name"])
    seed = derive_seed(config.base_seed, config.experiment, grid_value, label,
                       replication)
    row = {c: None for c in RESULT_COLUMNS}
    row.update(
        experiment=config.experiment,
        grid_name=_grid_name(config.experiment),
        grid_value=grid_value,
        estimator=label,
        replication=replication,
        seed=seed,
        status="ok",
        config_hash=config.hash(),
    )
    try:
        train_ds, val_ds, within, held_out = _make_cell_data(
            config, grid_value, replication
        )
        predictor, epochs_run = fit_estimator(
            spec, train_ds, val_ds, seed, config.n_posterior_samples
        )
        row.update(_evaluate(predictor, within, held_out))
        row["epochs_run"] = epochs_run
        if config.save_checkpoints and isinstance(predictor, CevaePredictor):
            ckpt_dir = Path(config.output_dir) / "checkpoints"
            ckpt_dir.mkdir(parents=True, exist_ok=True)
            save_checkpoint(
                predictor.model,
                ckpt_dir / f"{label}_{grid_value}_{replication}.npz",
            )
    except (TrainingError, FitError) as err:
        row["status"] = f"failed: {err}"
    return row


def _run_cell_packed(args):
    config_dict, grid_value, spec, replication = args
    return run_cell(ExperimentConfig.from_dict(config_dict), grid_value, spec,
                    replication)


# output writing ---------------------------------------------------------------

def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, columns: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row[c]) for c in columns])


def _mean_stderr(values: list) -> dict:
    arr = np.array(values, dtype=np.float64)
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return {"mean": mean, "stderr": stderr, "n": len(arr)}


def _summarize_rows(rows: list) -> list:
    groups: dict = {}
    for row in rows:
        if row["status"] != "ok":
            continue
        key = (row["grid_value"], row["estimator"])
        groups.setdefault(key, []).append(row)
    summary = []
    for (grid_value, estimator), members in sorted(
        groups.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])
    ):
        metrics = {}
        for column in METRIC_COLUMNS:
            values = [m[column] for m in members
                      if m[column] is not None and m[column] == m[column]]
            if values:
                metrics[column] = _mean_stderr(values)
        summary.append(
            {"grid_value": grid_value, "estimator": estimator, "metrics": metrics}
        )
    return summary


def _run_oracle_sweep(config: ExperimentConfig, output_dir: Path) -> int:
    from .oracle import BinaryProxyModel, true_do, wrong_adjust

    rows = []
    for rho_t in config.rho_values:
        for rho_x in config.rho_values:
            model = BinaryProxyModel(rho_x=float(rho_x), rho_t=float(rho_t))
            t1, t0 = true_do(model, 1), true_do(model, 0)
            w1, w0 = wrong_adjust(model, 1), wrong_adjust(model, 0)
            rows.append({
                "rho_t": float(rho_t), "rho_x": float(rho_x),
                "true_do_1": t1, "true_do_0": t0,
                "wrong_adjust_1": w1, "wrong_adjust_0": w0,
                "contrast_gap": (w1 - w0) - (t1 - t0),
                "config_hash": config.hash(),
            })
    rows.sort(key=lambda r: (r["rho_t"], r["rho_x"]))
    _write_csv(output_dir / "results.csv", ORACLE_COLUMNS, rows)
    summary = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "experiment": config.experiment,
        "config_hash": config.hash(),
        "n_rows": len(rows),
        "max_abs_true_do_deviation": repr(
            max(max(abs(r["true_do_1"] - 0.5), abs(r["true_do_0"] - 0.5))
                for r in rows)
        ),
    }
    with open(output_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def run(config: ExperimentConfig, workers: int = 1) -> int:
    """Execute an experiment config; returns the process exit code.

    Exit codes: 0 success, 1 at least one cell failed to train (rows are
    flagged and kept), 2 required external data is missing.
    """
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    if config.experiment == "oracle-sweep":
        return _run_oracle_sweep(config, output_dir)
    tasks = [
        (config.raw, grid_value, spec, replication)
        for grid_value in _grid_values(config)
        for spec in config.estimators
        for replication in range(config.replications)
    ]
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(_run_cell_packed, tasks))
        else:
            rows = [_run_cell_packed(t) for t in tasks]
    except DataNotFoundError as err:
        print(f"data not found: {err}")
        return 2
    rows.sort(key=lambda r: (str(r["grid_value"]), r["estimator"],
                             r["replication"]))
    _write_csv(output_dir / "results.csv", RESULT_COLUMNS, rows)
    summary = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "experiment": config.experiment,
        "config_hash": config.hash(),
        "grid_name": _grid_name(config.experiment),
        "groups": _summarize_rows(rows),
    }
    with open(output_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 1 if any(r["status"] != "ok" for r in rows) else 0


def summarize(results_csv) -> list:
    """Aggregate a results CSV: per (grid point, estimator) mean and stderr."""
    path = Path(results_csv)
    if not path.exists():
        raise DataNotFoundError(f"results file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "estimator" not in reader.fieldnames:
            raise ValueError(
                f"{path}: no 'estimator' column; only per-estimator results "
                "files can be summarized (oracle-sweep output is already exact)"
            )
        rows = []
        for raw in reader:
            row = dict(raw)
            for column in METRIC_COLUMNS:
                value = raw.get(column, "")
                row[column] = float(value) if value not in ("", None) else None
            rows.append(row)
    return _summarize_rows(rows)
