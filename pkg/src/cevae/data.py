"""Dataset container, canonical CSV format, deterministic splits, and loaders.

The canonical on-disk format is a headered CSV (covariate columns ``x0..``,
then ``t``, ``y`` and optional ``ycf``, ``mu0``, ``mu1``, ``e``) plus a JSON
sidecar ``<file>.schema.json`` recording column roles, covariate kinds, and
the outcome kind. Floats are written with ``repr`` so a save/load round trip
is bit exact.

IHDP and Jobs benchmark files are user supplied (see README for the expected
layout); loaders raise DataNotFoundError rather than synthesizing anything.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Dataset",
    "SplitSpec",
    "DataFormatError",
    "DataNotFoundError",
    "save_csv",
    "load_csv",
    "split",
    "load_ihdp",
    "load_jobs",
]

SCHEMA_VERSION = 1


class DataFormatError(ValueError):
    """Malformed dataset file (bad cell, missing column, ragged row)."""


class DataNotFoundError(FileNotFoundError):
    """Expected external benchmark files are absent."""


@dataclass
class Dataset:
    """Observational dataset with optional ground-truth columns.

    ``x`` is (n, d) float64; ``t`` is (n,) in {0, 1}; ``y`` the factual
    outcome. ``y_cf`` holds realized counterfactual outcomes, ``mu0``/``mu1``
    noiseless potential-outcome means (both only on simulated data).
    ``randomized_mask`` flags units from a randomized subset (Jobs).
    """

    x: np.ndarray
    t: np.ndarray
    y: np.ndarray
    covariate_kinds: list[str]
    outcome_kind: str = "continuous"
    y_cf: np.ndarray | None = None
    mu0: np.ndarray | None = None
    mu1: np.ndarray | None = None
    randomized_mask: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.x.ndim != 2:
            raise ValueError(f"x must be 2-D, got shape {self.x.shape}")
        n = self.x.shape[0]
        self.t = np.asarray(self.t)
        self.y = np.asarray(self.y, dtype=np.float64)
        if not np.isin(self.t, (0, 1)).all():
            raise ValueError("t must contain only 0 and 1")
        self.t = self.t.astype(np.int64)
        for name in ("t", "y", "y_cf", "mu0", "mu1", "randomized_mask"):
            col = getattr(self, name)
            if col is not None and len(col) != n:
                raise ValueError(f"column {name} has length {len(col)}, expected {n}")
        if len(self.covariate_kinds) != self.x.shape[1]:
            raise ValueError("covariate_kinds length must match covariate count")
        bad = set(self.covariate_kinds) - {"binary", "continuous"}
        if bad:
            raise ValueError(f"unknown covariate kinds: {sorted(bad)}")
        if self.outcome_kind not in ("binary", "continuous"):
            raise ValueError(f"unknown outcome kind: {self.outcome_kind!r}")
        if self.randomized_mask is not None:
            self.randomized_mask = np.asarray(self.randomized_mask).astype(bool)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def true_ite(self) -> np.ndarray | None:
        if self.mu0 is None or self.mu1 is None:
            return None
        return self.mu1 - self.mu0

    def subset(self, idx) -> "Dataset":
        def take(col):
            return None if col is None else col[idx]

        return Dataset(
            x=self.x[idx],
            t=self.t[idx],
            y=self.y[idx],
            covariate_kinds=list(self.covariate_kinds),
            outcome_kind=self.outcome_kind,
            y_cf=take(self.y_cf),
            mu0=take(self.mu0),
            mu1=take(self.mu1),
            randomized_mask=take(self.randomized_mask),
        )

    def concat(self, other: "Dataset") -> "Dataset":
        if other.d != self.d or other.outcome_kind != self.outcome_kind:
            raise ValueError("datasets are not concatenable")

        def cat(a, b):
            if a is None or b is None:
                return None
            return np.concatenate([a, b])

        return Dataset(
            x=np.concatenate([self.x, other.x]),
            t=np.concatenate([self.t, other.t]),
            y=np.concatenate([self.y, other.y]),
            covariate_kinds=list(self.covariate_kinds),
            outcome_kind=self.outcome_kind,
            y_cf=cat(self.y_cf, other.y_cf),
            mu0=cat(self.mu0, other.mu0),
            mu1=cat(self.mu1, other.mu1),
            randomized_mask=cat(self.randomized_mask, other.randomized_mask),
        )


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic train/validation/test split by seeded permutation."""

    train: float
    val: float
    test: float
    seed: int = 0
    replication: int = 0

    def __post_init__(self):
        fracs = (self.train, self.val, self.test)
        if any(f < 0 for f in fracs):
            raise ValueError("split fractions must be nonnegative")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {sum(fracs)}")


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded permutation then contiguous slicing into train/val/test.

    A strictly positive fraction that rounds to an empty slice is an error;
    a zero fraction yields an intentionally empty split.
    """
    n = dataset.n
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, spec.replication]))
    perm = rng.permutation(n)
    c1 = round(spec.train * n)
    c2 = round((spec.train + spec.val) * n)
    pieces = (perm[:c1], perm[c1:c2], perm[c2:])
    for frac, piece, name in zip((spec.train, spec.val, spec.test), pieces,
                                 ("train", "val", "test")):
        if frac > 0 and len(piece) == 0:
            raise ValueError(f"{name} fraction {frac} produces an empty split at n={n}")
    return tuple(dataset.subset(p) for p in pieces)


# canonical CSV format ------------------------------------------------------

_OPTIONAL_COLUMNS = {"y_cf": "ycf", "mu0": "mu0", "mu1": "mu1",
                     "randomized_mask": "e"}


def _schema_path(path: Path) -> Path:
    return path.with_name(path.name + ".schema.json")


def save_csv(dataset: Dataset, path) -> None:
    """Write the dataset CSV plus its JSON schema sidecar."""
    path = Path(path)
    x_names = [f"x{j}" for j in range(dataset.d)]
    header = list(x_names) + ["t", "y"]
    optional_present = {}
    for attr, col_name in _OPTIONAL_COLUMNS.items():
        if getattr(dataset, attr) is not None:
            header.append(col_name)
            optional_present[attr] = col_name
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.x[i]]
            row.append(str(int(dataset.t[i])))
            row.append(repr(float(dataset.y[i])))
            for attr in optional_present:
                col = getattr(dataset, attr)
                if attr == "randomized_mask":
                    row.append(str(int(col[i])))
                else:
                    row.append(repr(float(col[i])))
            writer.writerow(row)
    schema = {
        "format_version": SCHEMA_VERSION,
        "columns": {
            "x": x_names,
            "t": "t",
            "y": "y",
            **{attr: name for attr, name in optional_present.items()},
        },
        "covariate_kinds": list(dataset.covariate_kinds),
        "outcome_kind": dataset.outcome_kind,
    }
    with open(_schema_path(path), "w") as fh:
        json.dump(schema, fh, indent=2)
        fh.write("\n")


def _parse_cell(raw: str, row: int, name: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise DataFormatError(
            f"row {row}, column '{name}': non-numeric cell {raw!r}"
        ) from None


def load_csv(path, schema=None) -> Dataset:
    """Load a canonical CSV; ``schema`` overrides the sidecar when given."""
    path = Path(path)
    if not path.exists():
        raise DataNotFoundError(f"dataset file not found: {path}")
    if schema is None:
        spath = _schema_path(path)
        if not spath.exists():
            raise DataNotFoundError(f"schema sidecar not found: {spath}")
        with open(spath) as fh:
            schema = json.load(fh)
    columns = schema["columns"]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        index = {name: i for i, name in enumerate(header)}
        required = list(columns["x"]) + [columns["t"], columns["y"]]
        for name in required:
            if name not in index:
                raise DataFormatError(f"missing required column '{name}'")
        optional_idx = {}
        for attr in _OPTIONAL_COLUMNS:
            col_name = columns.get(attr)
            if col_name is not None:
                if col_name not in index:
                    raise DataFormatError(f"missing column '{col_name}' named in schema")
                optional_idx[attr] = index[col_name]
        x_idx = [index[name] for name in columns["x"]]
        t_idx, y_idx = index[columns["t"]], index[columns["y"]]
        rows = []
        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DataFormatError(
                    f"row {rownum}: expected {len(header)} cells, got {len(row)}"
                )
            rows.append(row)
    n = len(rows)
    x = np.empty((n, len(x_idx)))
    t = np.empty(n)
    y = np.empty(n)
    optional = {attr: np.empty(n) for attr in optional_idx}
    for i, row in enumerate(rows, start=1):
        for j, ci in enumerate(x_idx):
            x[i - 1, j] = _parse_cell(row[ci], i, header[ci])
        t_val = _parse_cell(row[t_idx], i, header[t_idx])
        if t_val not in (0.0, 1.0):
            raise DataFormatError(
                f"row {i}, column '{header[t_idx]}': treatment must be 0 or 1, got {t_val}"
            )
        t[i - 1] = t_val
        y[i - 1] = _parse_cell(row[y_idx], i, header[y_idx])
        for attr, ci in optional_idx.items():
            optional[attr][i - 1] = _parse_cell(row[ci], i, header[ci])
    if "randomized_mask" in optional:
        optional["randomized_mask"] = optional["randomized_mask"].astype(bool)
    return Dataset(
        x=x,
        t=t,
        y=y,
        covariate_kinds=list(schema["covariate_kinds"]),
        outcome_kind=schema["outcome_kind"],
        **optional,
    )


# external benchmark loaders -------------------------------------------------

IHDP_REPLICATIONS = 1000

_IHDP_LAYOUT = (
    "expected '<dir>/ihdp_npci_1-{R}.train.npz' and '.test.npz' with arrays "
    "x (n, d, R), t, yf, ycf, mu0, mu1 each (n, R)"
)
_JOBS_LAYOUT = (
    "expected '<dir>/jobs_DW_bin.new.10.train.npz' and '.test.npz' with arrays "
    "x (n, d, 10), t, yf, e each (n, 10)"
)


def _detect_kinds(x: np.ndarray) -> list[str]:
    """Column is binary when it only takes values in {0, 1}."""
    kinds = []
    for j in range(x.shape[1]):
        vals = np.unique(x[:, j])
        kinds.append("binary" if np.isin(vals, (0.0, 1.0)).all() else "continuous")
    return kinds


def _find_one(directory: Path, pattern: str, layout: str) -> Path:
    matches = sorted(directory.glob(pattern))
    if not matches:
        raise DataNotFoundError(
            f"no file matching '{pattern}' under {directory}; {layout}"
        )
    return matches[0]


def load_ihdp(data_dir, replication: int, which: str = "train") -> Dataset:
    """Load one IHDP replication from the circulated npz bundles.

    ``replication`` is 1-based (1..1000 for the full bundle). ``which``
    selects the prior authors' train or test portion.
    """
    directory = Path(data_dir)
    if not directory.is_dir():
        raise DataNotFoundError(f"IHDP directory not found: {directory}; {_IHDP_LAYOUT}")
    if which not in ("train", "test"):
        raise ValueError("which must be 'train' or 'test'")
    path = _find_one(directory, f"ihdp_npci_1-*.{which}.npz", _IHDP_LAYOUT)
    with np.load(path) as bundle:
        n_rep = bundle["x"].shape[2]
        if not 1 <= replication <= IHDP_REPLICATIONS:
            raise ValueError(
                f"IHDP replication must be in [1, {IHDP_REPLICATIONS}], got {replication}"
            )
        if replication > n_rep:
            raise ValueError(
                f"replication {replication} exceeds the {n_rep} replications in {path.name}"
            )
        r = replication - 1
        x = np.asarray(bundle["x"][:, :, r], dtype=np.float64)
        return Dataset(
            x=x,
            t=bundle["t"][:, r],
            y=np.asarray(bundle["yf"][:, r], dtype=np.float64),
            covariate_kinds=_detect_kinds(x),
            outcome_kind="continuous",
            y_cf=np.asarray(bundle["ycf"][:, r], dtype=np.float64),
            mu0=np.asarray(bundle["mu0"][:, r], dtype=np.float64),
            mu1=np.asarray(bundle["mu1"][:, r], dtype=np.float64),
        )


def load_jobs(data_dir, fold: int, which: str = "train") -> Dataset:
    """Load one Jobs train/test fold; ``e`` marks the randomized subset."""
    directory = Path(data_dir)
    if not directory.is_dir():
        raise DataNotFoundError(f"Jobs directory not found: {directory}; {_JOBS_LAYOUT}")
    if which not in ("train", "test"):
        raise ValueError("which must be 'train' or 'test'")
    path = _find_one(directory, f"jobs_DW_bin*.{which}.npz", _JOBS_LAYOUT)
    with np.load(path) as bundle:
        n_fold = bundle["x"].shape[2]
        if not 0 <= fold < n_fold:
            raise ValueError(f"Jobs fold must be in [0, {n_fold - 1}], got {fold}")
        x = np.asarray(bundle["x"][:, :, fold], dtype=np.float64)
        mask = np.asarray(bundle["e"][:, fold]).astype(bool)
        if not mask.any():
            raise DataFormatError(f"{path.name}: randomized subset is empty")
        return Dataset(
            x=x,
            t=bundle["t"][:, fold],
            y=np.asarray(bundle["yf"][:, fold], dtype=np.float64),
            covariate_kinds=_detect_kinds(x),
            outcome_kind="binary",
            randomized_mask=mask,
        )
