"""Evaluation metrics: PEHE, ATE/ATT error, policy risk, AUC."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .data import Dataset

__all__ = [
    "MetricReport",
    "PolicyRisk",
    "pehe",
    "sqrt_pehe",
    "ate_error",
    "att_error",
    "policy_risk",
    "auc",
]


@dataclass
class MetricReport:
    """Metric values for one fitted estimator on one evaluation set."""

    sqrt_pehe: float | None = None
    ate_abs_err: float | None = None
    att_abs_err: float | None = None
    policy_risk: float | None = None
    auc: float | None = None


def pehe(true_ite, pred_ite) -> float:
    """Mean squared error between true and predicted unit-level effects."""
    true_ite = np.asarray(true_ite, dtype=np.float64)
    pred_ite = np.asarray(pred_ite, dtype=np.float64)
    if true_ite.shape != pred_ite.shape or true_ite.ndim != 1:
        raise ValueError(
            f"ITE vectors must be equal-length 1-D, got {true_ite.shape} vs {pred_ite.shape}"
        )
    if true_ite.size == 0:
        raise ValueError("ITE vectors must be non-empty")
    return float(np.mean((true_ite - pred_ite) ** 2))


def sqrt_pehe(true_ite, pred_ite) -> float:
    return float(np.sqrt(pehe(true_ite, pred_ite)))


def ate_error(truth: float, estimate: float) -> float:
    return abs(float(truth) - float(estimate))


att_error = ate_error


class PolicyRisk(NamedTuple):
    value: float
    empty_cell: bool


def policy_risk(policy, dataset: Dataset) -> PolicyRisk:
    """Expected loss of treating per ``policy``, on the randomized subset.

    risk = 1 - [ E[y | t=1, pi=1] P(pi=1) + E[y | t=0, pi=0] P(pi=0) ],
    with all quantities estimated on the units flagged by
    ``dataset.randomized_mask``. An empty conditioning cell contributes 0 and
    sets ``empty_cell``.
    """
    if dataset.randomized_mask is None or not dataset.randomized_mask.any():
        raise ValueError("policy risk needs a nonempty randomized subset")
    policy = np.asarray(policy)
    if policy.shape != (dataset.n,):
        raise ValueError(f"policy must have shape ({dataset.n},), got {policy.shape}")
    if not np.isin(policy, (0, 1)).all():
        raise ValueError("policy must contain only 0 and 1")
    mask = dataset.randomized_mask
    pi = policy[mask].astype(bool)
    t = dataset.t[mask].astype(bool)
    y = dataset.y[mask]
    p_treat = pi.mean()
    empty = False
    value = 0.0
    cell = pi & t
    if cell.any():
        value += y[cell].mean() * p_treat
    elif p_treat > 0:
        empty = True
    cell = ~pi & ~t
    if cell.any():
        value += y[cell].mean() * (1.0 - p_treat)
    elif p_treat < 1:
        empty = True
    return PolicyRisk(1.0 - value, empty)


def auc(scores, labels) -> float:
    """Probability a random positive outranks a random negative (ties 0.5)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-D arrays")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must contain only 0 and 1")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    ranks = _average_ranks(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the average rank."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks
