import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cevae.data import Dataset
from cevae.metrics import ate_error, att_error, auc, pehe, policy_risk, sqrt_pehe


def test_pehe_zero_when_exact():
    ite = np.array([0.3, -1.2, 0.0])
    assert pehe(ite, ite) == 0.0


def test_pehe_hand_computed_fixture():
    assert pehe([1.0, -1.0], [0.0, 0.0]) == 1.0
    assert sqrt_pehe([1.0, -1.0], [0.0, 0.0]) == 1.0


def test_pehe_constant_shift_adds_c_squared():
    true_ite = np.array([0.5, -0.25, 1.5, 0.0])
    for c in (0.3, -1.7, 2.0):
        assert abs(pehe(true_ite, true_ite + c) - c**2) < 1e-12


def test_pehe_permutation_invariant():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=20), rng.normal(size=20)
    perm = rng.permutation(20)
    assert abs(pehe(a, b) - pehe(a[perm], b[perm])) < 1e-12


def test_pehe_length_mismatch_rejected():
    with pytest.raises(ValueError):
        pehe([1.0, 2.0], [1.0])


def test_ate_error_examples():
    assert ate_error(0.5, 0.5) == 0.0
    assert abs(ate_error(-0.025, 0.0) - 0.025) < 1e-15
    assert ate_error(0.3, -0.2) == ate_error(-0.2, 0.3)
    assert att_error(1.0, 0.0) == 1.0


def _randomized_dataset(t, y, mask=None):
    n = len(t)
    return Dataset(
        x=np.zeros((n, 1)),
        t=np.asarray(t),
        y=np.asarray(y, dtype=float),
        covariate_kinds=["continuous"],
        outcome_kind="binary",
        randomized_mask=np.ones(n, bool) if mask is None else np.asarray(mask),
    )


def test_policy_risk_zero_when_outcome_always_one():
    ds = _randomized_dataset([1, 0, 1, 0], [1, 1, 1, 1])
    for policy in ([1, 1, 1, 1], [0, 0, 0, 0], [1, 0, 0, 1]):
        assert policy_risk(np.array(policy), ds).value == 0.0


def test_policy_risk_treat_everyone_fixture():
    # treated mean 0.7 among randomized treated units -> risk 0.3
    t = np.array([1] * 10 + [0] * 5)
    y = np.array([1] * 7 + [0] * 3 + [1] * 5, dtype=float)
    ds = _randomized_dataset(t, y)
    result = policy_risk(np.ones(15, dtype=int), ds)
    assert abs(result.value - 0.3) < 1e-12
    assert not result.empty_cell


def _brute_force_policy_risk(policy, t, y, mask):
    """Independent re-computation with exact rational arithmetic."""
    idx = [i for i in range(len(t)) if mask[i]]
    pi = [int(policy[i]) for i in idx]
    tt = [int(t[i]) for i in idx]
    yy = [Fraction(int(y[i])) for i in idx]
    n = len(idx)
    p_treat = Fraction(sum(pi), n)
    value = Fraction(0)
    treated_cell = [yy[i] for i in range(n) if pi[i] == 1 and tt[i] == 1]
    if treated_cell:
        value += sum(treated_cell) / len(treated_cell) * p_treat
    control_cell = [yy[i] for i in range(n) if pi[i] == 0 and tt[i] == 0]
    if control_cell:
        value += sum(control_cell) / len(control_cell) * (1 - p_treat)
    return 1 - value


def test_policy_risk_matches_enumeration_on_20_unit_fixture():
    rng = np.random.default_rng(5)
    t = rng.integers(0, 2, size=20)
    t[:2] = [0, 1]  # both arms present
    y = rng.integers(0, 2, size=20).astype(float)
    mask = np.ones(20, bool)
    ds = _randomized_dataset(t, y, mask)
    for _ in range(50):
        policy = rng.integers(0, 2, size=20)
        mine = policy_risk(policy, ds).value
        brute = float(_brute_force_policy_risk(policy, t, y, mask))
        assert abs(mine - brute) <= 1e-12


def test_policy_risk_all_policies_small_fixture():
    rng = np.random.default_rng(11)
    n = 10
    t = np.array([0, 1] * 5)
    y = rng.integers(0, 2, size=n).astype(float)
    mask = np.array([True] * 8 + [False] * 2)
    ds = _randomized_dataset(t, y, mask)
    for bits in itertools.product((0, 1), repeat=n):
        policy = np.array(bits)
        mine = policy_risk(policy, ds).value
        brute = float(_brute_force_policy_risk(policy, t, y, mask))
        assert abs(mine - brute) <= 1e-12


def test_policy_risk_empty_cell_flagged():
    # policy treats everyone but no randomized treated units exist
    ds = _randomized_dataset([0, 0, 0], [1, 1, 0])
    result = policy_risk(np.ones(3, dtype=int), ds)
    assert result.empty_cell
    assert result.value == 1.0  # empty cell contributes 0


def test_policy_risk_requires_randomized_units():
    ds = Dataset(
        x=np.zeros((3, 1)),
        t=[0, 1, 0],
        y=np.ones(3),
        covariate_kinds=["continuous"],
        outcome_kind="binary",
    )
    with pytest.raises(ValueError, match="randomized"):
        policy_risk(np.ones(3, dtype=int), ds)


def test_auc_perfect_and_ties():
    assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5


def test_auc_fixture():
    assert abs(auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) - 0.75) < 1e-12


def test_auc_pairwise_enumeration_oracle():
    rng = np.random.default_rng(3)
    scores = np.round(rng.random(30), 2)  # rounding forces some ties
    labels = rng.integers(0, 2, size=30)
    labels[:2] = [0, 1]
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    expected = wins / (len(pos) * len(neg))
    assert abs(auc(scores, labels) - expected) <= 1e-12


def test_auc_single_class_rejected():
    with pytest.raises(ValueError, match="both classes"):
        auc([0.1, 0.9], [1, 1])


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(min_value=-5, max_value=5), min_size=4, max_size=30),
    st.data(),
)
def test_auc_invariant_under_increasing_transform(scores, data):
    labels = data.draw(
        st.lists(st.integers(0, 1), min_size=len(scores), max_size=len(scores))
    )
    if len(set(labels)) < 2:
        labels[0], labels[1] = 0, 1
    scores = np.round(np.array(scores), 3)
    base = auc(scores, labels)
    transformed = auc(np.exp(0.5 * scores) + 3.0, labels)
    assert abs(base - transformed) <= 1e-12
