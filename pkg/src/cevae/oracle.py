"""Exact analysis of the four-binary-variable proxy model.

The model: a hidden binary confounder z with P(z=1) = 0.5, a noisy proxy x
with P(x=1|z=1) = P(x=0|z=0) = rho_x, a treatment t with
P(t=1|z=1) = P(t=0|z=0) = rho_t, and the deterministic outcome y = t XOR z.
Back-door adjustment over z gives P(y=1|do(t)) = 0.5 for every
(rho_x, rho_t); adjusting for the proxy x instead is biased except when
treatment is randomized (rho_t = 0.5) or the proxy is perfect
(rho_x in {0, 1}).

Also provides a small exact joint-enumeration engine over binary variables,
used to cross-check the closed forms and as a brute-force oracle in tests.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

__all__ = [
    "BinaryProxyModel",
    "DiscreteVariable",
    "JointTable",
    "enumerate_small",
    "proxy_model_variables",
    "asymmetric_proxy_variables",
    "true_do",
    "wrong_adjust",
    "wrong_effect_gap",
    "wrong_effect_gap_asymmetric",
    "do_by_enumeration",
    "adjust_by_enumeration",
]

MAX_ENUM_VARIABLES = 20


@dataclass(frozen=True)
class BinaryProxyModel:
    """Parameters (rho_x, rho_t) of the symmetric binary proxy model."""

    rho_x: float
    rho_t: float

    def __post_init__(self):
        for name, p in (("rho_x", self.rho_x), ("rho_t", self.rho_t)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")


def true_do(model: BinaryProxyModel, t_value: int) -> float:
    """P(y=1|do(t=t_value)) by back-door adjustment over the confounder z.

    Sum over z of P(y=1|t, z) P(z); with y = t XOR z this picks out the one
    z with z = 1 XOR t, so the answer is P(z) = 0.5 regardless of the model.
    """
    if t_value not in (0, 1):
        raise ValueError("t_value must be 0 or 1")
    total = 0.0
    for z in (0, 1):
        p_y1 = float(t_value ^ z)
        total += p_y1 * 0.5
    return total


def wrong_adjust(model: BinaryProxyModel, t_value: int) -> float:
    """Covariate adjustment treating the proxy x as if it were the confounder.

    Computes sum over x of P(y=1|t=t_value, x) P(x) in closed form. Undefined
    when some conditioning cell P(t=t_value, x) has zero probability.
    """
    if t_value not in (0, 1):
        raise ValueError("t_value must be 0 or 1")
    rx, rt = model.rho_x, model.rho_t
    total = 0.0
    for x in (0, 1):
        # y=1 given t picks out z = 1 XOR t; weight each z by P(t|z) P(x|z) P(z).
        z_target = 1 ^ t_value
        num = 0.0
        den = 0.0
        for z in (0, 1):
            p_t = rt if t_value == z else 1.0 - rt
            p_x = rx if x == z else 1.0 - rx
            w = p_t * p_x * 0.5
            den += w
            if z == z_target:
                num += w
        if den == 0.0:
            raise ValueError(
                f"conditioning cell P(t={t_value}, x={x}) has zero probability"
            )
        total += (num / den) * 0.5  # P(x) = 0.5 by symmetry
    return total


def wrong_effect_gap(model: BinaryProxyModel) -> tuple[float, float]:
    """(true contrast, proxy-adjusted contrast) of P(y=1|do(t=1)) - P(y=1|do(t=0)).

    Under the symmetric proxy the two contrasts coincide even where the
    levels are biased; use ``asymmetric_proxy_variables`` with
    ``enumerate_small`` for the asymmetric case where they differ.
    """
    true_contrast = true_do(model, 1) - true_do(model, 0)
    wrong_contrast = wrong_adjust(model, 1) - wrong_adjust(model, 0)
    return true_contrast, wrong_contrast


# exact enumeration over small binary models ---------------------------------

@dataclass(frozen=True)
class DiscreteVariable:
    """Binary variable with P(var=1 | parents) given by ``prob1``.

    ``prob1`` maps a dict of parent assignments to a probability. Variables
    must be listed in topological order.
    """

    name: str
    parents: tuple[str, ...]
    prob1: object  # callable(dict[str, int]) -> float


class JointTable:
    """Exact joint distribution over an ordered tuple of binary variables."""

    def __init__(self, names: tuple[str, ...], probs: dict[tuple[int, ...], float]):
        self.names = names
        self.probs = probs

    def total(self) -> float:
        return sum(self.probs.values())

    def prob(self, **event) -> float:
        """Marginal probability of the given partial assignment."""
        unknown = set(event) - set(self.names)
        if unknown:
            raise ValueError(f"unknown variables: {sorted(unknown)}")
        idx = {name: i for i, name in enumerate(self.names)}
        return sum(
            p
            for assignment, p in self.probs.items()
            if all(assignment[idx[k]] == v for k, v in event.items())
        )

    def conditional(self, event: dict, given: dict) -> float:
        denom = self.prob(**given)
        if denom == 0.0:
            raise ValueError(f"conditioning event {given} has zero probability")
        return self.prob(**event, **given) / denom


def enumerate_small(variables: list[DiscreteVariable],
                    interventions: dict[str, int] | None = None) -> JointTable:
    """Build the exact joint table, optionally under do-interventions.

    ``interventions`` replaces the mechanism of each named variable with the
    constant value (graph mutilation), so the result is the interventional
    joint. Capacity is capped at MAX_ENUM_VARIABLES binary variables.
    """
    if len(variables) > MAX_ENUM_VARIABLES:
        raise ValueError(
            f"enumeration supports at most {MAX_ENUM_VARIABLES} variables, "
            f"got {len(variables)}"
        )
    interventions = interventions or {}
    names = tuple(v.name for v in variables)
    seen: set[str] = set()
    for v in variables:
        missing = set(v.parents) - seen
        if missing:
            raise ValueError(
                f"variable {v.name!r} listed before its parents {sorted(missing)}"
            )
        seen.add(v.name)
    probs: dict[tuple[int, ...], float] = {}
    for assignment in itertools.product((0, 1), repeat=len(variables)):
        setting = dict(zip(names, assignment))
        p = 1.0
        for v, value in zip(variables, assignment):
            if v.name in interventions:
                p *= 1.0 if value == interventions[v.name] else 0.0
            else:
                p1 = v.prob1({k: setting[k] for k in v.parents})
                p *= p1 if value == 1 else 1.0 - p1
            if p == 0.0:
                break
        if p != 0.0:
            probs[assignment] = p
    return JointTable(names, probs)


def do_by_enumeration(variables: list[DiscreteVariable], t_value: int) -> float:
    """P(y=1|do(t=t_value)) computed on the mutilated joint."""
    table = enumerate_small(variables, interventions={"t": t_value})
    return table.prob(y=1)


def adjust_by_enumeration(variables: list[DiscreteVariable], t_value: int,
                          adjust_for: str = "x") -> float:
    """Covariate-adjustment estimate sum_v P(y=1|t, adj=v) P(adj=v).

    This is the (generally biased) quantity obtained by treating
    ``adjust_for`` as if it were the confounder.
    """
    table = enumerate_small(variables)
    total = 0.0
    for v in (0, 1):
        p_adj = table.prob(**{adjust_for: v})
        if p_adj == 0.0:
            continue
        total += table.conditional({"y": 1}, {"t": t_value, adjust_for: v}) * p_adj
    return total


def wrong_effect_gap_asymmetric(p_x1_given_z1: float, p_x1_given_z0: float,
                                rho_t: float) -> tuple[float, float]:
    """(true contrast, proxy-adjusted contrast) for an asymmetric proxy.

    Computed by exact enumeration; with p_x1_given_z0 != 1 - p_x1_given_z1
    the two contrasts generally differ.
    """
    variables = asymmetric_proxy_variables(p_x1_given_z1, p_x1_given_z0, rho_t)
    true_contrast = do_by_enumeration(variables, 1) - do_by_enumeration(variables, 0)
    wrong_contrast = (
        adjust_by_enumeration(variables, 1) - adjust_by_enumeration(variables, 0)
    )
    return true_contrast, wrong_contrast


def proxy_model_variables(model: BinaryProxyModel) -> list[DiscreteVariable]:
    """The symmetric proxy model as enumeration variables (z, x, t, y)."""
    return asymmetric_proxy_variables(model.rho_x, 1.0 - model.rho_x, model.rho_t)


def asymmetric_proxy_variables(p_x1_given_z1: float, p_x1_given_z0: float,
                               rho_t: float) -> list[DiscreteVariable]:
    """Proxy model with separately chosen P(x=1|z=1) and P(x=1|z=0).

    The symmetric model is the special case P(x=1|z=0) = 1 - P(x=1|z=1);
    breaking the symmetry makes even the proxy-adjusted contrast biased.
    """
    return [
        DiscreteVariable("z", (), lambda a: 0.5),
        DiscreteVariable(
            "x", ("z",),
            lambda a: p_x1_given_z1 if a["z"] == 1 else p_x1_given_z0,
        ),
        DiscreteVariable(
            "t", ("z",),
            lambda a: rho_t if a["z"] == 1 else 1.0 - rho_t,
        ),
        DiscreteVariable("y", ("t", "z"), lambda a: float(a["t"] ^ a["z"])),
    ]
