"""Level seminorms and the closed-form certificate constants.

The tower seminorm of an element is the largest level defect
``|a - E_n(a)| / beta(n)`` over all levels below the top, where E_n is the
trace-compatible conditional expectation. On a truncated tower this finite
max is exact for every element of the top algebra, since E_n fixes the
element from its own level upwards.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .elements import Element, op_norm, re_im_parts, jordan_lie
from .towers import BetaSequence, BratteliTower

__all__ = [
    "AdmissibleTriple",
    "admissible_triple",
    "check_triple",
    "l_seminorm",
    "l_seminorm_terms",
    "quasi_leibniz_slack",
    "XnFactors",
    "xn_factors",
    "af_propinquity_bound",
]


@dataclass(frozen=True)
class AdmissibleTriple:
    """The (F, G, H) growth functions used by the module certificates.

    ``case`` is "af" for the matrix-tower constants or "commutative" for the
    function-space constants. All three maps are monotone in each argument
    and dominate the products they certify.
    """

    case: str
    F: Callable[[float, float, float, float], float]
    G: Callable[[float, float, float], float]
    H: Callable[[float, float], float]


def _f_af(x1, x2, x3, x4):
    return 2.0 * (x1 * x4 + x2 * x3)


def _f_comm(x1, x2, x3, x4):
    return x1 * x4 + x2 * x3


def admissible_triple(case: str) -> AdmissibleTriple:
    if case == "af":
        return AdmissibleTriple(
            "af",
            F=_f_af,
            G=lambda x, y, z: _f_af(x, y, z, z),
            H=lambda x, y: _f_af(x, x, y, y),
        )
    if case == "commutative":
        return AdmissibleTriple(
            "commutative",
            F=_f_comm,
            G=lambda x, y, z: _f_comm(x, z, y, z),
            H=lambda x, y: _f_comm(x, y, x, y),
        )
    raise ValueError(f"unknown admissible-triple case {case!r}")


def check_triple(triple: AdmissibleTriple, count: int, seed: int, scale: float = 10.0):
    """Sweep the three domination inequalities and monotonicity on random tuples.

    Returns a dict of max violations (0.0 means every sampled inequality held).
    The left sides are evaluated in the same distributed form as F/G/H, so the
    commutative equality cases are exact and the checks carry zero tolerance.
    """
    rng = np.random.default_rng(seed)
    viol = {
        "f_dominates": 0.0,
        "g_dominates": 0.0,
        "h_dominates": 0.0,
        "f_monotone": 0.0,
        "g_monotone": 0.0,
        "h_monotone": 0.0,
    }
    for _ in range(count):
        x1, x2, x3, x4 = rng.uniform(0.0, scale, size=4)
        lhs = x1 * x4 + x2 * x3
        viol["f_dominates"] = max(viol["f_dominates"], lhs - triple.F(x1, x2, x3, x4))

        x, y, z = x1, x2, x3
        lhs = x * z + y * z
        viol["g_dominates"] = max(viol["g_dominates"], lhs - triple.G(x, y, z))

        lhs = 2.0 * (x * y)
        viol["h_dominates"] = max(viol["h_dominates"], lhs - triple.H(x, y))

        d1, d2, d3, d4 = rng.uniform(0.0, scale, size=4)
        viol["f_monotone"] = max(
            viol["f_monotone"],
            triple.F(x1, x2, x3, x4) - triple.F(x1 + d1, x2 + d2, x3 + d3, x4 + d4),
        )
        viol["g_monotone"] = max(
            viol["g_monotone"], triple.G(x, y, z) - triple.G(x + d1, y + d2, z + d3)
        )
        viol["h_monotone"] = max(
            viol["h_monotone"], triple.H(x, y) - triple.H(x + d1, y + d2)
        )
    return viol


def _check_beta(t: BratteliTower, beta: BetaSequence) -> None:
    if len(beta) != t.top_level:
        raise ValueError(
            f"need one level weight per level below the top "
            f"({t.top_level}), got {len(beta)}"
        )


def l_seminorm_terms(t: BratteliTower, beta: BetaSequence, a: Element) -> list[float]:
    """Per-level defects |a - E_n(a)| / beta(n); each is a lower bound for the max."""
    _check_beta(t, beta)
    return [
        op_norm(a - t.expectation_top(n, a)) / beta[n] for n in range(t.top_level)
    ]


def l_seminorm(t: BratteliTower, beta: BetaSequence, a: Element) -> float:
    """Tower seminorm: vanishes exactly on scalar multiples of the identity."""
    terms = l_seminorm_terms(t, beta, a)
    return max(terms) if terms else 0.0


def quasi_leibniz_slack(
    t: BratteliTower, beta: BetaSequence, a: Element, b: Element
) -> tuple[float, float]:
    """Slack of the product bounds F(|a|,|b|,L(a),L(b)) - L(a o b) and - L({a,b}).

    Inputs are symmetrized first; both slacks should be nonnegative up to
    floating-point noise.
    """
    a = re_im_parts(a)[0]
    b = re_im_parts(b)[0]
    triple = admissible_triple("af")
    la = l_seminorm(t, beta, a)
    lb = l_seminorm(t, beta, b)
    bound = triple.F(op_norm(a), op_norm(b), la, lb)
    jordan, lie = jordan_lie(a, b)
    return bound - l_seminorm(t, beta, jordan), bound - l_seminorm(t, beta, lie)


@dataclass(frozen=True)
class XnFactors:
    """Scaling constants of the recovery certificate at one level."""

    level: int
    x_prime: float
    x: float
    bound: float  # max(beta(n), x_n - 1)


def xn_factors(beta: BetaSequence, n: int) -> XnFactors:
    """Exhaustive evaluation of x'_n, x_n and the level-n certificate bound."""
    if n < 1:
        raise ValueError("level must be >= 1 (no lower levels to compare against)")
    if n >= len(beta):
        raise ValueError(f"level {n} out of range for {len(beta)} level weights")
    bn = beta[n]
    x_prime = max((2.0 * bn + beta[m]) / beta[m] for m in range(n))
    x = max(1.0 + bn, x_prime)
    return XnFactors(level=n, x_prime=x_prime, x=x, bound=max(bn, x - 1.0))


def af_propinquity_bound(beta: BetaSequence, n: int) -> float:
    """Upper bound beta(n) on the distance between level n and the top algebra.

    The value is an upper bound only; nothing in the package computes the
    distance it bounds.
    """
    if not 0 <= n < len(beta):
        raise ValueError(f"level {n} out of range for {len(beta)} level weights")
    return beta[n]
