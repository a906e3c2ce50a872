"""Ideals of a truncated tower and their certificate machinery.

An ideal is fixed by the set of top-level blocks it occupies; the slice at
every lower level is derived from the diagram (a block survives iff all of
its targets survive). The module computes the ideal norm D, samples its unit
ball, and checks the recovery-map and imprint certificates level by level.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .elements import Element, from_flat, identity, op_norm, zeros
from .seminorms import l_seminorm_terms, xn_factors
from .towers import BetaSequence, BratteliTower

__all__ = [
    "IdealSupport",
    "BridgeReport",
    "RecoveryCertificate",
    "ConvergenceRow",
    "derive_supports",
    "derive_downward",
    "edge_closure_violations",
    "unit_projection",
    "in_ideal",
    "d_norm",
    "ball_sample",
    "recover_certificate",
    "k_modular_estimate",
    "imprint_estimate",
    "fell_surrogate",
    "fell_to_propinquity_table",
]

#: membership tolerance for blocks outside the support
MEMBERSHIP_TOL = 1e-12

#: guard against division by the norm of a near-zero sample
EPS_DIV = 1e-14


@dataclass(frozen=True, eq=False)
class IdealSupport:
    """Per-level block subsets of an ideal, derived from the top support."""

    tower: BratteliTower
    supports: tuple[frozenset[int], ...]
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def top_support(self) -> frozenset[int]:
        return self.supports[-1]

    def is_zero(self) -> bool:
        return all(len(s) == 0 for s in self.supports)

    def to_config(self) -> dict:
        return {"top_support": sorted(self.top_support)}


def derive_downward(
    t: BratteliTower, level: int, seed_support: Iterable[int]
) -> tuple[frozenset[int], ...]:
    """Supports at levels 0..level obtained by pushing a seed support down."""
    supports = [frozenset()] * (level + 1)
    supports[level] = frozenset(int(i) for i in seed_support)
    for n in range(level - 1, -1, -1):
        m = t.mults[n]
        keep = []
        for i in range(len(t.level_shapes[n].dims)):
            targets = {int(j) for j in np.nonzero(m[:, i])[0]}
            if targets and targets.issubset(supports[n + 1]):
                keep.append(i)
        supports[n] = frozenset(keep)
    return tuple(supports)


def derive_supports(t: BratteliTower, top_support: Iterable[int]) -> IdealSupport:
    """Build the ideal fixed by the given set of top-level blocks."""
    t.require_valid()
    top = frozenset(int(i) for i in top_support)
    n_top = len(t.level_shapes[t.top_level].dims)
    bad = [i for i in top if not 0 <= i < n_top]
    if bad:
        raise ValueError(f"top support indices {bad} out of range (0..{n_top - 1})")
    return IdealSupport(t, derive_downward(t, t.top_level, top))


def edge_closure_violations(I: IdealSupport) -> list[tuple[int, int, int]]:
    """Independent restatement check: (n, i, j) with i kept but target j dropped."""
    t = I.tower
    out = []
    for n in range(t.top_level):
        m = t.mults[n]
        for i in sorted(I.supports[n]):
            for j in np.nonzero(m[:, i])[0]:
                if int(j) not in I.supports[n + 1]:
                    out.append((n, i, int(j)))
    return out


def unit_projection(I: IdealSupport, n: int) -> Element:
    """Unit of the level-n slice: identity on supported blocks, zero elsewhere."""
    shape = I.tower.level_shapes[n]
    blocks = [
        np.eye(d, dtype=np.complex128)
        if i in I.supports[n]
        else np.zeros((d, d), dtype=np.complex128)
        for i, d in enumerate(shape.dims)
    ]
    return Element._wrap(shape, tuple(blocks))


def unit_projection_top(I: IdealSupport, n: int) -> Element:
    """The level-n unit included into the top algebra (cached)."""
    key = ("unit_top", n)
    cached = I._cache.get(key)
    if cached is None:
        cached = I.tower.embed_to_top(n, unit_projection(I, n))
        I._cache[key] = cached
    return cached


def in_ideal(
    I: IdealSupport, a: Element, level: int | None = None, tol: float = MEMBERSHIP_TOL
) -> bool:
    """Membership test: blocks outside the support must be numerically zero."""
    t = I.tower
    if level is None:
        level = t.top_level
    if a.shape.dims != t.level_shapes[level].dims:
        raise ValueError("element does not live at the requested level")
    for i, b in enumerate(a.blocks):
        if i in I.supports[level]:
            continue
        if b.shape == (1, 1):
            s = abs(b[0, 0])
        else:
            s = np.linalg.svd(b, compute_uv=False)[0]
        if s > tol:
            return False
    return True


def d_norm(
    t: BratteliTower, beta: BetaSequence, I: IdealSupport, omega: Element
) -> float:
    """Ideal norm: max of the tower seminorm, the operator norm, and the
    unit-defect family |omega - omega*1_n| / beta(n) over all levels below
    the top. Exact on the truncation (finite max)."""
    if not in_ideal(I, omega):
        raise ValueError("element is not in the ideal (support violated)")
    terms = [op_norm(omega)]
    terms.extend(l_seminorm_terms(t, beta, omega))
    for n in range(t.top_level):
        u = unit_projection_top(I, n)
        terms.append(op_norm(omega - omega * u) / beta[n])
    return max(terms)


def ball_sample(
    t: BratteliTower,
    beta: BetaSequence,
    I: IdealSupport,
    level: int,
    count: int,
    seed: int,
) -> list[Element]:
    """Deterministic sample of the D-unit ball of the level slice.

    Gaussian draws supported on the level's blocks are included into the top
    algebra and rescaled by 1/max(D, eps), so every output has D <= 1. The
    first two entries are always 0 and the rescaled slice unit.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not 0 <= level <= t.top_level:
        raise ValueError(f"level {level} out of range")
    rng = np.random.default_rng(seed)
    top_shape = t.level_shapes[t.top_level]
    shape = t.level_shapes[level]
    out: list[Element] = [zeros(top_shape)]
    if count >= 2:
        u = unit_projection_top(I, level)
        out.append(u * (1.0 / max(d_norm(t, beta, I, u), EPS_DIV)))
    while len(out) < count:
        blocks = []
        for i, d in enumerate(shape.dims):
            if i in I.supports[level]:
                b = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            else:
                b = np.zeros((d, d), dtype=np.complex128)
            blocks.append(np.ascontiguousarray(b, dtype=np.complex128))
        el = t.embed_to_top(level, Element._wrap(shape, tuple(blocks)))
        el = el * (1.0 / max(d_norm(t, beta, I, el), EPS_DIV))
        out.append(el)
    return out


@dataclass(frozen=True)
class RecoveryCertificate:
    """Checked inequalities for one recovery candidate E_n(b*1_n)/x_n."""

    level: int
    x_n: float
    candidate: Element
    d_scaled: float  # D of E_n(b*1_n), compared against x_n
    d_candidate: float  # D of the candidate, compared against 1
    dist_unscaled: float  # |b - E_n(b*1_n)|
    dist: float  # |b - candidate|
    bound: float  # (x_n - 1) + 2*beta(n)
    tolerance: float
    failures: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failures


def _recovery_candidate(
    t: BratteliTower, beta: BetaSequence, I: IdealSupport, b: Element, n: int
) -> tuple[Element, Element, float]:
    u = unit_projection_top(I, n)
    scaled = t.expectation_top(n, b * u)
    x = xn_factors(beta, n).x
    return scaled, scaled * (1.0 / x), x


def recover_certificate(
    t: BratteliTower,
    beta: BetaSequence,
    I: IdealSupport,
    b: Element,
    n: int,
    tol: float = 1e-8,
) -> RecoveryCertificate:
    """Certify that the level-n recovery of a unit-ball element stays in the
    level ball and lands within (x_n - 1) + 2*beta(n) of the original."""
    if not 1 <= n < t.top_level:
        raise ValueError(f"recovery level must be in 1..{t.top_level - 1}")
    db = d_norm(t, beta, I, b)
    if db > 1.0 + 1e-9:
        raise ValueError(f"input must be in the unit ball, got D = {db!r}")
    scaled, candidate, x = _recovery_candidate(t, beta, I, b, n)
    d_scaled = d_norm(t, beta, I, scaled)
    d_candidate = d_norm(t, beta, I, candidate)
    dist = op_norm(b - candidate)
    dist_unscaled = op_norm(b - scaled)
    bound = (x - 1.0) + 2.0 * beta[n]
    failures = []
    if d_scaled > x + tol:
        failures.append("d_of_scaled_exceeds_x")
    if d_candidate > 1.0 + tol:
        failures.append("d_of_candidate_exceeds_one")
    if dist > bound + tol:
        failures.append("distance_exceeds_bound")
    return RecoveryCertificate(
        level=n,
        x_n=x,
        candidate=candidate,
        d_scaled=d_scaled,
        d_candidate=d_candidate,
        dist_unscaled=dist_unscaled,
        dist=dist,
        bound=bound,
        tolerance=tol,
        failures=tuple(failures),
    )


def k_modular_estimate(
    omega: Element, nu: Element, sample: Sequence[Element]
) -> float:
    """Sampled lower bound of the modular distance sup over the ball of
    |omega* xi - nu* xi|; never exceeds |omega - nu|."""
    if len(sample) == 0:
        raise ValueError("need a nonempty ball sample")
    diff_adj = (omega - nu).adjoint()
    flats = np.stack([(diff_adj * xi).flatten() for xi in sample])
    vals = _kernels.spectral_norms(flats, omega.shape.dims_array())
    return float(vals.max())


@dataclass(frozen=True)
class BridgeReport:
    """Bridge quantities for the canonical level-n comparison.

    Height and modular reach vanish by construction; the sampled imprint is a
    lower estimate and is checked against the certificate bound
    (x_n - 1) + 2*beta(n). ``lambda_bound`` is max(beta(n), x_n - 1).
    """

    level: int
    height: float
    basic_reach: float
    modular_reach: float
    imprint_estimate: float
    imprint_bound: float
    lambda_bound: float
    certificate_failures: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.certificate_failures


def imprint_estimate(
    t: BratteliTower,
    beta: BetaSequence,
    I: IdealSupport,
    n: int,
    samples_n: Sequence[Element],
    samples_top: Sequence[Element],
    tol: float = 1e-6,
    include_recovery: bool = True,
) -> BridgeReport:
    """Directed Hausdorff estimate from the sampled top ball to the sampled
    level ball, in operator-norm distance (which dominates the modular
    distance, so the comparison against the bound is conservative).

    With ``include_recovery`` the level sample is augmented by the recovery
    candidates of the top sample; each candidate is membership- and D-checked
    before use, so the estimate remains a genuine sampled lower bound.
    """
    if n < 1:
        raise ValueError("level must be >= 1")
    if len(samples_n) == 0 or len(samples_top) == 0:
        raise ValueError("need nonempty samples")
    xf = xn_factors(beta, n)
    bound = (xf.x - 1.0) + 2.0 * beta[n]
    pool = list(samples_n)
    if include_recovery:
        for b in samples_top:
            _, candidate, _ = _recovery_candidate(t, beta, I, b, n)
            if in_ideal(I, candidate) and d_norm(t, beta, I, candidate) <= 1.0 + 1e-8:
                pool.append(candidate)
    dims = t.level_shapes[t.top_level].dims_array()
    xs = np.stack([b.flatten() for b in samples_top])
    ys = np.stack([c.flatten() for c in pool])
    est = float(_kernels.directed_hausdorff(xs, ys, dims))
    failures = ()
    if est > bound + tol:
        failures = ("imprint_exceeds_bound",)
    return BridgeReport(
        level=n,
        height=0.0,
        basic_reach=beta[n],
        modular_reach=0.0,
        imprint_estimate=est,
        imprint_bound=bound,
        lambda_bound=max(beta[n], xf.x - 1.0),
        certificate_failures=failures,
    )


def fell_surrogate(I: IdealSupport, J: IdealSupport) -> float:
    """Surrogate ideal distance 2^-(first level where the supports disagree).

    Zero when all levels agree. This is an ultrametric detecting level-wise
    eventual agreement; it is a surrogate, not a claimed metrization.
    """
    if I.tower is not J.tower:
        raise ValueError("ideals live on different towers")
    for n, (a, b) in enumerate(zip(I.supports, J.supports)):
        if a != b:
            return 2.0 ** (-n)
    return 0.0


@dataclass(frozen=True)
class ConvergenceRow:
    """One row of the ideal-sequence convergence table."""

    k: int
    n_agree: int  # largest N with agreement at all levels <= N; -1 if none
    level_used: int | None
    beta_n: float | None
    x_n: float | None
    bound: float | None  # 2 * max(beta(N), x_N - 1) at the certificate level
    surrogate: float
    note: str = ""


def fell_to_propinquity_table(
    t: BratteliTower,
    beta: BetaSequence,
    sequence: Sequence[IdealSupport],
    limit: IdealSupport,
) -> list[ConvergenceRow]:
    """Per-index certificate bounds for a sequence of ideals against its limit.

    A row's bound is twice the level bound at the deepest certifiable level of
    agreement (capped at the top usable level of the truncation); rows that do
    not even agree at level 1 are flagged instead of bounded.
    """
    if limit.tower is not t:
        raise ValueError("limit ideal lives on a different tower")
    rows = []
    top_usable = t.top_level - 1
    for k, I in enumerate(sequence):
        if I.tower is not t:
            raise ValueError(f"sequence ideal {k} lives on a different tower")
        n_agree = t.top_level
        for n in range(t.top_level + 1):
            if I.supports[n] != limit.supports[n]:
                n_agree = n - 1
                break
        level_used = min(n_agree, top_usable)
        surrogate = fell_surrogate(I, limit)
        if level_used < 1:
            rows.append(
                ConvergenceRow(
                    k=k,
                    n_agree=n_agree,
                    level_used=None,
                    beta_n=None,
                    x_n=None,
                    bound=None,
                    surrogate=surrogate,
                    note="no agreement level >= 1",
                )
            )
            continue
        xf = xn_factors(beta, level_used)
        rows.append(
            ConvergenceRow(
                k=k,
                n_agree=n_agree,
                level_used=level_used,
                beta_n=beta[level_used],
                x_n=xf.x,
                bound=2.0 * xf.bound,
                surrogate=surrogate,
            )
        )
    return rows
