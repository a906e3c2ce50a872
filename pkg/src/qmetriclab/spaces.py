"""Function-space machinery on finite metric spaces.

Functions are plain complex arrays indexed like the point list. Ideals are
vanishing sets; their unit balls combine a sup-norm cap with Lipschitz caps
on the real and imaginary parts. Distances to such balls are computed by
bisection over a feasibility test: exact interval/Lipschitz propagation for
real data, cyclic projections onto the convex constraint sets for complex
data. Sampled ball quantities are lower bounds; their coverage is not
quantified, and they are reported as estimates only.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels

__all__ = [
    "FiniteMetricSpace",
    "VanishingIdeal",
    "RepairCertificate",
    "RepairPreconditionError",
    "BallDistanceError",
    "BallHausdorffResult",
    "lipschitz_seminorm",
    "d_norm",
    "hausdorff_sets",
    "mcshane_extend",
    "repair",
    "ball_distance",
    "ball_candidates",
    "ball_hausdorff",
]

MEMBERSHIP_TOL = 1e-12
EPS_DIV = 1e-14


class RepairPreconditionError(ValueError):
    """Vanishing sets are too far apart for the requested tolerance."""

    def __init__(self, measured: float, required: float):
        super().__init__(
            f"set Hausdorff distance {measured!r} is not below eps^2 = {required!r}"
        )
        self.measured = measured
        self.required = required


class BallDistanceError(RuntimeError):
    """Feasibility iteration hit its cap while still improving."""

    def __init__(self, bracket: tuple[float, float]):
        super().__init__(
            f"ball distance undecided, best bracket {bracket!r}"
        )
        self.bracket = bracket


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """Labelled points with a symmetric distance matrix.

    The matrix is validated (zero diagonal, symmetry, positivity off the
    diagonal, triangle inequality within 1e-12) and stored symmetrized.
    """

    labels: tuple[str, ...]
    dist: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        if len(labels) == 0:
            raise ValueError("a metric space needs at least one point")
        if len(set(labels)) != len(labels):
            raise ValueError("point labels must be unique")
        d = np.asarray(self.dist, dtype=np.float64)
        n = len(labels)
        if d.shape != (n, n):
            raise ValueError(f"distance matrix must be {n}x{n}, got {d.shape}")
        if np.abs(np.diagonal(d)).max() > 1e-12:
            raise ValueError("distance matrix must have zero diagonal")
        if np.abs(d - d.T).max() > 1e-12:
            raise ValueError("distance matrix must be symmetric")
        d = 0.5 * (d + d.T)
        np.fill_diagonal(d, 0.0)
        off = d[~np.eye(n, dtype=bool)]
        if n > 1 and off.min() <= 0.0:
            raise ValueError("distinct points must have positive distance")
        slack = (d[:, None, :] - d[:, :, None] - d[None, :, :]).max()
        if slack > 1e-12:
            raise ValueError(
                f"triangle inequality violated by {slack!r}"
            )
        d.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dist", d)

    @property
    def size(self) -> int:
        return len(self.labels)

    def indices(self, points: Iterable) -> tuple[int, ...]:
        """Resolve labels or integer indices to a sorted unique index tuple."""
        out = set()
        for p in points:
            if isinstance(p, (int, np.integer)):
                i = int(p)
                if not 0 <= i < self.size:
                    raise ValueError(f"point index {i} out of range")
            else:
                try:
                    i = self.labels.index(str(p))
                except ValueError:
                    raise ValueError(f"unknown point label {p!r}") from None
            out.add(i)
        return tuple(sorted(out))

    def pair_schedule(self):
        """All unordered pairs grouped into vertex-disjoint matchings.

        Returns (pairs, pair_dist, match_ptr); cached per space. The grouping
        lets the projection kernels batch within a matching without changing
        the sequential result.
        """
        cached = self._cache.get("schedule")
        if cached is not None:
            return cached
        n = self.size
        pairs: list[tuple[int, int]] = []
        ptr = [0]
        if n >= 2:
            m = n if n % 2 == 0 else n + 1
            for r in range(m - 1):
                batch = []
                a, b = m - 1, r % (m - 1)
                if a < n and b < n:
                    batch.append((min(a, b), max(a, b)))
                for k in range(1, m // 2):
                    a = (r + k) % (m - 1)
                    b = (r - k) % (m - 1)
                    if a < n and b < n:
                        batch.append((min(a, b), max(a, b)))
                batch.sort()
                pairs.extend(batch)
                ptr.append(len(pairs))
        parr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        pdist = self.dist[parr[:, 0], parr[:, 1]] if len(pairs) else np.zeros(0)
        out = (parr, np.ascontiguousarray(pdist), np.asarray(ptr, dtype=np.int64))
        self._cache["schedule"] = out
        return out

    def to_config(self) -> dict:
        return {"labels": list(self.labels), "dist": self.dist.tolist()}

    @classmethod
    def from_config(cls, data: dict) -> "FiniteMetricSpace":
        return cls(tuple(data["labels"]), np.asarray(data["dist"], dtype=np.float64))


def load_space(path) -> FiniteMetricSpace:
    with open(path, "r", encoding="utf-8") as fh:
        return FiniteMetricSpace.from_config(json.load(fh))


def lipschitz_seminorm(space: FiniteMetricSpace, values: np.ndarray) -> float:
    """Best Lipschitz constant: max over point pairs of |f(x)-f(y)| / d(x,y)."""
    f = np.asarray(values)
    if f.shape != (space.size,):
        raise ValueError("need one value per point")
    if space.size < 2:
        return 0.0
    iu, ju = np.triu_indices(space.size, k=1)
    quot = np.abs(f[iu] - f[ju]) / space.dist[iu, ju]
    return float(quot.max())


@dataclass(frozen=True)
class VanishingIdeal:
    """Functions vanishing on a fixed set of points (possibly empty or all)."""

    space: FiniteMetricSpace
    points: frozenset[int]

    def __post_init__(self):
        pts = frozenset(int(i) for i in self.points)
        bad = [i for i in pts if not 0 <= i < self.space.size]
        if bad:
            raise ValueError(f"point indices {bad} out of range")
        object.__setattr__(self, "points", pts)

    def contains(self, f: np.ndarray, tol: float = MEMBERSHIP_TOL) -> bool:
        f = np.asarray(f)
        if not self.points:
            return True
        return float(np.abs(f[sorted(self.points)]).max()) <= tol


def _check_membership(space, zero_set, f):
    zs = space.indices(zero_set)
    if zs and np.abs(f[list(zs)]).max() > MEMBERSHIP_TOL:
        raise ValueError("function does not vanish on the ideal's zero set")
    return zs


def d_norm(space: FiniteMetricSpace, zero_set: Iterable, f: np.ndarray) -> float:
    """Ideal norm: max of the sup norm and the Lipschitz constants of the
    real and imaginary parts."""
    f = np.asarray(f, dtype=np.complex128)
    _check_membership(space, zero_set, f)
    return max(
        float(np.abs(f).max()),
        lipschitz_seminorm(space, f.real),
        lipschitz_seminorm(space, f.imag),
    )


def hausdorff_sets(space: FiniteMetricSpace, F: Iterable, G: Iterable) -> float:
    """Hausdorff distance between two nonempty point subsets."""
    fi = list(space.indices(F))
    gi = list(space.indices(G))
    if not fi or not gi:
        raise ValueError("Hausdorff distance needs nonempty subsets")
    d = space.dist
    d_fg = d[np.ix_(fi, gi)]
    return float(max(d_fg.min(axis=1).max(), d_fg.min(axis=0).max()))


def mcshane_extend(
    space: FiniteMetricSpace,
    S: Iterable,
    values_S: np.ndarray,
    lip_bound: float,
    clamp: tuple[float, float],
) -> np.ndarray:
    """Extend real values from a subset with the same Lipschitz constant,
    clamped to a window containing the given values (which preserves both the
    constant and the norm). Values on the subset are returned verbatim."""
    si = space.indices(S)
    vals = np.asarray(values_S, dtype=np.float64)
    if len(si) == 0:
        raise ValueError("extension needs a nonempty subset")
    if vals.shape != (len(si),):
        raise ValueError("need one value per subset point (sorted index order)")
    if lip_bound < 0:
        raise ValueError("Lipschitz bound must be nonnegative")
    lo, hi = float(clamp[0]), float(clamp[1])
    if lo > hi:
        raise ValueError("empty clamp window")
    if lo > vals.min() or hi < vals.max():
        raise ValueError("clamp window must contain the subset values")
    sub = space.dist[np.ix_(si, si)]
    if len(si) > 1:
        iu, ju = np.triu_indices(len(si), k=1)
        excess = np.abs(vals[iu] - vals[ju]) - lip_bound * sub[iu, ju]
        worst = float(excess.max())
        if worst > 1e-12 * max(1.0, lip_bound, np.abs(vals).max()):
            raise ValueError(
                f"subset values exceed the Lipschitz bound by {worst!r}"
            )
    g = (vals[None, :] + lip_bound * space.dist[:, list(si)]).min(axis=1)
    np.clip(g, lo, hi, out=g)
    g[list(si)] = vals
    return g


@dataclass(frozen=True)
class RepairCertificate:
    """The five checks of a repaired ball element, plus the measured distance."""

    eps: float
    vanish_violation: float  # max |h| on the union of both zero sets
    lip_re: float
    lip_im: float
    sup_norm: float
    dist_to_input: float  # sup norm of f - h
    bound: float  # 8 * eps
    tolerance: float
    note: str = ""

    @property
    def checks(self) -> dict:
        t = self.tolerance
        return {
            "vanishes": self.vanish_violation <= t,
            "lip_re": self.lip_re <= 1.0 + t,
            "lip_im": self.lip_im <= 1.0 + t,
            "sup_norm": self.sup_norm <= 1.0 + t,
            "dist": self.dist_to_input <= self.bound + t,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def ratio(self) -> float:
        return self.dist_to_input / self.eps

    def to_dict(self) -> dict:
        out = {
            "eps": self.eps,
            "vanish_violation": self.vanish_violation,
            "lip_re": self.lip_re,
            "lip_im": self.lip_im,
            "sup_norm": self.sup_norm,
            "dist_to_input": self.dist_to_input,
            "bound": self.bound,
            "checks": self.checks,
            "ratio": self.ratio,
            "passed": self.passed,
        }
        if self.note:
            out["note"] = self.note
        return out


def repair(
    space: FiniteMetricSpace,
    near_set: Iterable,
    limit_set: Iterable,
    f: np.ndarray,
    eps: float,
    tol: float = 1e-9,
) -> tuple[np.ndarray, RepairCertificate]:
    """Move a unit-ball element vanishing on one set to one vanishing on both
    sets, within 8*eps in sup norm.

    The construction scales the input down by 1/(1+eps), kills it on an eps
    neighbourhood of the union of the two zero sets, extends both real parts
    back with Lipschitz constant 1 and clamped norm, and finally rescales
    radially onto the unit sup-ball (the componentwise extensions alone can
    overshoot the complex sup norm when the real and imaginary extrema sit at
    different points).

    Requires the set Hausdorff distance to be strictly below eps^2.
    """
    f = np.asarray(f, dtype=np.complex128)
    near = _check_membership(space, near_set, f)
    limit = space.indices(limit_set)
    if not near or not limit:
        raise ValueError("repair needs nonempty zero sets")
    df = d_norm(space, near, f)
    if df > 1.0 + 1e-9:
        raise ValueError(f"input must be in the unit ball, got D = {df!r}")
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    note = ""
    if eps >= 1.0:
        eps = 1.0 - 1e-9
        note = "eps_clamped_below_one"
    measured = hausdorff_sets(space, near, limit)
    if not measured < eps * eps:
        raise RepairPreconditionError(measured, eps * eps)

    union = sorted(set(near) | set(limit))
    d_union = space.dist[:, union].min(axis=1)
    inside = d_union < eps  # the eps neighbourhood of the union
    domain = sorted(set(union) | set(np.nonzero(~inside)[0].tolist()))
    in_union = np.zeros(space.size, dtype=bool)
    in_union[union] = True

    scale = 1.0 / (1.0 + eps)
    fr, fi = f.real, f.imag
    mr = float(np.abs(fr).max())
    mi = float(np.abs(fi).max())
    vals_re = np.array([0.0 if in_union[i] else scale * fr[i] for i in domain])
    vals_im = np.array([0.0 if in_union[i] else scale * fi[i] for i in domain])
    g1 = mcshane_extend(space, domain, vals_re, 1.0, (-mr, mr))
    g2 = mcshane_extend(space, domain, vals_im, 1.0, (-mi, mi))
    h = g1 + 1j * g2
    overshoot = float(np.abs(h).max())
    if overshoot > 1.0:
        h = h / overshoot

    cert = RepairCertificate(
        eps=eps,
        vanish_violation=float(np.abs(h[union]).max()),
        lip_re=lipschitz_seminorm(space, h.real),
        lip_im=lipschitz_seminorm(space, h.imag),
        sup_norm=float(np.abs(h).max()),
        dist_to_input=float(np.abs(f - h).max()),
        bound=8.0 * eps,
        tolerance=tol,
        note=note,
    )
    return h, cert


def _ball_violation(space, zero_idx, f) -> float:
    viol = 0.0
    if len(zero_idx):
        viol = max(viol, float(np.abs(f[list(zero_idx)]).max()))
    viol = max(viol, max(lipschitz_seminorm(space, f.real) - 1.0, 0.0))
    viol = max(viol, max(lipschitz_seminorm(space, f.imag) - 1.0, 0.0))
    viol = max(viol, max(float(np.abs(f).max()) - 1.0, 0.0))
    return viol


def _real_feasible(space, zero_idx, fr, t) -> bool:
    lb = np.maximum(-1.0, fr - t)
    ub = np.minimum(1.0, fr + t)
    for i in zero_idx:
        if abs(fr[i]) > t:
            return False
        lb[i] = 0.0
        ub[i] = 0.0
    # a 1-Lipschitz function between the bounds exists iff lb_i <= ub_j + d_ij
    gap = lb[:, None] - ub[None, :] - space.dist
    return float(gap.max()) <= 0.0


def _pocs_feasible(space, zero_idx, f, t, tol):
    pairs, pdist, ptr = space.pair_schedule()
    h0 = f.copy()
    feas_tol = max(1e-12, 0.01 * tol)
    _, viol, _, code = _kernels.ball_feasibility(
        h0,
        f,
        pairs,
        pdist,
        ptr,
        np.asarray(zero_idx, dtype=np.int64),
        float(t),
        max_sweeps=60000,
        feas_tol=feas_tol,
        stall_window=400,
        stall_rtol=1e-4,
    )
    if code == 2:
        return None  # undecided
    return code == 0


def ball_distance(
    space: FiniteMetricSpace, zero_set: Iterable, f: np.ndarray, tol: float
) -> float:
    """Sup-norm distance from a function to the ideal's unit ball, within tol.

    Bisection on the radius t of {h in ball : |f-h| <= t}: the real case uses
    an exact interval/Lipschitz propagation, the complex case cyclic
    projections onto the constraint sets with a stall detector.
    """
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    f = np.asarray(f, dtype=np.complex128)
    if f.shape != (space.size,):
        raise ValueError("need one value per point")
    zero_idx = space.indices(zero_set)
    if _ball_violation(space, zero_idx, f) <= MEMBERSHIP_TOL:
        return 0.0
    if len(zero_idx) == space.size:
        return float(np.abs(f).max())  # the ball is {0}
    lo = 0.0
    hi = float(np.abs(f).max())  # h = 0 is always in the ball
    if hi <= tol:
        return hi
    is_real = bool(np.all(f.imag == 0.0))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_real:
            ok = _real_feasible(space, zero_idx, f.real, mid)
        else:
            ok = _pocs_feasible(space, zero_idx, f, mid, tol)
            if ok is None:
                raise BallDistanceError((lo, hi))
        if ok:
            hi = mid
        else:
            lo = mid
    return hi


def ball_candidates(
    space: FiniteMetricSpace, zero_set: Iterable, count: int, seed: int
) -> list[np.ndarray]:
    """Deterministic unit-ball members used for sampled Hausdorff estimates.

    The fixed prefix holds 0 and the four signed copies of the capped
    distance cone of the zero set (the extreme rays the two-point oracle
    needs); the rest are rescaled Gaussian draws, alternating real and
    complex so both feasibility paths get exercised.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    zero_idx = list(space.indices(zero_set))
    if not zero_idx:
        raise ValueError("candidates need a nonempty zero set")
    rng = np.random.default_rng(seed)
    n = space.size
    cone = np.minimum(space.dist[:, zero_idx].min(axis=1), 1.0)
    det = [
        np.zeros(n, dtype=np.complex128),
        cone.astype(np.complex128),
        (-cone).astype(np.complex128),
        1j * cone,
        -1j * cone,
    ]
    out = []
    k = 0
    while len(out) < count:
        if k < len(det):
            out.append(det[k])
        else:
            v = rng.standard_normal(n).astype(np.complex128)
            if k % 2 == 1:
                v = v + 1j * rng.standard_normal(n)
            v[zero_idx] = 0.0
            dv = max(
                float(np.abs(v).max()),
                lipschitz_seminorm(space, v.real),
                lipschitz_seminorm(space, v.imag),
            )
            out.append(v / max(dv, EPS_DIV))
        k += 1
    return out


@dataclass(frozen=True)
class BallHausdorffResult:
    estimate: float  # sampled, a lower bound of the true ball Hausdorff
    paper_bound: float  # min(1, 8 * eps_star)
    set_hausdorff: float
    eps_star: float
    directed: tuple[float, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.estimate <= self.paper_bound + self.tolerance


def ball_hausdorff(
    space: FiniteMetricSpace,
    F1: Iterable,
    F2: Iterable,
    sample_count: int,
    seed: int,
    tol: float,
) -> BallHausdorffResult:
    """Sampled symmetric Hausdorff estimate between two ideal unit balls,
    compared against the bound 8*eps with eps just above sqrt of the set
    Hausdorff distance (clamped at 1, since 0 is in both balls and members
    have sup norm at most 1)."""
    f1 = space.indices(F1)
    f2 = space.indices(F2)
    if not f1 or not f2:
        raise ValueError("ball Hausdorff needs nonempty zero sets")
    H = hausdorff_sets(space, f1, f2)
    if H == 0.0:
        eps_star = 0.0
        bound = 0.0
    else:
        eps_star = np.sqrt(H) * (1.0 + 1e-6)  # strictness guard: H < eps_star^2
        bound = min(1.0, 8.0 * eps_star)
    d12 = 0.0
    for g in ball_candidates(space, f1, sample_count, seed):
        d12 = max(d12, ball_distance(space, f2, g, tol))
    d21 = 0.0
    for g in ball_candidates(space, f2, sample_count, seed + 1):
        d21 = max(d21, ball_distance(space, f1, g, tol))
    return BallHausdorffResult(
        estimate=max(d12, d21),
        paper_bound=float(bound),
        set_hausdorff=H,
        eps_star=float(eps_star),
        directed=(d12, d21),
        tolerance=tol,
    )
