"""Truncated towers of multi-matrix algebras.

A tower records block shapes per level, integer multiplicity matrices between
consecutive levels, and trace weights at the top. Level 0 is the scalars.
Embeddings stack copies of source blocks lexicographically by (source block,
copy index), which fixes every derived object bit-for-bit. Trace-compatible
conditional expectations onto each level are orthogonal projections in the
weighted trace inner product, computed from a cached orthonormal basis.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

import numpy as np

from .elements import BlockShape, Element, TraceWeights, from_flat

__all__ = [
    "BratteliTower",
    "BetaSequence",
    "ValidationReport",
    "InvalidTowerError",
    "validate_tower",
    "embed",
    "induced_traces",
    "conditional_expectation",
    "tower_from_config",
    "tower_to_config",
]


class InvalidTowerError(ValueError):
    pass


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def lines(self) -> list[str]:
        return [
            f"[{'ok' if c.passed else 'FAIL'}] {c.name}"
            + (f": {c.detail}" if c.detail else "")
            for c in self.checks
        ]


@dataclass(frozen=True, eq=False)
class BratteliTower:
    """Levels 0..M of block shapes, with multiplicities and a top trace.

    ``mults[n][j, i]`` is the multiplicity of level-n block i inside
    level-(n+1) block j. Instances are immutable after construction; the
    projection bases used by the conditional expectations are built lazily
    under a lock and shared read-only afterwards.
    """

    level_shapes: tuple[BlockShape, ...]
    mults: tuple[np.ndarray, ...]
    top_trace: TraceWeights
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        shapes = tuple(
            s if isinstance(s, BlockShape) else BlockShape(tuple(s))
            for s in self.level_shapes
        )
        if len(shapes) < 1:
            raise ValueError("tower needs at least one level")
        mults = tuple(
            np.ascontiguousarray(m, dtype=np.int64) for m in self.mults
        )
        if len(mults) != len(shapes) - 1:
            raise ValueError(
                f"need {len(shapes) - 1} multiplicity matrices, got {len(mults)}"
            )
        for m in mults:
            m.setflags(write=False)
        object.__setattr__(self, "level_shapes", shapes)
        object.__setattr__(self, "mults", mults)

    # -- structure ----------------------------------------------------------

    @property
    def top_level(self) -> int:
        return len(self.level_shapes) - 1

    def shape_at(self, n: int) -> BlockShape:
        return self.level_shapes[n]

    def validate(self) -> ValidationReport:
        checks: list[Check] = []
        shapes = self.level_shapes
        checks.append(
            Check(
                "level0_scalars",
                shapes[0].dims == (1,),
                f"level 0 must be the scalars [1], got {list(shapes[0].dims)}",
            )
        )
        for n, m in enumerate(self.mults):
            cur = shapes[n].dims
            nxt = shapes[n + 1].dims
            shape_ok = m.shape == (len(nxt), len(cur))
            checks.append(
                Check(
                    f"mult_shape[{n}]",
                    shape_ok,
                    f"expected {(len(nxt), len(cur))}, got {m.shape}",
                )
            )
            if not shape_ok:
                continue
            nonneg = bool((m >= 0).all())
            checks.append(
                Check(f"mult_nonneg[{n}]", nonneg, "negative multiplicity")
            )
            expected = m @ np.asarray(cur, dtype=np.int64)
            unital = bool((expected == np.asarray(nxt, dtype=np.int64)).all())
            bad = [
                j
                for j, (e, d) in enumerate(zip(expected, nxt))
                if e != d
            ]
            checks.append(
                Check(
                    f"unitality[{n}]",
                    unital,
                    f"target blocks {bad} have dim != sum(mult*dim)" if bad else "",
                )
            )
            dead = [i for i in range(len(cur)) if not (m[:, i] > 0).any()]
            checks.append(
                Check(
                    f"no_dead_block[{n}]",
                    not dead,
                    f"level-{n} blocks {dead} reach nothing at level {n + 1}",
                )
            )
        checks.append(
            Check(
                "top_trace_shape",
                self.top_trace.shape.dims == shapes[-1].dims,
                "top trace weights must live on the top level",
            )
        )
        checks.append(
            Check(
                "top_trace_positive",
                all(w > 0 for w in self.top_trace.weights),
                "",
            )
        )
        return ValidationReport(tuple(checks))

    def require_valid(self) -> None:
        ok = self._cache.get("valid")
        if ok is None:
            report = self.validate()
            ok = report.passed
            with self._lock:
                self._cache["valid"] = ok
                self._cache["validation"] = report
        if not ok:
            report = self._cache["validation"]
            raise InvalidTowerError(
                "invalid tower: " + "; ".join(c.name for c in report.failures())
            )

    # -- embeddings ---------------------------------------------------------

    def embed(self, n: int, a: Element) -> Element:
        """Include a level-n element into level n+1 by block-diagonal stacking."""
        self.require_valid()
        if not 0 <= n < self.top_level:
            raise ValueError(f"no embedding from level {n}")
        if a.shape.dims != self.level_shapes[n].dims:
            raise ValueError("element does not live at the requested level")
        m = self.mults[n]
        out_blocks = []
        for j, dj in enumerate(self.level_shapes[n + 1].dims):
            block = np.zeros((dj, dj), dtype=np.complex128)
            off = 0
            for i, di in enumerate(self.level_shapes[n].dims):
                for _ in range(int(m[j, i])):
                    block[off : off + di, off : off + di] = a.blocks[i]
                    off += di
            out_blocks.append(block)
        return Element._wrap(self.level_shapes[n + 1], tuple(out_blocks))

    def embed_to(self, n: int, m: int, a: Element) -> Element:
        """Include a level-n element into level m >= n."""
        if m < n:
            raise ValueError("target level is below the source level")
        cur = a
        for k in range(n, m):
            cur = self.embed(k, cur)
        return cur

    def embed_to_top(self, n: int, a: Element) -> Element:
        return self.embed_to(n, self.top_level, a)

    # -- traces -------------------------------------------------------------

    def level_traces(self) -> tuple[TraceWeights, ...]:
        """Trace weights at every level, derived from the top weights."""
        cached = self._cache.get("traces")
        if cached is not None:
            return cached
        self.require_valid()
        weights = [None] * (self.top_level + 1)
        weights[self.top_level] = self.top_trace
        w = np.asarray(self.top_trace.weights, dtype=np.float64)
        for n in range(self.top_level - 1, -1, -1):
            w = self.mults[n].T.astype(np.float64) @ w
            weights[n] = TraceWeights(self.level_shapes[n], tuple(w))
        out = tuple(weights)
        with self._lock:
            self._cache.setdefault("traces", out)
        return self._cache["traces"]

    # -- conditional expectations --------------------------------------------

    def _projection_basis(self, n: int):
        """Orthonormal basis data for the embedded level-n algebra at the top.

        Returns (Q, Qun, P, sqrtw): Q holds orthonormal rows in sqrt-weight
        scaled top coordinates, Qun the same rows unscaled (top images), P the
        matching preimages in level-n coordinates.
        """
        key = ("basis", n)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        self.require_valid()
        top_shape = self.level_shapes[self.top_level]
        sqrtw = np.concatenate(
            [
                np.full(d * d, np.sqrt(w))
                for d, w in zip(top_shape.dims, self.top_trace.weights)
            ]
        )
        dims_n = self.level_shapes[n].dims
        size_n = self.level_shapes[n].flat_size
        rows = []
        pre = []
        pos = 0
        for i, d in enumerate(dims_n):
            for k in range(d):
                for l in range(d):
                    unit_blocks = [
                        np.zeros((dd, dd), dtype=np.complex128) for dd in dims_n
                    ]
                    unit_blocks[i][k, l] = 1.0
                    unit = Element._wrap(self.level_shapes[n], tuple(unit_blocks))
                    top = self.embed_to_top(n, unit)
                    rows.append(top.flatten() * sqrtw)
                    p = np.zeros(size_n, dtype=np.complex128)
                    p[pos] = 1.0
                    pre.append(p)
                    pos += 1
        B = np.array(rows)
        P = np.array(pre)
        # modified Gram-Schmidt with one re-orthogonalization pass; the same
        # row operations are applied to the preimages so they stay exact
        # preimages of the orthonormalized top rows
        for k in range(B.shape[0]):
            for _ in range(2):
                for j in range(k):
                    c = np.vdot(B[j], B[k])
                    B[k] -= c * B[j]
                    P[k] -= c * P[j]
            r = np.linalg.norm(B[k])
            if r <= 1e-14:
                raise InvalidTowerError(
                    f"embedded level-{n} basis is numerically degenerate"
                )
            B[k] /= r
            P[k] /= r
        Qun = B / sqrtw[None, :]
        out = (B, Qun, P, sqrtw)
        with self._lock:
            self._cache.setdefault(key, out)
        return self._cache[key]

    def expectation_coeffs(self, n: int, x: Element) -> np.ndarray:
        Q, _, _, sqrtw = self._projection_basis(n)
        xs = x.flatten() * sqrtw
        return Q.conj() @ xs

    def expectation(self, n: int, x: Element) -> Element:
        """Trace-compatible conditional expectation of a top element onto level n."""
        if not 0 <= n <= self.top_level:
            raise ValueError(f"level {n} out of range")
        if x.shape.dims != self.level_shapes[self.top_level].dims:
            raise ValueError("expectation expects a top-level element")
        if n == self.top_level:
            return x
        _, _, P, _ = self._projection_basis(n)
        c = self.expectation_coeffs(n, x)
        flat = c @ P
        return from_flat(self.level_shapes[n], flat)

    def expectation_top(self, n: int, x: Element) -> Element:
        """Same projection, returned as an embedded top-level element."""
        if not 0 <= n <= self.top_level:
            raise ValueError(f"level {n} out of range")
        if n == self.top_level:
            return x
        _, Qun, _, _ = self._projection_basis(n)
        c = self.expectation_coeffs(n, x)
        flat = c @ Qun
        return from_flat(self.level_shapes[self.top_level], flat)


def validate_tower(t: BratteliTower) -> ValidationReport:
    return t.validate()


def embed(t: BratteliTower, n: int, a: Element) -> Element:
    return t.embed(n, a)


def induced_traces(t: BratteliTower) -> tuple[TraceWeights, ...]:
    return t.level_traces()


def conditional_expectation(t: BratteliTower, n: int, x: Element) -> Element:
    return t.expectation(n, x)


@dataclass(frozen=True)
class BetaSequence:
    """Strictly positive level weights, one per level below the top.

    The ratio profile beta(n)/beta(n-1) is recorded for inspection; a finite
    prefix cannot certify a limit, so no convergence verdict is attached.
    """

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) == 0:
            raise ValueError("empty level-weight sequence")
        if any(v <= 0 for v in vals):
            raise ValueError(f"level weights must be > 0, got {vals}")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, n: int) -> float:
        return self.values[n]

    @property
    def ratio_report(self) -> dict:
        ratios = [
            self.values[n] / self.values[n - 1] for n in range(1, len(self.values))
        ]
        return {
            "ratios": ratios,
            "all_below_one": all(r < 1.0 for r in ratios),
            "nonincreasing": all(
                ratios[k + 1] <= ratios[k] + 1e-15 for k in range(len(ratios) - 1)
            ),
        }

    @classmethod
    def reciprocal_factorials(cls, count: int) -> "BetaSequence":
        """The default weights 1/n! (so the first two entries are both 1)."""
        vals = []
        f = 1.0
        for n in range(count):
            if n > 0:
                f *= n
            vals.append(1.0 / f)
        return cls(tuple(vals))


# -- config wire format -------------------------------------------------------
#
# {"levels": [[1], [2], [4]], "mults": [[[2]], [[2]]],
#  "top_trace": [0.25], "beta": [1.0, 1.0]}


def tower_from_config(data: dict) -> tuple[BratteliTower, BetaSequence | None]:
    levels = [BlockShape(tuple(d)) for d in data["levels"]]
    mults = [np.asarray(m, dtype=np.int64) for m in data["mults"]]
    top = TraceWeights(levels[-1], tuple(data["top_trace"]))
    tower = BratteliTower(tuple(levels), tuple(mults), top)
    beta = None
    if "beta" in data and data["beta"] is not None:
        beta = BetaSequence(tuple(data["beta"]))
    return tower, beta


def tower_to_config(t: BratteliTower, beta: BetaSequence | None = None) -> dict:
    cfg = {
        "levels": [list(s.dims) for s in t.level_shapes],
        "mults": [m.tolist() for m in t.mults],
        "top_trace": list(t.top_trace.weights),
    }
    if beta is not None:
        cfg["beta"] = list(beta.values)
    return cfg


def load_tower(path) -> tuple[BratteliTower, BetaSequence | None]:
    with open(path, "r", encoding="utf-8") as fh:
        return tower_from_config(json.load(fh))
