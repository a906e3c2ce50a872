"""Block-diagonal complex matrix algebra: elements, traces, norms.

An element of a multi-matrix algebra is a tuple of square complex blocks,
one per summand. All operations are pure functions of immutable values;
comparisons go through explicit tolerances (never bitwise equality).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels

__all__ = [
    "BlockShape",
    "Element",
    "TraceWeights",
    "zeros",
    "identity",
    "from_flat",
    "random_element",
    "op_norm",
    "trace_state",
    "gns_inner",
    "re_im_parts",
    "jordan_lie",
    "element_to_dict",
    "element_from_dict",
    "load_element",
    "dump_element",
]

#: norm tolerance under which two elements count as equal
EQ_TOL = 1e-12

#: tolerance for the trace-weight normalization sum(w_i * d_i) = 1
TRACE_NORM_TOL = 1e-12


@dataclass(frozen=True)
class BlockShape:
    """Ordered sizes of the square blocks of a multi-matrix algebra."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) == 0:
            raise ValueError("BlockShape needs at least one block")
        if any(d < 1 for d in dims):
            raise ValueError(f"block sizes must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def n_blocks(self) -> int:
        return len(self.dims)

    @property
    def flat_size(self) -> int:
        """Number of complex entries when blocks are concatenated row-major."""
        return sum(d * d for d in self.dims)

    def dims_array(self) -> np.ndarray:
        return np.asarray(self.dims, dtype=np.int64)


def _freeze(block: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(block, dtype=np.complex128)
    if out is block:
        out = out.copy()
    out.setflags(write=False)
    return out


class Element:
    """One member of a multi-matrix algebra: a square complex matrix per block."""

    __slots__ = ("shape", "blocks")

    def __init__(self, shape: BlockShape, blocks: Sequence[np.ndarray]):
        blocks = tuple(blocks)
        if len(blocks) != shape.n_blocks:
            raise ValueError(
                f"expected {shape.n_blocks} blocks, got {len(blocks)}"
            )
        frozen = []
        for d, b in zip(shape.dims, blocks):
            b = np.asarray(b)
            if b.shape != (d, d):
                raise ValueError(f"block of shape {b.shape} does not match size {d}")
            frozen.append(_freeze(b))
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "blocks", tuple(frozen))

    @classmethod
    def _wrap(cls, shape: BlockShape, blocks: tuple[np.ndarray, ...]) -> "Element":
        """Trusted constructor: blocks already complex128, correctly sized, owned."""
        self = object.__new__(cls)
        for b in blocks:
            b.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "blocks", blocks)
        return self

    def __setattr__(self, name, value):
        raise AttributeError("Element is immutable")

    # -- arithmetic ---------------------------------------------------------

    def _check_shape(self, other: "Element"):
        if self.shape.dims != other.shape.dims:
            raise ValueError(
                f"shape mismatch: {self.shape.dims} vs {other.shape.dims}"
            )

    def __add__(self, other: "Element") -> "Element":
        if not isinstance(other, Element):
            return NotImplemented
        self._check_shape(other)
        return Element._wrap(
            self.shape, tuple(a + b for a, b in zip(self.blocks, other.blocks))
        )

    def __sub__(self, other: "Element") -> "Element":
        if not isinstance(other, Element):
            return NotImplemented
        self._check_shape(other)
        return Element._wrap(
            self.shape, tuple(a - b for a, b in zip(self.blocks, other.blocks))
        )

    def __neg__(self) -> "Element":
        return Element._wrap(self.shape, tuple(-a for a in self.blocks))

    def __mul__(self, other):
        if isinstance(other, Element):
            self._check_shape(other)
            return Element._wrap(
                self.shape, tuple(a @ b for a, b in zip(self.blocks, other.blocks))
            )
        if np.isscalar(other):
            c = complex(other)
            return Element._wrap(self.shape, tuple(c * a for a in self.blocks))
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            c = complex(other)
            return Element._wrap(self.shape, tuple(c * a for a in self.blocks))
        return NotImplemented

    def __truediv__(self, other):
        if np.isscalar(other):
            return self * (1.0 / complex(other))
        return NotImplemented

    def adjoint(self) -> "Element":
        """Blockwise conjugate transpose."""
        return Element._wrap(
            self.shape, tuple(np.conj(a.T).copy() for a in self.blocks)
        )

    # -- geometry -----------------------------------------------------------

    def norm(self) -> float:
        """Operator norm: max over blocks of the largest singular value."""
        return op_norm(self)

    def isclose(self, other: "Element", tol: float = EQ_TOL) -> bool:
        """Norm-distance equality (never bitwise)."""
        self._check_shape(other)
        return op_norm(self - other) <= tol

    def is_selfadjoint(self, tol: float = EQ_TOL) -> bool:
        return self.isclose(self.adjoint(), tol)

    def flatten(self) -> np.ndarray:
        """Concatenate blocks row-major into one complex vector."""
        return np.concatenate([b.ravel() for b in self.blocks])

    def __repr__(self):
        return f"Element(dims={self.shape.dims})"


def zeros(shape: BlockShape) -> Element:
    return Element._wrap(
        shape, tuple(np.zeros((d, d), dtype=np.complex128) for d in shape.dims)
    )


def identity(shape: BlockShape) -> Element:
    return Element._wrap(
        shape, tuple(np.eye(d, dtype=np.complex128) for d in shape.dims)
    )


def from_flat(shape: BlockShape, flat: np.ndarray) -> Element:
    """Inverse of Element.flatten."""
    flat = np.asarray(flat, dtype=np.complex128)
    if flat.shape != (shape.flat_size,):
        raise ValueError(f"flat vector of size {flat.shape} does not match {shape}")
    blocks = []
    off = 0
    for d in shape.dims:
        blocks.append(flat[off : off + d * d].reshape(d, d).copy())
        off += d * d
    return Element._wrap(shape, tuple(blocks))


def random_element(
    shape: BlockShape, rng: np.random.Generator, scale: float = 1.0
) -> Element:
    """Gaussian-entry element (independent standard normal real/imag parts)."""
    blocks = []
    for d in shape.dims:
        b = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        blocks.append(scale * b)
    return Element._wrap(shape, tuple(np.ascontiguousarray(b) for b in blocks))


def op_norm(a: Element) -> float:
    """Largest singular value over all blocks; zero iff a = 0."""
    return float(
        _kernels.spectral_norm(a.flatten(), a.shape.dims_array())
    )


@dataclass(frozen=True)
class TraceWeights:
    """Strictly positive block weights of a faithful tracial state.

    Normalized so the weighted trace of the identity is 1.
    """

    shape: BlockShape
    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if len(w) != self.shape.n_blocks:
            raise ValueError("one weight per block required")
        if any(x <= 0.0 for x in w):
            raise ValueError(f"trace weights must be > 0, got {w}")
        total = sum(wi * d for wi, d in zip(w, self.shape.dims))
        if abs(total - 1.0) > TRACE_NORM_TOL:
            raise ValueError(
                f"trace weights must satisfy sum(w_i*d_i) = 1, got {total!r}"
            )
        object.__setattr__(self, "weights", w)

    def weights_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)


def trace_state(tau: TraceWeights, a: Element) -> complex:
    """Weighted sum of block traces."""
    if tau.shape.dims != a.shape.dims:
        raise ValueError("trace weights do not match element shape")
    return complex(
        sum(w * np.trace(b) for w, b in zip(tau.weights, a.blocks))
    )


def gns_inner(tau: TraceWeights, a: Element, b: Element) -> complex:
    """Sesquilinear inner product tau(b* a); positive definite for faithful tau."""
    if tau.shape.dims != a.shape.dims or tau.shape.dims != b.shape.dims:
        raise ValueError("shape mismatch in inner product")
    total = 0.0 + 0.0j
    for w, ab, bb in zip(tau.weights, a.blocks, b.blocks):
        total += w * np.vdot(bb, ab)  # vdot conjugates its first argument
    return complex(total)


def re_im_parts(a: Element) -> tuple[Element, Element]:
    """Split a = x + i*y with x, y self-adjoint (bitwise Hermitian blocks)."""
    re_blocks = []
    im_blocks = []
    for b in a.blocks:
        bh = np.conj(b.T)
        re_blocks.append(0.5 * (b + bh))
        # multiply by -0.5j instead of dividing by 2j: exact scaling keeps
        # the result bitwise Hermitian
        im_blocks.append((b - bh) * -0.5j)
    re = Element._wrap(a.shape, tuple(np.ascontiguousarray(x) for x in re_blocks))
    im = Element._wrap(a.shape, tuple(np.ascontiguousarray(x) for x in im_blocks))
    return re, im


def jordan_lie(a: Element, b: Element) -> tuple[Element, Element]:
    """Jordan product (ab+ba)/2 and Lie product (ab-ba)/(2i)."""
    a._check_shape(b)
    jordan = []
    lie = []
    for x, y in zip(a.blocks, b.blocks):
        xy = x @ y
        yx = y @ x
        jordan.append(0.5 * (xy + yx))
        lie.append((xy - yx) * -0.5j)
    return (
        Element._wrap(a.shape, tuple(np.ascontiguousarray(z) for z in jordan)),
        Element._wrap(a.shape, tuple(np.ascontiguousarray(z) for z in lie)),
    )


# -- JSON wire format --------------------------------------------------------
#
# {"dims": [...], "blocks": [[[re, im], ...], ...]} with each block a
# row-major list of [re, im] pairs.


def element_to_dict(a: Element) -> dict:
    return {
        "dims": list(a.shape.dims),
        "blocks": [
            [[float(z.real), float(z.imag)] for z in b.ravel()] for b in a.blocks
        ],
    }


def element_from_dict(data: dict) -> Element:
    shape = BlockShape(tuple(data["dims"]))
    blocks = []
    for d, entries in zip(shape.dims, data["blocks"]):
        if len(entries) != d * d:
            raise ValueError(f"block for size {d} has {len(entries)} entries")
        flat = np.array([complex(re, im) for re, im in entries], dtype=np.complex128)
        blocks.append(flat.reshape(d, d))
    return Element(shape, blocks)


def dump_element(a: Element, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(element_to_dict(a), fh)


def load_element(path) -> Element:
    with open(path, "r", encoding="utf-8") as fh:
        return element_from_dict(json.load(fh))
