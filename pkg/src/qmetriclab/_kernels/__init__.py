"""Hot numerical kernels with a compiled core and a pure-numpy fallback.

The compiled extension (``qmetriclab._kernels._core``, Cython + LAPACK) is
preferred; when it is missing, or when the environment variable
``QMETRICLAB_PURE`` is set to a non-empty value, the numpy implementation in
``qmetriclab._kernels.fallback`` is used. Both expose the same contract:

``spectral_norm(flat, dims) -> float``
    Operator norm of one block-diagonal element given as the row-major
    concatenation of its blocks (``dims`` holds the block sizes).

``spectral_norms(flats, dims) -> (N,) float64``
    Row-wise operator norms of a stack of flattened elements.

``directed_hausdorff(xs, ys, dims) -> float``
    max over rows x of ``xs`` of the min over rows y of ``ys`` of the
    operator norm of x - y.

``ball_feasibility(h, f, pairs, pair_dist, match_ptr, zero_idx, t,
                   max_sweeps, feas_tol, stall_window, stall_rtol)
                   -> (h, violation, sweeps, code)``
    Cyclic projections onto the constraint sets of the Lipschitz unit ball
    intersected with a sup-norm ball of radius ``t`` around ``f``
    (``t = inf`` disables that constraint). Pair constraints are processed
    in the given order; ``match_ptr`` partitions them into vertex-disjoint
    matchings so both implementations produce identical iterates.
    ``code`` is 0 when the final violation is at most ``feas_tol``
    (feasible point found), 1 when progress stalled (treated as infeasible),
    2 when the sweep cap was hit while still improving.
"""
import os

from . import fallback

if os.environ.get("QMETRICLAB_PURE"):
    _impl = fallback
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = fallback

USING_COMPILED = _impl is not fallback

spectral_norm = _impl.spectral_norm
spectral_norms = _impl.spectral_norms
directed_hausdorff = _impl.directed_hausdorff
ball_feasibility = _impl.ball_feasibility
