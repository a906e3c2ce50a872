"""Pure-numpy implementations of the hot kernels.

Semantics match ``qmetriclab._kernels._core``; see the package docstring for
the contract. Batched LAPACK calls through numpy keep this usable when the
compiled extension is unavailable, at some constant-factor cost.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "spectral_norm",
    "spectral_norms",
    "directed_hausdorff",
    "ball_feasibility",
]


def _as_flats(flats: np.ndarray) -> np.ndarray:
    flats = np.asarray(flats, dtype=np.complex128)
    if flats.ndim == 1:
        flats = flats[None, :]
    return flats


def spectral_norms(flats: np.ndarray, dims: np.ndarray) -> np.ndarray:
    flats = _as_flats(flats)
    dims = np.asarray(dims, dtype=np.int64)
    n = flats.shape[0]
    out = np.zeros(n, dtype=np.float64)
    off = 0
    for d in dims:
        d = int(d)
        blk = flats[:, off : off + d * d].reshape(n, d, d)
        if d == 1:
            s = np.abs(blk[:, 0, 0])
        else:
            s = np.linalg.svd(blk, compute_uv=False)[:, 0]
        np.maximum(out, s, out=out)
        off += d * d
    return out


def spectral_norm(flat: np.ndarray, dims: np.ndarray) -> float:
    return float(spectral_norms(flat, dims)[0])


def directed_hausdorff(xs: np.ndarray, ys: np.ndarray, dims: np.ndarray) -> float:
    xs = _as_flats(xs)
    ys = _as_flats(ys)
    dims = np.asarray(dims, dtype=np.int64)
    nx, width = xs.shape
    ny = ys.shape[0]
    if nx == 0 or ny == 0:
        raise ValueError("directed_hausdorff needs nonempty point sets")
    # chunk rows of xs to bound the (chunk, ny, width) difference tensor
    chunk = max(1, int(4_000_000 // max(1, ny * width)))
    best = 0.0
    for s in range(0, nx, chunk):
        block = xs[s : s + chunk]
        diff = block[:, None, :] - ys[None, :, :]
        c = diff.shape[0]
        dmat = np.zeros((c, ny), dtype=np.float64)
        off = 0
        for d in dims:
            d = int(d)
            sub = diff[:, :, off : off + d * d].reshape(c * ny, d, d)
            if d == 1:
                sv = np.abs(sub[:, 0, 0])
            else:
                sv = np.linalg.svd(sub, compute_uv=False)[:, 0]
            np.maximum(dmat, sv.reshape(c, ny), out=dmat)
            off += d * d
        best = max(best, float(dmat.min(axis=1).max()))
    return best


def _pair_sweep(u, pairs, pair_dist, match_ptr):
    # vertex-disjoint matchings allow batched updates with the same result
    # as processing pairs one by one
    for r in range(len(match_ptr) - 1):
        lo, hi = match_ptr[r], match_ptr[r + 1]
        if lo == hi:
            continue
        i = pairs[lo:hi, 0]
        j = pairs[lo:hi, 1]
        v = u[i] - u[j]
        e = np.abs(v) - pair_dist[lo:hi]
        mask = e > 0.0
        if mask.any():
            shift = np.zeros_like(v)
            shift[mask] = 0.5 * e[mask] * np.sign(v[mask])
            u[i] -= shift
            u[j] += shift


def _pair_violation(u, pairs, pair_dist) -> float:
    if len(pairs) == 0:
        return 0.0
    v = np.abs(u[pairs[:, 0]] - u[pairs[:, 1]]) - pair_dist
    m = float(v.max())
    return m if m > 0.0 else 0.0


def ball_feasibility(
    h: np.ndarray,
    f: np.ndarray,
    pairs: np.ndarray,
    pair_dist: np.ndarray,
    match_ptr: np.ndarray,
    zero_idx: np.ndarray,
    t: float,
    max_sweeps: int,
    feas_tol: float,
    stall_window: int,
    stall_rtol: float,
):
    hre = np.array(np.real(h), dtype=np.float64)
    him = np.array(np.imag(h), dtype=np.float64)
    fre = np.ascontiguousarray(np.real(f), dtype=np.float64)
    fim = np.ascontiguousarray(np.imag(f), dtype=np.float64)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    pair_dist = np.asarray(pair_dist, dtype=np.float64)
    match_ptr = np.asarray(match_ptr, dtype=np.int64)
    zero_idx = np.asarray(zero_idx, dtype=np.int64)
    finite_t = np.isfinite(t)

    best = np.inf
    since_improved = 0
    viol = np.inf
    sweeps = 0
    code = 2
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        if len(zero_idx):
            hre[zero_idx] = 0.0
            him[zero_idx] = 0.0
        _pair_sweep(hre, pairs, pair_dist, match_ptr)
        _pair_sweep(him, pairs, pair_dist, match_ptr)
        r = np.hypot(hre, him)
        over = r > 1.0
        if over.any():
            scale = 1.0 / r[over]
            hre[over] *= scale
            him[over] *= scale
        if finite_t:
            dre = hre - fre
            dim_ = him - fim
            rr = np.hypot(dre, dim_)
            over = rr > t
            if over.any():
                scale = t / rr[over]
                hre[over] = fre[over] + dre[over] * scale
                him[over] = fim[over] + dim_[over] * scale

        viol = 0.0
        if len(zero_idx):
            viol = max(viol, float(np.hypot(hre[zero_idx], him[zero_idx]).max()))
        viol = max(viol, _pair_violation(hre, pairs, pair_dist))
        viol = max(viol, _pair_violation(him, pairs, pair_dist))
        viol = max(viol, max(float(np.hypot(hre, him).max()) - 1.0, 0.0))
        if finite_t:
            viol = max(
                viol, max(float(np.hypot(hre - fre, him - fim).max()) - t, 0.0)
            )

        if viol <= feas_tol:
            code = 0
            break
        if viol < best * (1.0 - stall_rtol):
            best = viol
            since_improved = 0
        else:
            since_improved += 1
            if since_improved >= stall_window:
                code = 1
                break

    return hre + 1j * him, float(viol), sweeps, code
