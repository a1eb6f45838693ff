"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The active backend is picked once at import time. Set ``RANDLB_DISABLE_NUMBA=1``
to force the numpy path (also used automatically when numba is missing).
Both implementations are always importable as ``numpy_impl`` and, when
available, ``numba_impl`` so tests and the benchmark can compare them.

Kernels
-------
piece_argmax(V, x, c)
    Max over rows j of ``V[j] @ x - (j+1)*c`` and the smallest maximizing row.
batch_piece_max(V, X, c)
    Same maximum for every row of ``X``.
gs_residual(Q, m, v)
    Two-pass classical Gram-Schmidt residual of ``v`` against ``Q[:m]``;
    returns ``(residual, norm)`` with the residual *not* normalized.
cap_count(G, tau)
    Number of rows ``g`` of ``G`` with ``|g[0]| >= tau * ||g||``.
"""
import os
from types import SimpleNamespace

import numpy as np

__all__ = ["BACKEND", "numpy_impl", "numba_impl", "piece_argmax",
           "batch_piece_max", "gs_residual", "cap_count"]


# -- numpy -----------------------------------------------------------------

def _np_piece_argmax(V, x, c):
    p = V @ x - c * np.arange(1, V.shape[0] + 1)
    idx = int(np.argmax(p))  # first occurrence -> minimal index on exact ties
    return float(p[idx]), idx


def _np_batch_piece_max(V, X, c):
    P = X @ V.T
    P -= c * np.arange(1, V.shape[0] + 1)
    return P.max(axis=1)


def _np_gs_residual(Q, m, v):
    r = v.copy()
    if m:
        B = Q[:m]
        for _ in range(2):
            r -= B.T @ (B @ r)
    return r, float(np.sqrt(r @ r))


def _np_cap_count(G, tau):
    sq = np.einsum("ij,ij->i", G, G)
    return int(np.count_nonzero(np.abs(G[:, 0]) >= tau * np.sqrt(sq)))


numpy_impl = SimpleNamespace(
    name="numpy",
    piece_argmax=_np_piece_argmax,
    batch_piece_max=_np_batch_piece_max,
    gs_residual=_np_gs_residual,
    cap_count=_np_cap_count,
)


# -- numba -----------------------------------------------------------------

def _build_numba():
    from numba import njit

    @njit(cache=True)
    def piece_values(V, x, c):
        k, d = V.shape
        best = -np.inf
        idx = 0
        for j in range(k):
            s = 0.0
            for i in range(d):
                s += V[j, i] * x[i]
            p = s - (j + 1) * c
            if p > best:  # strict: ties keep the smaller index
                best = p
                idx = j
        return best, idx

    @njit(cache=True)
    def batch_piece_max(V, X, c):
        P = X @ V.T  # BLAS gemm; the reduction below is the fused part
        n, k = P.shape
        out = np.empty(n)
        for r in range(n):
            best = -np.inf
            for j in range(k):
                p = P[r, j] - (j + 1) * c
                if p > best:
                    best = p
            out[r] = best
        return out

    @njit(cache=True)
    def gs_residual(Q, m, v):
        d = v.shape[0]
        r = v.copy()
        coef = np.empty(m)
        for _ in range(2):
            for a in range(m):
                s = 0.0
                for i in range(d):
                    s += Q[a, i] * r[i]
                coef[a] = s
            for a in range(m):
                ca = coef[a]
                for i in range(d):
                    r[i] -= ca * Q[a, i]
        s = 0.0
        for i in range(d):
            s += r[i] * r[i]
        return r, np.sqrt(s)

    @njit(cache=True)
    def cap_count(G, tau):
        n, d = G.shape
        cnt = 0
        for r in range(n):
            s = 0.0
            for i in range(d):
                s += G[r, i] * G[r, i]
            if abs(G[r, 0]) >= tau * np.sqrt(s):
                cnt += 1
        return cnt

    def _piece_argmax(V, x, c):
        best, idx = piece_values(V, x, c)
        return float(best), int(idx)

    def _gs_residual(Q, m, v):
        r, nrm = gs_residual(Q, m, v)
        return r, float(nrm)

    def _cap_count(G, tau):
        return int(cap_count(G, tau))

    return SimpleNamespace(
        name="numba",
        piece_argmax=_piece_argmax,
        batch_piece_max=batch_piece_max,
        gs_residual=_gs_residual,
        cap_count=_cap_count,
    )


def _numba_wanted():
    flag = os.environ.get("RANDLB_DISABLE_NUMBA", "").strip().lower()
    return flag not in ("1", "true", "yes", "on")


try:
    numba_impl = _build_numba()
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_impl = None

_active = numba_impl if (numba_impl is not None and _numba_wanted()) else numpy_impl

BACKEND = _active.name
piece_argmax = _active.piece_argmax
batch_piece_max = _active.batch_piece_max
gs_residual = _active.gs_residual
cap_count = _active.cap_count
