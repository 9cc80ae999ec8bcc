"""Operator kernels: one step of mass propagation on a ball.

push: out = v P restricted to rows < limit (mass sent to rows >= limit, or
to absent neighbours, leaves the ball).  accumulate: G[k] += c[k] * v for a
batch of coefficients, which is how one sweep serves a whole r-grid.
"""
import numpy as np

from .._accel import njit, pick


@njit
def _push_nb(v, table, probs, n_tab, indptr, indices, weights, limit, out):
    out[:] = 0.0
    L = probs.shape[0]
    for i in range(min(n_tab, limit)):
        x = v[i]
        if x != 0.0:
            for a in range(L):
                j = table[i, a]
                if j >= 0 and j < limit:
                    out[j] += x * probs[a]
    n = v.shape[0]
    for i in range(n_tab, min(n, limit)):
        x = v[i]
        if x != 0.0:
            for e in range(indptr[i - n_tab], indptr[i - n_tab + 1]):
                j = indices[e]
                if j < limit:
                    out[j] += x * weights[e]
    return out


def _push_np(v, table, probs, n_tab, indptr, indices, weights, limit, out):
    out[:] = 0.0
    m = min(n_tab, limit)
    if m:
        t = table[:m]
        w = v[:m, None] * probs[None, :]
        ok = (t >= 0) & (t < limit)
        np.add.at(out, t[ok], w[ok])
    n = v.shape[0]
    if indptr is not None and n > n_tab and limit > n_tab:
        hi = min(n, limit)
        lens = np.diff(indptr)[:hi - n_tab]
        src = np.repeat(np.arange(n_tab, hi), lens)
        e = indptr[hi - n_tab]
        dst = indices[:e]
        ok = dst < limit
        np.add.at(out, dst[ok], (v[src] * weights[:e])[ok])
    return out


@njit
def _accum_nb(G, v, coef):
    K, n = G.shape
    for i in range(n):
        x = v[i]
        if x != 0.0:
            for k in range(K):
                G[k, i] += coef[k] * x


def _accum_np(G, v, coef):
    G += coef[:, None] * v[None, :]


_EMPTY_I = np.zeros(1, dtype=np.int64)
_EMPTY_J = np.zeros(0, dtype=np.int32)
_EMPTY_W = np.zeros(0)
_EMPTY_T = np.zeros((0, 1), dtype=np.int32)


def operator_arrays(op):
    """Arrays in the fixed layout the kernels take (numba needs concrete types)."""
    table = op.table if op.table is not None else _EMPTY_T
    probs = op.probs if op.probs is not None else np.ones(table.shape[1])
    indptr = op.indptr if op.indptr is not None else _EMPTY_I
    indices = op.indices if op.indices is not None else _EMPTY_J
    weights = op.weights if op.weights is not None else _EMPTY_W
    return (table, np.asarray(probs, dtype=np.float64), int(op.n_tab),
            indptr.astype(np.int64), indices, weights.astype(np.float64))


def push(op, v, out=None, limit=None, arrays=None, use_numba=None):
    arrays = arrays or operator_arrays(op)
    if out is None:
        out = np.empty_like(v)
    limit = op.n if limit is None else int(limit)
    return pick(_push_nb, _push_np, use_numba)(v, *arrays, limit, out)


def accumulate(G, v, coef, use_numba=None):
    pick(_accum_nb, _accum_np, use_numba)(G, v, np.asarray(coef, dtype=np.float64))


@njit
def _cw_nb(v0, v1, v2, cs):
    # max over rows of (v1 + c v2) / (v0 + c v1) for every c; inf when a row
    # with no mass in w still receives mass
    K = cs.shape[0]
    out = np.zeros(K)
    for i in range(v0.shape[0]):
        a, b, d = v0[i], v1[i], v2[i]
        if a == 0.0 and b == 0.0 and d == 0.0:
            continue
        for k in range(K):
            c = cs[k]
            w = a + c * b
            wp = b + c * d
            if w > 0.0:
                q = wp / w
                if q > out[k]:
                    out[k] = q
            elif wp > 0.0:
                out[k] = np.inf
    return out


def _cw_np(v0, v1, v2, cs):
    out = np.zeros(len(cs))
    for k, c in enumerate(cs):
        w = v0 + c * v1
        wp = v1 + c * v2
        pos = w > 0
        if np.any(wp[~pos] > 0):
            out[k] = np.inf
        elif pos.any():
            out[k] = np.max(wp[pos] / w[pos])
    return out


def cw_ratios(v0, v1, v2, cs, use_numba=None):
    """Collatz-Wielandt ratios max (w P) / w for w = v0 + c v1, one per c."""
    return pick(_cw_nb, _cw_np, use_numba)(v0, v1, v2, np.asarray(cs, dtype=np.float64))
