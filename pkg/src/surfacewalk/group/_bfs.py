"""Sphere-expansion kernels for ball enumeration.

A sphere is stored as orbit representatives x_i together with, for every
symmetry h in the lumping subgroup, the matrix rho(h(x_i)) and the transducer
state of h after reading x_i.  Expansion computes, for each (i, letter), the
orbit key min_h key(rho(h(x_i a))) and the minimizing symmetry.
"""
import numpy as np

from .._accel import njit, pick
from .rep import PRIME, _splitmix_np

P = PRIME


@njit
def _splitmix_nb(x):
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


@njit
def _key_nb(a, b, c, d):
    x = _splitmix_nb((np.uint64(a) << np.uint64(31)) | np.uint64(b))
    return _splitmix_nb(x ^ ((np.uint64(c) << np.uint64(31)) | np.uint64(d)))


@njit
def _pass1_nb(IM, ST, gmat, out, nxt):
    n, H = ST.shape
    L = gmat.shape[0]
    keys = np.empty(n * L, dtype=np.uint64)
    hb = np.empty(n * L, dtype=np.int16)
    for i in range(n):
        for a in range(L):
            best = np.uint64(0xFFFFFFFFFFFFFFFF)
            bh = -1
            for h in range(H):
                t = ST[i, h]
                l = out[t, a]
                m0 = np.int64(IM[i, h, 0])
                m1 = np.int64(IM[i, h, 1])
                m2 = np.int64(IM[i, h, 2])
                m3 = np.int64(IM[i, h, 3])
                g0, g1, g2, g3 = gmat[l, 0], gmat[l, 1], gmat[l, 2], gmat[l, 3]
                a0 = (m0 * g0 % P + m1 * g2 % P) % P
                a1 = (m0 * g1 % P + m1 * g3 % P) % P
                a2 = (m2 * g0 % P + m3 * g2 % P) % P
                a3 = (m2 * g1 % P + m3 * g3 % P) % P
                k = _key_nb(a0, a1, a2, a3)
                if bh < 0 or k < best:
                    best = k
                    bh = h
            keys[i * L + a] = best
            hb[i * L + a] = bh
    return keys, hb


@njit
def _pass2_nb(IM, ST, gmat, out, nxt, cpos, par_i, par_a, par_h, store):
    """Images of new representatives h*(x_i a); returns images, states, orbit sizes."""
    m = par_i.shape[0]
    H = ST.shape[1]
    if store:
        NIM = np.empty((m, H, 4), dtype=IM.dtype)
        NST = np.empty((m, H), dtype=ST.dtype)
    else:
        NIM = np.empty((0, H, 4), dtype=IM.dtype)
        NST = np.empty((0, H), dtype=ST.dtype)
    sizes = np.empty(m, dtype=np.int32)
    kk = np.empty(H, dtype=np.uint64)
    rep = np.empty((m, 4), dtype=np.int32)
    for j in range(m):
        i = par_i[j]
        a = par_a[j]
        hs = par_h[j]
        for tau in range(H):
            c = cpos[tau, hs]
            t = ST[i, c]
            l = out[t, a]
            m0 = np.int64(IM[i, c, 0])
            m1 = np.int64(IM[i, c, 1])
            m2 = np.int64(IM[i, c, 2])
            m3 = np.int64(IM[i, c, 3])
            g0, g1, g2, g3 = gmat[l, 0], gmat[l, 1], gmat[l, 2], gmat[l, 3]
            a0 = (m0 * g0 % P + m1 * g2 % P) % P
            a1 = (m0 * g1 % P + m1 * g3 % P) % P
            a2 = (m2 * g0 % P + m3 * g2 % P) % P
            a3 = (m2 * g1 % P + m3 * g3 % P) % P
            kk[tau] = _key_nb(a0, a1, a2, a3)
            if store:
                NIM[j, tau, 0] = a0
                NIM[j, tau, 1] = a1
                NIM[j, tau, 2] = a2
                NIM[j, tau, 3] = a3
                NST[j, tau] = nxt[t, a]
            if tau == 0:
                rep[j, 0] = a0
                rep[j, 1] = a1
                rep[j, 2] = a2
                rep[j, 3] = a3
        s = np.sort(kk)
        cnt = 1
        for u in range(1, H):
            if s[u] != s[u - 1]:
                cnt += 1
        sizes[j] = cnt
    return NIM, NST, sizes, rep


@njit
def _cand_matrix_nb(IM, ST, gmat, out, idx_i, idx_a, idx_h):
    m = idx_i.shape[0]
    res = np.empty((m, 4), dtype=np.int64)
    for j in range(m):
        i = idx_i[j]
        h = idx_h[j]
        l = out[ST[i, h], idx_a[j]]
        m0 = np.int64(IM[i, h, 0])
        m1 = np.int64(IM[i, h, 1])
        m2 = np.int64(IM[i, h, 2])
        m3 = np.int64(IM[i, h, 3])
        g0, g1, g2, g3 = gmat[l, 0], gmat[l, 1], gmat[l, 2], gmat[l, 3]
        res[j, 0] = (m0 * g0 % P + m1 * g2 % P) % P
        res[j, 1] = (m0 * g1 % P + m1 * g3 % P) % P
        res[j, 2] = (m2 * g0 % P + m3 * g2 % P) % P
        res[j, 3] = (m2 * g1 % P + m3 * g3 % P) % P
    return res


# ---- numpy versions ---------------------------------------------------------

def _mm(M, G):
    a0 = (M[..., 0] * G[..., 0] % P + M[..., 1] * G[..., 2] % P) % P
    a1 = (M[..., 0] * G[..., 1] % P + M[..., 1] * G[..., 3] % P) % P
    a2 = (M[..., 2] * G[..., 0] % P + M[..., 3] * G[..., 2] % P) % P
    a3 = (M[..., 2] * G[..., 1] % P + M[..., 3] * G[..., 3] % P) % P
    return np.stack([a0, a1, a2, a3], axis=-1)


def _keys_np(M):
    a, b, c, d = (M[..., k].astype(np.uint64) for k in range(4))
    with np.errstate(over="ignore"):
        x = _splitmix_np((a << np.uint64(31)) | b)
        return _splitmix_np(x ^ ((c << np.uint64(31)) | d))


def _pass1_np(IM, ST, gmat, out, nxt, chunk=4096):
    n, H = ST.shape
    L = gmat.shape[0]
    keys = np.empty(n * L, dtype=np.uint64)
    hb = np.empty(n * L, dtype=np.int16)
    for s in range(0, n, chunk):
        e = min(n, s + chunk)
        st = ST[s:e].astype(np.int64)                     # (c, H)
        letters = out[st[:, :, None], np.arange(L)[None, None, :]]  # (c, H, L)
        M = IM[s:e].astype(np.int64)[:, :, None, :]       # (c, H, 1, 4)
        prod = _mm(np.broadcast_to(M, letters.shape + (4,)), gmat[letters])
        k = _keys_np(prod)                                 # (c, H, L)
        arg = np.argmin(k, axis=1)                         # (c, L)
        kmin = np.take_along_axis(k, arg[:, None, :], axis=1)[:, 0, :]
        keys[s * L:e * L] = kmin.reshape(-1)
        hb[s * L:e * L] = arg.reshape(-1)
    return keys, hb


def _pass2_np(IM, ST, gmat, out, nxt, cpos, par_i, par_a, par_h, store, chunk=4096):
    m = par_i.shape[0]
    H = ST.shape[1]
    NIM = np.empty((m if store else 0, H, 4), dtype=IM.dtype)
    NST = np.empty((m if store else 0, H), dtype=ST.dtype)
    sizes = np.empty(m, dtype=np.int32)
    rep = np.empty((m, 4), dtype=np.int32)
    for s in range(0, m, chunk):
        e = min(m, s + chunk)
        pi, pa, ph = par_i[s:e], par_a[s:e], par_h[s:e]
        c = cpos[:, ph].T                                  # (c, H)
        t = ST[pi[:, None], c].astype(np.int64)
        l = out[t, pa[:, None]]
        M = IM[pi[:, None], c].astype(np.int64)
        prod = _mm(M, gmat[l])                             # (c, H, 4)
        k = np.sort(_keys_np(prod), axis=1)
        sizes[s:e] = 1 + (k[:, 1:] != k[:, :-1]).sum(axis=1)
        rep[s:e] = prod[:, 0, :]
        if store:
            NIM[s:e] = prod
            NST[s:e] = nxt[t, pa[:, None]]
    return NIM, NST, sizes, rep


def _cand_matrix_np(IM, ST, gmat, out, idx_i, idx_a, idx_h):
    l = out[ST[idx_i, idx_h].astype(np.int64), idx_a]
    return _mm(IM[idx_i, idx_h].astype(np.int64), gmat[l])


def pass1(*args, use_numba=None):
    return pick(_pass1_nb, _pass1_np, use_numba)(*args)


def pass2(*args, use_numba=None):
    return pick(_pass2_nb, _pass2_np, use_numba)(*args)


def cand_matrix(*args, use_numba=None):
    return pick(_cand_matrix_nb, _cand_matrix_np, use_numba)(*args)
