"""Cayley-ball enumeration.

Two flavours share one data structure:

* explicit balls (trivial symmetry group): every element is a row, rows in
  each sphere are sorted by ShortLex order of their canonical words, and a
  full neighbour table is kept;
* lumped balls: rows are orbits of a group of graph symmetries fixing the
  identity.  The simple random walk is exactly lumpable over such orbits, so
  operator iteration on orbit masses reproduces G_r(1, x) exactly.

The free group uses a third, radial, quotient (see `radial_tree_ball`).
"""
from dataclasses import dataclass, field
import math

import numpy as np

from . import _bfs
from .presentation import GroupPresentation
from .rep import HashRep, matrix_key
from .symmetry import SymmetryTransducer


class ResourceError(RuntimeError):
    pass


class HashCollision(RuntimeError):
    pass


DEFAULT_MAX_ROWS = 4 * 10**7


def growth_estimate(pres, radius):
    """Rough ball size used only for the budget check."""
    n = pres.ngens
    if n == 4 and pres.surface:
        return 2 * radius * radius + 2 * radius + 1
    z = n - 1 if not pres.surface else n - 1 - 1.0 / n
    return int(sum(n * z ** (m - 1) for m in range(1, radius + 1)) + 1)


@dataclass
class CayleyBall:
    pres: GroupPresentation
    radius: int
    rep: HashRep
    sym: SymmetryTransducer
    members: np.ndarray
    sphere_ptr: np.ndarray           # rows of sphere m: sphere_ptr[m]:sphere_ptr[m+1]
    keys: np.ndarray                 # orbit (or element) keys, uint64
    mats: np.ndarray                 # (n, 4) matrix of the representative
    orbit_size: np.ndarray           # (n,) int
    words: np.ndarray | None         # (n, radius) int8, padded with -1
    nbr: np.ndarray | None = None    # explicit balls: (n, 4g) neighbour rows, -1 absent
    op: "Operator" = None
    probs: np.ndarray | None = None
    _order: np.ndarray = field(default=None, repr=False)
    _skeys: np.ndarray = field(default=None, repr=False)

    # ---- basic accessors ----------------------------------------------------

    @property
    def n_rows(self):
        return int(self.keys.shape[0])

    @property
    def lumped(self):
        return len(self.members) > 1

    @property
    def genus(self):
        return self.pres.genus

    def sphere_of(self, row):
        return int(np.searchsorted(self.sphere_ptr, row, side="right") - 1)

    def row_sphere(self):
        out = np.empty(self.n_rows, dtype=np.int64)
        for m in range(self.radius + 1):
            out[self.sphere_ptr[m]:self.sphere_ptr[m + 1]] = m
        return out

    def sphere_rows(self, m):
        return np.arange(self.sphere_ptr[m], self.sphere_ptr[m + 1])

    def sphere_counts(self):
        return [int(self.orbit_size[self.sphere_ptr[m]:self.sphere_ptr[m + 1]].sum())
                for m in range(self.radius + 1)]

    def n_elements(self):
        return int(self.orbit_size.sum())

    def word(self, row):
        w = self.words[row]
        return tuple(int(x) for x in w[w >= 0])

    # ---- lookup ---------------------------------------------------------------

    def _sorted(self):
        if self._order is None:
            self._order = np.argsort(self.keys, kind="stable")
            self._skeys = self.keys[self._order]
        return self._order

    def orbit_key(self, w):
        best = None
        for t in self.members:
            img, _ = self.sym.apply(int(t), w)
            k = self.rep.key(img)
            if best is None or k < best:
                best = k
        return best

    def find(self, w):
        """Row index of the element (or orbit) of word w; -1 if outside."""
        k = np.uint64(self.orbit_key(tuple(w)))
        order = self._sorted()
        pos = np.searchsorted(self._skeys, k)
        if pos < len(order) and self.keys[order[pos]] == k:
            return int(order[pos])
        return -1

    def find_matrix(self, M):
        """Row of an element given by its matrix (explicit balls only)."""
        if self.lumped:
            raise ValueError("matrix lookup needs an explicit ball")
        k = np.uint64(matrix_key(M))
        order = self._sorted()
        pos = np.searchsorted(self._skeys, k)
        if pos < len(order) and self.keys[order[pos]] == k:
            return int(order[pos])
        return -1

    def find_keys(self, keys):
        """Vectorized lookup of element keys (explicit balls); -1 for missing."""
        order = self._sorted()
        sk = self._skeys
        pos = np.searchsorted(sk, keys)
        pos = np.minimum(pos, len(sk) - 1)
        hit = sk[pos] == keys
        return np.where(hit, order[pos], -1)

    def length(self, w):
        row = self.find(w)
        if row < 0:
            raise KeyError("element outside the ball")
        return self.sphere_of(row)


def _edge_weights(probs, L):
    if probs is None:
        return np.full(L, 1.0 / L)
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (L,) or np.any(probs <= 0) or abs(probs.sum() - 1) > 1e-12:
        raise ValueError("step distribution must be positive, of length 4g, summing to 1")
    if not np.allclose(probs, probs[np.arange(L) ^ 1]):
        raise ValueError("step distribution must be symmetric")
    return probs


def ball_enumerate(pres, radius, lumped=False, rep=None, probs=None,
                   store_words=True, with_operator=True,
                   max_rows=DEFAULT_MAX_ROWS, use_numba=None, verify=True):
    """Enumerate the ball of the given radius around the identity.

    lumped=True quotients by every graph symmetry that preserves `probs`.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    L = pres.ngens
    probs = _edge_weights(probs, L)
    rep = rep or HashRep(pres)
    sym = SymmetryTransducer(pres)
    if lumped and pres.surface:
        members = np.asarray(sym.preserving(probs), dtype=np.int64)
    else:
        members = np.array([0], dtype=np.int64)
    H = len(members)
    est = growth_estimate(pres, radius) / H
    if est > max_rows:
        feas = radius
        while feas > 0 and growth_estimate(pres, feas) / H > max_rows:
            feas -= 1
        raise ResourceError(
            f"radius {radius} needs about {est:.3g} rows; largest feasible radius is {feas}")
    posmap = np.full(sym.order, -1, dtype=np.int64)
    posmap[members] = np.arange(H)
    cpos = np.empty((H, H), dtype=np.int64)
    for a_, t in enumerate(members):
        for b_, u in enumerate(members):
            c = posmap[sym.compose[t, u]]
            if c < 0:
                raise ValueError("symmetry set is not a group")
            cpos[a_, b_] = c
    gmat = rep.gens_array
    out, nxt = sym.out, sym.nxt

    ident = np.array([1, 0, 0, 1], dtype=np.int64)
    IM = np.broadcast_to(ident, (1, H, 4)).astype(np.int32)
    ST = members[None, :].astype(np.int16)
    sph_keys = [np.array([matrix_key(ident)], dtype=np.uint64)]
    sph_mats = [ident[None, :].astype(np.int32)]
    sph_size = [np.ones(1, dtype=np.int32)]
    sph_words = [np.full((1, radius), -1, dtype=np.int8)] if store_words else None
    tables = []          # per sphere: (n_m, L) global target rows, -1 outside
    offsets = [0, 1]
    prev_sorted = None   # (sorted keys, order) of sphere m-1
    letters = np.arange(L, dtype=np.int64)

    for m in range(radius):
        base = offsets[m]
        n_m = ST.shape[0]
        keys, hb = _bfs.pass1(IM, ST, gmat, out, nxt, use_numba=use_numba)
        dst = np.full(n_m * L, -1, dtype=np.int64)
        if prev_sorted is not None:
            sk, so = prev_sorted
            pos = np.minimum(np.searchsorted(sk, keys), len(sk) - 1)
            hitp = sk[pos] == keys
            dst[hitp] = offsets[m - 1] + so[pos[hitp]]
            del pos
        else:
            hitp = np.zeros(n_m * L, dtype=bool)
        cur_order = np.argsort(sph_keys[m], kind="stable")
        ck = sph_keys[m][cur_order]
        pos = np.minimum(np.searchsorted(ck, keys), len(ck) - 1)
        hitc = (ck[pos] == keys) & ~hitp
        dst[hitc] = base + cur_order[pos[hitc]]
        del pos
        nidx = np.flatnonzero(~(hitp | hitc))
        del hitp, hitc
        order = nidx[np.argsort(keys[nidx], kind="stable")]
        del nidx
        sk_new = keys[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = sk_new[1:] != sk_new[:-1]
        del sk_new
        grp = np.cumsum(first) - 1
        firsts = order[first]
        byfirst = np.argsort(firsts, kind="stable")
        rank = np.empty(len(firsts), dtype=np.int64)
        rank[byfirst] = np.arange(len(firsts))
        n_new = len(firsts)
        next_base = base + n_m
        dst[order] = next_base + rank[grp]
        del order, grp, rank, first
        src_first = firsts[byfirst]
        del firsts, byfirst
        par_i = src_first // L
        par_a = src_first % L
        par_h = hb[src_first].astype(np.int64)
        if m + 1 == radius:
            del ck, cur_order
        if verify:
            _verify_sphere(IM, ST, gmat, out, hb, dst, base, next_base, offsets, m,
                           sph_mats, src_first, L, use_numba)
        store = m + 1 < radius
        NIM, NST, sizes, repm = _bfs.pass2(IM, ST, gmat, out, nxt, cpos,
                                           par_i, par_a, par_h, store, use_numba=use_numba)
        sph_keys.append(keys[src_first])
        del keys, hb
        sph_mats.append(repm)
        del repm
        sph_size.append(sizes)
        if store_words:
            pw = sph_words[m][par_i]
            pw[:, m] = par_a
            if H > 1:
                # representative word: h*(parent word + letter)
                out8, nxt16 = out.astype(np.int8), nxt.astype(np.int16)
                state = members[par_h].astype(np.int16)
                for k in range(m + 1):
                    col = pw[:, k].copy()
                    pw[:, k] = out8[state, col]
                    state = nxt16[state, col]
                del state, col
            sph_words.append(pw)
            del pw
        tables.append(dst.reshape(n_m, L).astype(np.int32 if next_base + n_new < 2**31 else np.int64))
        del dst, par_i, par_a, par_h, src_first, sizes
        offsets.append(next_base + n_new)
        prev_sorted = (ck, cur_order) if m + 1 < radius else None
        del IM, ST
        IM, ST = NIM, NST
        del NIM, NST
        if offsets[-1] > max_rows:
            raise ResourceError(f"ball exceeded {max_rows} rows at radius {m + 1}; "
                                f"largest feasible radius is {m}")
    del IM, ST
    sphere_ptr = np.asarray(offsets, dtype=np.int64)
    ball = CayleyBall(pres, radius, rep, sym, members, sphere_ptr,
                      np.concatenate(sph_keys), np.concatenate(sph_mats),
                      np.concatenate(sph_size).astype(np.int64),
                      np.concatenate(sph_words) if store_words else None,
                      probs=probs)
    n = ball.n_rows
    if H == 1:
        idt = np.int32 if n < 2**31 else np.int64
        nbr = np.full((n, L), -1, dtype=idt)
        for m, tab in enumerate(tables):
            nbr[offsets[m]:offsets[m + 1]] = tab
        del tables
        # outer sphere: backward edges read off by symmetry of adjacency
        rows = np.arange(offsets[radius - 1] if radius else 0, offsets[radius] if radius else 0)
        if len(rows):
            sub = nbr[rows]
            rr, aa = np.nonzero(sub >= offsets[radius])
            nbr[sub[rr, aa], aa ^ 1] = rows[rr]
        ball.nbr = nbr
        if with_operator:
            ball.op = Operator(n, nbr, probs, n, None, None, None)
    elif with_operator:
        n_tab = int(offsets[radius])
        tab = np.concatenate(tables) if tables else np.zeros((0, L), dtype=np.int32)
        del tables
        ball.op = _lumped_operator(ball, tab, n_tab, probs)
    return ball


def _verify_sphere(IM, ST, gmat, out, hb, dst, base, next_base, offsets, m,
                   sph_mats, src_first, L, use_numba, chunk=1 << 20):
    """Every key match must be a genuine matrix match (no 64-bit collisions)."""
    new_ref_pos = src_first    # candidate defining each new representative
    total = dst.shape[0]
    for s in range(0, total, chunk):
        e = min(total, s + chunk)
        c = np.arange(s, e, dtype=np.int64)
        cm = _bfs.cand_matrix(IM, ST, gmat, out, c // L, c % L, hb[s:e].astype(np.int64),
                              use_numba=use_numba)
        d = dst[s:e]
        ref = np.empty_like(cm)
        inprev = d < base
        if inprev.any():
            ref[inprev] = sph_mats[m - 1][d[inprev] - offsets[m - 1]]
        incur = (d >= base) & (d < next_base)
        if incur.any():
            ref[incur] = sph_mats[m][d[incur] - base]
        isnew = d >= next_base
        if isnew.any():
            fc = new_ref_pos[d[isnew] - next_base]
            ref[isnew] = _bfs.cand_matrix(IM, ST, gmat, out, fc // L, fc % L,
                                          hb[fc].astype(np.int64), use_numba=use_numba)
        if not np.array_equal(cm, ref):
            raise HashCollision(f"64-bit key collision between distinct elements in sphere {m + 1}")


@dataclass
class Operator:
    """Sub-stochastic transition operator on ball rows, in push (mass) form.

    Rows [0, n_tab) push mass along table[i, a] with weight probs[a]; rows
    [n_tab, n) use the CSR arrays.  A row whose weights sum to less than one
    leaks mass out of the ball.
    """
    n: int
    table: np.ndarray | None
    probs: np.ndarray | None
    n_tab: int
    indptr: np.ndarray | None
    indices: np.ndarray | None
    weights: np.ndarray | None

    def row_sums(self):
        rs = np.zeros(self.n)
        if self.n_tab:
            rs[:self.n_tab] = ((self.table[:self.n_tab] >= 0) * self.probs).sum(axis=1)
        if self.indptr is not None and len(self.weights):
            lens = np.diff(self.indptr)
            rows = np.repeat(np.arange(self.n_tab, self.n), lens)
            np.add.at(rs, rows, self.weights)
        return rs

    def to_scipy(self):
        import scipy.sparse as sp
        rows, cols, vals = [], [], []
        if self.n_tab:
            t = self.table[:self.n_tab]
            r, a = np.nonzero(t >= 0)
            rows.append(r), cols.append(t[r, a].astype(np.int64)), vals.append(self.probs[a])
        if self.indptr is not None and len(self.weights):
            lens = np.diff(self.indptr)
            rows.append(np.repeat(np.arange(self.n_tab, self.n), lens))
            cols.append(self.indices.astype(np.int64))
            vals.append(self.weights)
        M = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(self.n, self.n))
        return M


def _lumped_operator(ball, tab, n_tab, probs):
    n = ball.n_rows
    R = ball.radius
    if R == 0:
        return Operator(n, tab, probs, n_tab, np.zeros(1, dtype=np.int64),
                        np.zeros(0, dtype=np.int32), np.zeros(0))
    # outer sphere rows: reverse the forward edges of sphere R-1, scaled by
    # orbit sizes (edge counts between two orbits are symmetric)
    lo, hi = ball.sphere_ptr[R - 1], ball.sphere_ptr[R]
    sub = tab[lo:hi]
    rr, aa = np.nonzero(sub >= hi)
    s = rr + lo
    d = sub[rr, aa].astype(np.int64)
    sz = ball.orbit_size
    w = probs[aa] * sz[s] / sz[d]
    order = np.argsort(d, kind="stable")
    d, s, w = d[order], s[order], w[order]
    indptr = np.zeros(n - n_tab + 1, dtype=np.int64)
    np.add.at(indptr, d - n_tab + 1, 1)
    indptr = np.cumsum(indptr)
    return Operator(n, tab, probs, n_tab, indptr, s.astype(np.int32), w)


def radial_tree_ball(genus, radius, probs=None):
    """Sphere quotient of the free group F_2g (the 4g-regular tree).

    The uniform walk on a tree is lumpable over spheres (all tree
    automorphisms fixing the root are symmetries).  Rows are spheres.
    """
    pres = GroupPresentation(genus, surface=False)
    L = pres.ngens
    if probs is not None and not np.allclose(probs, 1.0 / L):
        raise ValueError("radial quotient needs the uniform step distribution")
    sizes = [1] + [L * (L - 1) ** (m - 1) for m in range(1, radius + 1)]
    p = 1.0 / L
    q = 1.0 - p
    n = radius + 1
    indptr = [0]
    indices, w = [], []
    for m in range(n):
        if m > 0:
            indices.append(m - 1), w.append(p)
        if m < radius:
            indices.append(m + 1), w.append(1.0 if m == 0 else q)
        indptr.append(len(indices))
    op = Operator(n, None, None, 0, np.asarray(indptr, dtype=np.int64),
                  np.asarray(indices, dtype=np.int32), np.asarray(w, dtype=np.float64))
    return RadialBall(pres, radius, np.arange(n + 1, dtype=np.int64), sizes, op)


@dataclass
class RadialBall:
    """Operator container with the CayleyBall interface used by the engine."""
    pres: GroupPresentation
    radius: int
    sphere_ptr: np.ndarray
    _sizes: list
    op: Operator

    lumped = True
    nbr = None

    @property
    def orbit_size(self):
        # float view; exact sizes overflow int64 beyond radius ~40
        return np.array([float(s) for s in self._sizes])

    @property
    def n_rows(self):
        return self.radius + 1

    @property
    def genus(self):
        return self.pres.genus

    def sphere_counts(self):
        return [int(s) for s in self._sizes]

    def row_sphere(self):
        return np.arange(self.radius + 1)

    def sphere_rows(self, m):
        return np.array([m])

    def sphere_of(self, row):
        return int(row)

    def find(self, w):
        from .words import free_reduce
        m = len(free_reduce(tuple(w)))
        return m if m <= self.radius else -1

    def length(self, w):
        from .words import free_reduce
        return len(free_reduce(tuple(w)))
