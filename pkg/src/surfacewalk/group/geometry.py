"""Geodesics, free semigroup trees and cut points.

Cut points are found letter-combinatorially.  A geodesic that arrives at
x_k along letter l_k and leaves along l_{k+1} crosses the tile of x_k
between two sides; the extended sides meet exactly when the two sides are
consecutive around the tile, which happens exactly when l_k l_{k+1} is a
cyclic subword of r or r^-1.  When they are not consecutive, x_k is a cut
point.  The two barrier trees hang off the neighbours of x_k across the
sides adjacent to the exit side; for each root we keep every semigroup
family whose tree (to a finite depth) misses the geodesic.
"""
from dataclasses import dataclass

import numpy as np

from .normal import NormalWord, _rep_for
from .presentation import WordError, inverse_word
from .rep import matrix_keys_np, matmul_np
from .symmetry import link_cycle

FAMILIES = ("A+", "A-", "B+", "B-")


def family_letters(pres, family):
    """Generators of the semigroup family: A+ = {a_i}, A- = {a_i^-1}, ..."""
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}")
    off = (0 if family[0] == "A" else 2) + (0 if family[1] == "+" else 1)
    return tuple(4 * i + off for i in range(pres.genus))


@dataclass(frozen=True)
class GeodesicSegment:
    """A path start, start*l_1, ..., start*l_1...l_m given by its letters."""
    start: tuple
    letters: tuple

    @property
    def length(self):
        return len(self.letters)

    @property
    def vertices(self):
        return [self.start + self.letters[:i] for i in range(len(self.letters) + 1)]

    def vertex_keys(self, pres):
        rep = _rep_for(pres)
        M = np.array(rep.word_matrix(self.start), dtype=np.int64)[None, :]
        out = [M]
        for l in self.letters:
            M = matmul_np(M, rep.gens_array[l:l + 1])
            out.append(M)
        return matrix_keys_np(np.concatenate(out))


def _row_of(ball, x):
    if isinstance(x, (int, np.integer)):
        if not 0 <= x < ball.n_rows:
            raise WordError("row outside the ball")
        return int(x), ball.word(int(x))
    w = tuple(x.letters) if isinstance(x, NormalWord) else tuple(x)
    row = ball.find(w)
    if row < 0:
        raise WordError("element outside the ball")
    return row, w


def geodesic_count(ball, target_row):
    """Number of geodesics from 1 to the element at target_row."""
    ptr = ball.sphere_ptr
    m = ball.sphere_of(target_row)
    level = {0: 1}
    for d in range(1, m + 1):
        nxt = {}
        for u, c in level.items():
            for v in ball.nbr[u]:
                v = int(v)
                if ptr[d] <= v < ptr[d + 1]:
                    nxt[v] = nxt.get(v, 0) + c
        level = nxt
    return level.get(target_row, 0)


def geodesics_between(x, y, ball, max_count=100000):
    """All geodesic segments from x to y.

    x, y are rows or words of elements of an explicit ball.  The search is
    done from the identity towards x^-1 y (the Cayley graph is homogeneous),
    so it needs d(x, y) <= ball.radius only.
    """
    if ball.lumped or ball.nbr is None:
        raise ValueError("geodesics need an explicit ball with a neighbour table")
    pres = ball.pres
    _, wx = _row_of(ball, x)
    _, wy = _row_of(ball, y)
    t = ball.find(inverse_word(wx) + wy)
    if t < 0:
        raise WordError("d(x, y) exceeds the ball radius")
    d = ball.sphere_of(t)
    nbr = ball.nbr
    ptr = ball.sphere_ptr
    L = pres.ngens
    # walk down from t: a neighbour t*a in sphere m-1 means the path ends in a^-1
    out = []
    stack = [(t, d, ())]
    while stack:
        v, m, suffix = stack.pop()
        if m == 0:
            out.append(GeodesicSegment(wx, suffix))
            if len(out) > max_count:
                raise RuntimeError(f"more than {max_count} geodesics")
            continue
        for a in range(L - 1, -1, -1):
            u = int(nbr[v, a])
            if u >= 0 and ptr[m - 1] <= u < ptr[m]:
                stack.append((u, m - 1, ((a ^ 1),) + suffix))
    out.sort(key=lambda s: s.letters)
    return out


def is_geodesic_word(w, ball):
    """True when the word's length equals the word norm (ball lookup)."""
    row = ball.find(tuple(w))
    if row < 0:
        raise WordError("element outside the ball")
    return ball.sphere_of(row) == len(w)


@dataclass
class SemigroupTree:
    family: str
    depth: int
    nodes: list          # NormalWord per node, breadth-first
    parent: np.ndarray   # parent index, -1 at the root
    letter: np.ndarray   # edge letter from the parent, -1 at the root

    @property
    def outdegree(self):
        return len(set(self.letter[self.parent == 0].tolist())) if len(self.nodes) > 1 else 0

    def __len__(self):
        return len(self.nodes)


def free_semigroup_tree(pres, family, depth, root=()):
    """The semigroup F_family as a rooted tree of outdegree g, breadth first.

    Words over one family never contain two letters that are consecutive in
    the relator, so they are Dehn-reduced; they are the canonical forms of
    their elements when root is empty.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    gens = family_letters(pres, family)
    nodes = [tuple(root)]
    parent, letter = [-1], [-1]
    frontier = [0]
    for _ in range(depth):
        nf = []
        for i in frontier:
            for a in gens:
                nodes.append(nodes[i] + (a,))
                parent.append(i)
                letter.append(a)
                nf.append(len(nodes) - 1)
        frontier = nf
    return SemigroupTree(family, depth, [NormalWord(w) for w in nodes],
                         np.asarray(parent), np.asarray(letter))


@dataclass(frozen=True)
class Barrier:
    """Cut point x_index with the barrier trees hanging off its neighbours.

    left_root / right_root are the letters c with the tree rooted at x_k c;
    *_families lists the semigroup families whose tree (to `depth`) avoids
    every vertex of the geodesic.
    """
    index: int
    enter: int
    exit: int
    left_root: int
    right_root: int
    left_families: tuple
    right_families: tuple
    depth: int

    @property
    def is_barrier(self):
        return bool(self.left_families) and bool(self.right_families)


def _tree_keys(pres, base, family, depth):
    rep = _rep_for(pres)
    gens = rep.gens_array[list(family_letters(pres, family))]
    level = np.asarray(base, dtype=np.int64)[None, :]
    keys = [matrix_keys_np(level)]
    for _ in range(depth):
        level = matmul_np(np.repeat(level, len(gens), axis=0), np.tile(gens, (len(level), 1)))
        keys.append(matrix_keys_np(level))
    return np.concatenate(keys)


def find_cut_points(geo, pres, ball=None, tree_depth=6):
    """Cut points of a geodesic segment with their barrier tree families.

    When a ball is given the segment is first checked to be geodesic (input
    error otherwise); without one the check falls back to reduce_dehn.
    """
    if isinstance(geo, GeodesicSegment):
        start, w = tuple(geo.start), tuple(geo.letters)
    else:
        start, w = (), tuple(geo)
    pres.check(w)
    if not pres.surface or pres.genus < 2:
        raise ValueError("cut points are defined for surface groups of genus >= 2")
    if ball is not None:
        ok = is_geodesic_word(w, ball)
    else:
        from .normal import reduce_dehn
        ok = reduce_dehn(w, pres).length == len(w)
    if not ok:
        raise WordError("segment is not a geodesic")
    cyc = link_cycle(pres)
    n = len(cyc)
    pos = {l: i for i, l in enumerate(cyc)}
    rep = _rep_for(pres)
    seg = GeodesicSegment(start, w)
    gkeys = np.sort(seg.vertex_keys(pres))
    out = []
    for k in range(1, len(w)):
        M_k = np.array(rep.word_matrix(start + w[:k]), dtype=np.int64)
        enter, leave = w[k - 1], w[k]
        if pres.consecutive_in_relator(enter, leave):
            continue
        j = pos[leave]
        sides = (cyc[(j - 1) % n], cyc[(j + 1) % n])
        fams = []
        for c in sides:
            base = matmul_np(M_k[None, :], rep.gens_array[c:c + 1])[0]
            ok = []
            for f in FAMILIES:
                tk = _tree_keys(pres, base, f, tree_depth)
                hit = np.searchsorted(gkeys, tk)
                hit = np.minimum(hit, len(gkeys) - 1)
                if not np.any(gkeys[hit] == tk):
                    ok.append(f)
            fams.append(tuple(ok))
        out.append(Barrier(k, enter, leave, sides[0], sides[1], fams[0], fams[1], tree_depth))
    return out
