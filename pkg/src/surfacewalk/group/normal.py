"""Canonical ShortLex geodesic words.

Dehn's algorithm decides equality but its output need not be geodesic (a
chain of half-relator pieces can hide a shortening).  The canonical form is
obtained by a ShortLex breadth-first search confined to a corridor around
the Dehn-reduced path: the union of all relator discs touching the path
(`layers` times).  Geodesic bigons in these tilings are single ladders of
discs, so one layer suffices; the test suite checks this against full balls.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .presentation import GroupPresentation
from .rep import HashRep, matrix_keys_np, matmul_np
from .words import dehn_reduce, free_reduce


@dataclass(frozen=True)
class NormalWord:
    letters: tuple

    @property
    def length(self):
        return len(self.letters)

    def __len__(self):
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)


@lru_cache(maxsize=16)
def _rep_for(pres):
    return HashRep(pres)


@lru_cache(maxsize=16)
def _disc_offsets(pres, layers):
    """Distinct elements of the union of relator discs around the identity."""
    rep = _rep_for(pres)
    words = {()}
    frontier = {()}
    rots = pres.relator_rotations()
    for _ in range(layers):
        new = set()
        for base in frontier:
            for rot in rots:
                for j in range(len(rot)):
                    new.add(free_reduce(base + rot[:j]))
        frontier = new - words
        words |= new
    mats = np.array([rep.word_matrix(w) for w in sorted(words)], dtype=np.int64)
    keys, idx = np.unique(matrix_keys_np(mats), return_index=True)
    return mats[idx]


def _z2_normal(w):
    ea = sum(1 if l == 0 else -1 if l == 1 else 0 for l in w)
    eb = sum(1 if l == 2 else -1 if l == 3 else 0 for l in w)
    return tuple([0 if ea > 0 else 1] * abs(ea) + [2 if eb > 0 else 3] * abs(eb))


def reduce_dehn(word, pres, layers=1):
    """Canonical geodesic ShortLex representative of the element of `word`."""
    if isinstance(word, str):
        word = pres.parse(word)
    word = tuple(int(l) for l in word)
    pres.check(word)
    if not pres.surface:
        return NormalWord(free_reduce(word))
    if pres.genus == 1:
        return NormalWord(_z2_normal(word))
    w = dehn_reduce(word, pres)
    if len(w) <= 1:
        return NormalWord(w)
    return NormalWord(corridor_shortlex(w, pres, layers))


def corridor_shortlex(w, pres, layers=1):
    rep = _rep_for(pres)
    gens = rep.gens_array
    L = pres.ngens
    n = len(w)
    V = np.empty((n + 1, 4), dtype=np.int64)
    V[0] = (1, 0, 0, 1)
    for i, l in enumerate(w):
        V[i + 1] = matmul_np(V[i:i + 1], gens[l:l + 1])[0]
    F = _disc_offsets(pres, layers)
    nodes = matmul_np(np.repeat(V, len(F), axis=0), np.tile(F, (n + 1, 1)))
    keys, idx = np.unique(matrix_keys_np(nodes), return_index=True)
    nodes = nodes[idx]
    N = len(keys)
    # adjacency inside the corridor
    nb = matmul_np(np.repeat(nodes, L, axis=0), np.tile(gens, (N, 1)))
    nk = matrix_keys_np(nb)
    pos = np.minimum(np.searchsorted(keys, nk), N - 1)
    adj = np.where(keys[pos] == nk, pos, -1).reshape(N, L)
    start = int(np.searchsorted(keys, matrix_keys_np(V[:1])[0]))
    target = int(np.searchsorted(keys, matrix_keys_np(V[-1:])[0]))
    parent = np.full(N, -1, dtype=np.int64)
    plet = np.full(N, -1, dtype=np.int64)
    seen = np.zeros(N, dtype=bool)
    seen[start] = True
    frontier = np.array([start])
    while not seen[target]:
        if len(frontier) == 0:
            raise RuntimeError("corridor search failed")
        cand = adj[frontier].reshape(-1)
        src = np.repeat(frontier, L)
        let = np.tile(np.arange(L), len(frontier))
        ok = cand >= 0
        ok[ok] = ~seen[cand[ok]]
        cand, src, let = cand[ok], src[ok], let[ok]
        # first occurrence in (frontier rank, letter) order wins
        uniq, first = np.unique(cand, return_index=True)
        first.sort()
        nxt = cand[first]
        parent[nxt] = src[first]
        plet[nxt] = let[first]
        seen[nxt] = True
        frontier = nxt          # already in ShortLex order of their words
    out = []
    v = target
    while v != start:
        out.append(int(plet[v]))
        v = int(parent[v])
    return tuple(reversed(out))


def words_equal(w1, w2, pres):
    from .words import is_identity
    from .presentation import inverse_word
    return is_identity(tuple(w1) + inverse_word(tuple(w2)), pres)
