"""Graph symmetries of the Cayley graph fixing the identity.

For the surface presentation the Cayley graph is the 1-skeleton of the
regular {4g,4g} tiling, so the stabilizer of a vertex is dihedral of order
8g, acting on the link (the cyclic order of the 4g edge letters around a
vertex).  Only 2g of these symmetries preserve edge labels (those are group
automorphisms); the others relabel edges vertex by vertex.  Each symmetry
is realized as a letter transducer: the state is a dihedral element acting
on the link, it rewrites the current letter, and the next state is forced by
the requirement that the edge arrives with the inverse letter.

All symmetries preserve the uniform step distribution, so the simple random
walk is exactly lumpable over their orbits.
"""
import numpy as np

from .presentation import inverse_word


def link_cycle(pres):
    """Letters in cyclic link order, starting at letter 0."""
    n = pres.ngens
    nbrs = {l: [] for l in range(n)}
    for pair in pres.link_pairs():
        x, y = tuple(pair)
        nbrs[x].append(y)
        nbrs[y].append(x)
    if any(len(v) != 2 for v in nbrs.values()):
        raise ValueError("link is not a cycle")
    cyc = [0]
    prev, cur = None, 0
    while True:
        a, b = nbrs[cur]
        nxt = b if a == prev else a
        if nxt == 0:
            break
        cyc.append(nxt)
        prev, cur = cur, nxt
    if len(cyc) != n:
        raise ValueError("link is not a single cycle")
    return cyc


class SymmetryTransducer:
    """Dihedral link symmetries as a transducer.

    state index t in [0, 8g): t = s * 4g + k meaning position j -> k + (-1)^s j.
    out[t, l]: image letter; nxt[t, l]: next state; compose[t, u]: index of
    symmetry t after symmetry u (as maps of the graph fixing 1).
    """

    def __init__(self, pres, subgroup=None):
        self.pres = pres
        n = pres.ngens
        if not pres.surface:
            # only the identity; free balls use the radial quotient
            self.order = 1
            self.out = np.arange(n, dtype=np.int64)[None, :].copy()
            self.nxt = np.zeros((1, n), dtype=np.int64)
            self.compose = np.zeros((1, 1), dtype=np.int64)
            self.members = np.array([0], dtype=np.int64)
            return
        cyc = link_cycle(pres)
        pos = np.empty(n, dtype=np.int64)
        pos[cyc] = np.arange(n)
        self.cycle = cyc
        m = 2 * n
        out = np.empty((m, n), dtype=np.int64)
        nxt = np.empty((m, n), dtype=np.int64)
        for t in range(m):
            s, k = divmod(t, n)
            sign = -1 if s else 1
            for l in range(n):
                img = cyc[(k + sign * pos[l]) % n]
                out[t, l] = img
                # next state: same orientation, sends l^-1 to img^-1
                k2 = (pos[img ^ 1] - sign * pos[l ^ 1]) % n
                nxt[t, l] = s * n + k2
        self.out, self.nxt = out, nxt
        comp = np.empty((m, m), dtype=np.int64)
        for t in range(m):
            for u in range(m):
                # link action at the identity determines the symmetry
                img = [out[t, out[u, l]] for l in range(n)]
                match = [v for v in range(m) if list(out[v]) == img]
                comp[t, u] = match[0]
        self.compose = comp
        self.order = m
        self._check(pres)
        members = np.arange(m) if subgroup is None else np.asarray(sorted(subgroup))
        self.members = members.astype(np.int64)

    def _check(self, pres):
        # every symmetry must send relator loops to relator loops and return
        # to its starting state after going around a face
        rels = pres.relator_rotations()
        relset = set(rels)
        for t in range(self.order):
            for w in rels:
                img, end = self.apply(t, w)
                if tuple(img) not in relset or end != self._state_after_loop(t):
                    raise AssertionError("link symmetry does not extend")

    def _state_after_loop(self, t):
        return t

    def apply(self, t, w):
        """Image word of w under symmetry t, and the final transducer state."""
        img = []
        for l in w:
            img.append(int(self.out[t, l]))
            t = int(self.nxt[t, l])
        return tuple(img), t

    def label_preserving(self):
        """Symmetries whose transducer keeps one state (group automorphisms)."""
        res = []
        for t in range(self.order):
            if all(self.nxt[t, l] == t for l in range(self.out.shape[1])):
                res.append(t)
        return res

    def preserving(self, probs):
        """Largest set of symmetries closed under transitions preserving probs."""
        probs = np.asarray(probs, dtype=float)
        good = {t for t in range(self.order)
                if np.allclose(probs[self.out[t]], probs)}
        changed = True
        while changed:
            changed = False
            for t in list(good):
                if any(int(self.nxt[t, l]) not in good for l in range(len(probs))):
                    good.discard(t)
                    changed = True
        return sorted(good)
