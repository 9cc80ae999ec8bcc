"""Surface and free group presentations.

Letters are small integers.  For i = 0..g-1 the four letters
4i, 4i+1, 4i+2, 4i+3 stand for a_{i+1}, a_{i+1}^-1, b_{i+1}, b_{i+1}^-1, so
the inverse of letter l is l ^ 1 and the integer order is the ShortLex
generator order a1 < a1^-1 < b1 < b1^-1 < a2 < ...
"""
import re
from dataclasses import dataclass, field

import numpy as np


class WordError(ValueError):
    pass


def inverse_letter(l):
    return l ^ 1


def inverse_word(w):
    return tuple(l ^ 1 for l in reversed(w))


def letter_name(l):
    i, k = divmod(int(l), 4)
    base = "ab"[k // 2]
    return (base.upper() if k % 2 else base) + str(i + 1)


_TOKEN = re.compile(r"\s*([abAB])(\d+)(\^-1|\^\(-1\)|⁻¹|')?\s*")


@dataclass(frozen=True)
class GroupPresentation:
    """Gamma_g = <a_i, b_i | prod [a_i, b_i]> or, with surface=False, F_{2g}."""

    genus: int
    surface: bool = True
    relator: tuple = field(init=False)
    ngens: int = field(init=False)

    def __post_init__(self):
        if self.genus < 1:
            raise ValueError("genus must be >= 1")
        object.__setattr__(self, "ngens", 4 * self.genus)
        rel = ()
        if self.surface:
            rel = tuple(x for i in range(self.genus)
                        for x in (4 * i, 4 * i + 2, 4 * i + 1, 4 * i + 3))
        object.__setattr__(self, "relator", rel)

    @property
    def letters(self):
        return tuple(range(self.ngens))

    def name(self):
        kind = "surface" if self.surface else "free"
        return f"{kind}{self.genus}"

    # ---- parsing / printing -------------------------------------------------

    def parse(self, text):
        """Parse 'a1 b1 A1 B1', 'a1 b1^-1' or 'a1b1A1B1' into a letter tuple."""
        if isinstance(text, (tuple, list, np.ndarray)):
            w = tuple(int(x) for x in text)
            self.check(w)
            return w
        text = text.strip()
        if text in ("", "1", "e"):
            return ()
        out = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                raise WordError(f"cannot parse letter at {text[pos:]!r}")
            base, idx, inv = m.group(1), int(m.group(2)), m.group(3)
            if not 1 <= idx <= self.genus:
                raise WordError(f"unknown generator {base}{idx} for genus {self.genus}")
            l = 4 * (idx - 1) + (0 if base.lower() == "a" else 2)
            if base.isupper():
                l ^= 1
            if inv:
                l ^= 1
            out.append(l)
            pos = m.end()
        return tuple(out)

    def format(self, w):
        if len(w) == 0:
            return "1"
        return " ".join(letter_name(l) for l in w)

    def check(self, w):
        for l in w:
            if not (0 <= int(l) < self.ngens):
                raise WordError(f"unknown letter {l!r}")

    # ---- relator combinatorics ----------------------------------------------

    def relator_rotations(self):
        """All cyclic rotations of the relator and of its inverse (8g words)."""
        if not self.surface:
            return []
        r = self.relator
        ri = inverse_word(r)
        n = len(r)
        return [r[k:] + r[:k] for k in range(n)] + [ri[k:] + ri[:k] for k in range(n)]

    def successor_tables(self):
        """succ[0][l], succ[1][l]: letter following l cyclically in r, r^-1."""
        n = self.ngens
        succ = np.full((2, n), -1, dtype=np.int64)
        if self.surface:
            for s, rel in enumerate((self.relator, inverse_word(self.relator))):
                for j in range(n):
                    succ[s, rel[j]] = rel[(j + 1) % n]
        return succ

    def link_pairs(self):
        """Unordered letter pairs {x, y} such that x^-1 y occurs cyclically in r^{+-1}.

        These are the edges of the vertex link: two letters leaving a vertex
        along consecutive sides of one relator disc.  For g=2 the link is the
        cycle a1-B1-A1-b1-a2-B2-A2-b2.
        """
        pairs = set()
        if not self.surface:
            return pairs
        succ = self.successor_tables()
        for l in range(self.ngens):
            y = int(succ[0, l])
            pairs.add(frozenset((l ^ 1, y)))
        return pairs

    def consecutive_in_relator(self, x, y):
        """True when the two-letter word x y is a cyclic subword of r or r^-1."""
        if not self.surface:
            return False
        succ = self.successor_tables()
        return bool(succ[0, x] == y or succ[1, x] == y)

    def automorphisms(self):
        """Letter permutations that induce group automorphisms.

        For the surface group these are the maps sending r letter-wise to a
        cyclic rotation of r or r^-1 while commuting with inversion.  There
        are exactly 2g of them: powers of the plain cyclic shift
        a_i -> a_{i+1}, b_i -> b_{i+1} (indices mod g) composed with the
        reversal a_i <-> b_{g+1-i}.  For the free group every signed permutation of the
        2g free generators qualifies; only the identity is returned there
        since free balls are handled by the radial quotient.
        """
        n = self.ngens
        ident = tuple(range(n))
        if not self.surface:
            return [ident]
        r = self.relator
        found = []
        for target in (r, inverse_word(r)):
            for k in range(n):
                rot = target[k:] + target[:k]
                phi = [0] * n
                for j in range(n):
                    phi[r[j]] = rot[j]
                if all(phi[l ^ 1] == phi[l] ^ 1 for l in range(n)):
                    found.append(tuple(phi))
        found = sorted(set(found))
        assert ident in found
        found.remove(ident)
        return [ident] + found


def apply_perm(phi, w):
    return tuple(phi[l] for l in w)


def shift_automorphism(pres, signed=False):
    """a_i -> a_{i+1}, b_i -> b_{i+1} with indices mod g.

    signed=True sends a_g -> a_1^-1, b_g -> b_1^-1 instead; that letter map
    does not preserve the relator and is kept only so the tests can show it.
    """
    g = pres.genus
    phi = [0] * pres.ngens
    for i in range(g):
        for k in (0, 2):
            src = 4 * i + k
            if i + 1 < g:
                dst = 4 * (i + 1) + k
            else:
                dst = (k ^ 1) if signed else k
            phi[src] = dst
            phi[src ^ 1] = dst ^ 1
    return tuple(phi)


def reversal_automorphism(pres):
    """a_i <-> b_{g+1-i} (exponents kept)."""
    g = pres.genus
    phi = [0] * pres.ngens
    for i in range(g):
        j = g - 1 - i
        phi[4 * i] = 4 * j + 2
        phi[4 * i + 1] = 4 * j + 3
        phi[4 * i + 2] = 4 * j
        phi[4 * i + 3] = 4 * j + 1
    return tuple(phi)
