"""Random representations into SL(2, F_p) used as element hashes.

A representation rho of Gamma_g (or F_2g) into SL(2, F_p) with p = 2^31 - 1
sends every word to a 2x2 matrix; equal elements give equal matrices.  A
random choice is injective on any ball we can store with overwhelming
probability.  The ball builders still check every key match against the
stored matrices, and tests cross-check small balls against Dehn's algorithm.
"""
import random

import numpy as np

PRIME = 2**31 - 1


def _mul(A, B, p=PRIME):
    a, b, c, d = A
    e, f, g, h = B
    return ((a * e + b * g) % p, (a * f + b * h) % p,
            (c * e + d * g) % p, (c * f + d * h) % p)


def _inv(A, p=PRIME):
    a, b, c, d = A
    return (d % p, (-b) % p, (-c) % p, a % p)


def _comm(A, B):
    return _mul(_mul(_mul(A, B), _inv(A)), _inv(B))


def _rand_sl2(rng, p=PRIME):
    while True:
        a, b, c = rng.randrange(1, p), rng.randrange(p), rng.randrange(p)
        d = (1 + b * c) * pow(a, -1, p) % p
        return (a, b, c, d)


def _nullspace_mod(M, p=PRIME):
    """Basis of the right nullspace of an integer matrix over F_p."""
    M = [[x % p for x in row] for row in M]
    rows, cols = len(M), len(M[0])
    piv_cols = []
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if M[i][c]), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = pow(M[r][c], -1, p)
        M[r] = [x * inv % p for x in M[r]]
        for i in range(rows):
            if i != r and M[i][c]:
                f = M[i][c]
                M[i] = [(x - f * y) % p for x, y in zip(M[i], M[r])]
        piv_cols.append(c)
        r += 1
        if r == rows:
            break
    free = [c for c in range(cols) if c not in piv_cols]
    basis = []
    for fc in free:
        v = [0] * cols
        v[fc] = 1
        for i, pc in enumerate(piv_cols):
            v[pc] = (-M[i][fc]) % p
        basis.append(v)
    return basis


def _solve_commutator(C, rng, p=PRIME, tries=10000):
    """Find A, B in SL(2, p) with A B A^-1 B^-1 = C."""
    c11, c12, c21, c22 = C
    for _ in range(tries):
        a, b = rng.randrange(1, p), rng.randrange(p)
        # need tr(A^-1 C) = tr(A); with d = (1 + bc)/a this is linear in c
        coef = (b * (c11 - 1) - a * c12) % p
        if coef == 0:
            continue
        rhs = (-(c11 - 1) + a * b * c21 - a * a * (c22 - 1)) % p
        c = rhs * pow(coef, -1, p) % p
        d = (1 + b * c) * pow(a, -1, p) % p
        A = (a, b, c, d)
        if (A[0] + A[3]) % p in (2, p - 2):
            continue
        # A B - C B A = 0, linear in the entries of B
        rows = []
        for i in range(2):
            for j in range(2):
                row = [0] * 4
                for k in range(2):
                    # (A B)_{ij} = sum_k A_{ik} B_{kj}
                    row[2 * k + j] += A[2 * i + k]
                # (C B A)_{ij} = sum_{k,l} C_{ik} B_{kl} A_{lj}
                for k in range(2):
                    for l in range(2):
                        row[2 * k + l] -= C[2 * i + k] * A[2 * l + j]
                rows.append(row)
        basis = _nullspace_mod(rows, p)
        if not basis:
            continue
        for _ in range(8):
            coeffs = [rng.randrange(p) for _ in basis]
            Bv = [sum(cf * v[t] for cf, v in zip(coeffs, basis)) % p for t in range(4)]
            det = (Bv[0] * Bv[3] - Bv[1] * Bv[2]) % p
            if det == 0 or pow(det, (p - 1) // 2, p) != 1:
                continue
            # scale by s with s^2 = 1/det; p = 3 mod 4 so sqrt is a power
            s2 = pow(det, -1, p)
            s = pow(s2, (p + 1) // 4, p)
            B = tuple(x * s % p for x in Bv)
            if _comm(A, B) == tuple(x % p for x in C):
                return A, B
    raise RuntimeError("could not solve the commutator equation")


class HashRep:
    """rho: letters -> SL(2, F_p).  gens[l] is the matrix of letter l as (a, b, c, d)."""

    def __init__(self, pres, seed=20240601):
        self.pres = pres
        self.p = PRIME
        rng = random.Random(seed)
        g = pres.genus
        mats = []
        if pres.surface and g == 1:
            # Z^2: two commuting unipotents, injective on small balls
            x, y = rng.randrange(1, PRIME), rng.randrange(1, PRIME)
            mats = [((1, x, 0, 1), (1, y, 0, 1))]
        elif pres.surface:
            acc = (1, 0, 0, 1)
            for _ in range(g - 1):
                A, B = _rand_sl2(rng), _rand_sl2(rng)
                mats.append((A, B))
                acc = _mul(acc, _comm(A, B))
            A, B = _solve_commutator(_inv(acc), rng)
            mats.append((A, B))
        else:
            mats = [(_rand_sl2(rng), _rand_sl2(rng)) for _ in range(g)]
        gens = []
        for A, B in mats:
            gens += [A, _inv(A), B, _inv(B)]
        self.gens = gens
        self.gens_array = np.array(gens, dtype=np.int64)
        if pres.surface:
            assert self.word_matrix(pres.relator) == (1, 0, 0, 1)

    def word_matrix(self, w):
        M = (1, 0, 0, 1)
        for l in w:
            M = _mul(M, self.gens[l])
        return M

    def key(self, w):
        return matrix_key(self.word_matrix(w))


_MASK = (1 << 64) - 1


def _splitmix(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def matrix_key(M):
    """64-bit key of a matrix; mirrors the vectorized and numba versions."""
    a, b, c, d = (int(x) for x in M)
    return _splitmix(_splitmix((a << 31) | b) ^ ((c << 31) | d))


def matrix_keys_np(M):
    """Vectorized matrix_key for an (n, 4) int64 array; returns uint64."""
    M = np.asarray(M, dtype=np.int64)
    a, b, c, d = (M[:, k].astype(np.uint64) for k in range(4))
    with np.errstate(over="ignore"):
        x = _splitmix_np((a << np.uint64(31)) | b)
        return _splitmix_np(x ^ ((c << np.uint64(31)) | d))


def _splitmix_np(x):
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def matmul_np(A, B, p=PRIME):
    """Row-wise 2x2 products of (n, 4) int64 arrays modulo p."""
    a, b, c, d = A[:, 0], A[:, 1], A[:, 2], A[:, 3]
    e, f, g, h = B[:, 0], B[:, 1], B[:, 2], B[:, 3]
    out = np.empty(A.shape, dtype=np.int64)
    out[:, 0] = (a * e % p + b * g % p) % p
    out[:, 1] = (a * f % p + b * h % p) % p
    out[:, 2] = (c * e % p + d * g % p) % p
    out[:, 3] = (c * f % p + d * h % p) % p
    return out


def matinv_np(A, p=PRIME):
    out = np.empty_like(A)
    out[:, 0] = A[:, 3]
    out[:, 1] = (-A[:, 1]) % p
    out[:, 2] = (-A[:, 2]) % p
    out[:, 3] = A[:, 0]
    return out
