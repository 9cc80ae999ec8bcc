"""Closed forms for the covering walk on the free group F_2g.

The uniform walk on Gamma_g lifts to the uniform walk on the 4g-regular
tree.  There every step is toward the root with probability p = 1/4g and
away from it with probability q = 1 - p, which gives

    F(r) = pr + qr F(r)^2,   F(r) = (1 - sqrt(1 - 4pq r^2)) / (2qr),
    G(r) = 1 / (1 - r F(r)) = 2q / (2q - 1 + sqrt(1 - 4pq r^2)),
    F(1, x) = F^|x|,          R^2 = 1 / (4pq) = 4g^2 / (4g - 1).

Everything is evaluated with mpmath so values near the branch point keep
their digits.
"""
from dataclasses import dataclass
from fractions import Fraction
import math

import mpmath as mp

DPS = 50


class DomainError(ValueError):
    pass


def catalan(n):
    if n < 0:
        raise ValueError("n must be >= 0")
    return math.comb(2 * n, n) // (n + 1)


def catalan_gf(z):
    """sum_n catalan(n) z^n = (1 - sqrt(1 - 4z)) / (2z) for 0 <= z <= 1/4."""
    with mp.workdps(DPS):
        z = mp.mpf(z) if not isinstance(z, Fraction) else mp.mpf(z.numerator) / z.denominator
        if z < 0:
            raise DomainError("z must be >= 0")
        if z > mp.mpf(1) / 4:
            raise DomainError("z beyond the singularity 1/4")
        if z == 0:
            return mp.mpf(1)
        return (1 - mp.sqrt(1 - 4 * z)) / (2 * z)


def catalan_partial_sum(z, n):
    """sum_{k<=n} catalan(k) z^k in exact rational arithmetic when z is rational."""
    z = Fraction(z)
    s = Fraction(0)
    zk = Fraction(1)
    for k in range(n + 1):
        s += catalan(k) * zk
        zk *= z
    return s


@dataclass(frozen=True)
class CoveringWalkParams:
    genus: int

    def __post_init__(self):
        if self.genus < 1:
            raise ValueError("genus must be >= 1")

    @property
    def p(self):
        return Fraction(1, 4 * self.genus)

    @property
    def q(self):
        return 1 - self.p

    def radius(self):
        """R~ = sqrt(4g^2 / (4g - 1))."""
        with mp.workdps(DPS):
            return mp.sqrt(mp.mpf(4 * self.genus ** 2) / (4 * self.genus - 1))


@dataclass(frozen=True)
class OracleValues:
    r: object
    genus: int
    F: object
    G: object
    R: object

    def first_passage(self, m):
        """F~_r(1, x) for |x| = m."""
        return self.F ** m

    def green(self, m):
        """G~_r(1, x) for |x| = m."""
        return self.G * self.F ** m


def _disc(pp, qq, r, R):
    # 1 - 4pq r^2 written as 4pq (R^2 - r^2) so it is exactly 0 at r = R
    return 4 * pp * qq * (R * R - r * r)


def covering_oracle(r, g):
    """F~_r and G~_r of the covering walk (physical root: F~_0 = 0)."""
    par = CoveringWalkParams(g)
    with mp.workdps(DPS):
        pp = mp.mpf(1) / (4 * g)
        qq = 1 - pp
        R = par.radius()
        r = mp.mpf(r)
        if r < 0:
            raise DomainError("r must be >= 0")
        if r > R * (1 + mp.mpf(10) ** (-DPS + 5)):
            raise DomainError(f"r = {r} beyond R~ = {R}")
        r = min(r, R)
        s = mp.sqrt(max(_disc(pp, qq, r, R), 0))
        # (1 - s) / (2qr) rationalized; the plain form cancels for small r
        F = 2 * pp * r / (1 + s)
        G = 2 * qq / (2 * qq - 1 + s)
        return OracleValues(r, g, F, G, R)


def green_derivative(r, g):
    """dG~/dr = 8 p q^2 r / (s (2q - 1 + s)^2), s = sqrt(1 - 4pq r^2)."""
    with mp.workdps(DPS):
        pp = mp.mpf(1) / (4 * g)
        qq = 1 - pp
        R = CoveringWalkParams(g).radius()
        r = mp.mpf(r)
        s = mp.sqrt(_disc(pp, qq, r, R))
        if s == 0:
            raise DomainError("derivative is infinite at R~")
        return 8 * pp * qq ** 2 * r / (s * (2 * qq - 1 + s) ** 2)


def tree_sphere_size(m, g):
    return 1 if m == 0 else 4 * g * (4 * g - 1) ** (m - 1)


def tree_eta(r, g):
    """eta~(r) = sum_x G~(1,x)^2 = G~^2 (1 + 4g F~^2 / (1 - (4g-1) F~^2))."""
    o = covering_oracle(r, g)
    with mp.workdps(DPS):
        x = (4 * g - 1) * o.F ** 2
        if x >= 1:
            return mp.inf
        return o.G ** 2 * (1 + 4 * g * o.F ** 2 / (1 - x))


def tree_pressure(theta, r, g):
    """Growth rate of sum_{|x|=m} G~(1,x)^theta: log((4g - 1) F~^theta)."""
    o = covering_oracle(r, g)
    with mp.workdps(DPS):
        return mp.log(4 * g - 1) + theta * mp.log(o.F)


def tree_level_count(eps, r, g):
    """#{x : G~_r(1,x) >= eps} on the tree."""
    o = covering_oracle(r, g)
    with mp.workdps(DPS):
        eps = mp.mpf(eps)
        if eps > o.G:
            return 0
        if o.F == 0:
            return 1
        mmax = int(mp.floor(mp.log(eps / o.G) / mp.log(o.F) + mp.mpf(10) ** -30))
        return sum(tree_sphere_size(m, g) for m in range(mmax + 1))


def tree_return_probabilities(nmax, g):
    """Exact P{X_n = 1} on the 4g-regular tree, n = 0..nmax (Fractions)."""
    p = Fraction(1, 4 * g)
    q = 1 - p
    dist = {0: Fraction(1)}
    out = [Fraction(1)]
    for _ in range(nmax):
        nd = {}
        for m, w in dist.items():
            if m == 0:
                nd[1] = nd.get(1, 0) + w
            else:
                nd[m - 1] = nd.get(m - 1, 0) + w * p
                nd[m + 1] = nd.get(m + 1, 0) + w * q
        dist = nd
        out.append(dist.get(0, Fraction(0)))
    return out


def return_prob_lower_bound(n, g, exact=False):
    """catalan(n) ((4g-1)/4g)^n (1/4g)^n, a lower bound for P{X_2n = 1}."""
    if n < 0:
        raise ValueError("n must be >= 0")
    val = catalan(n) * Fraction(4 * g - 1, 4 * g) ** n * Fraction(1, 4 * g) ** n
    return val if exact else float(val)


def branch_gap(r, g):
    """G~_R~ - G~_r, the quantity with the square-root singularity."""
    o = covering_oracle(r, g)
    top = covering_oracle(o.R, g)
    with mp.workdps(DPS):
        return top.G - o.G
