"""Green fields G_r(1, .) on a ball by operator iteration.

The mass vector v_n = delta_1 P_M^n (P_M the walk killed on leaving the
ball) does not depend on r, so one sweep accumulates sum_n r^n v_n for a
whole grid of r at once, together with the derivative sum_n n r^(n-1) v_n
and the return probabilities.

Two error terms are attached to every field:

* tail: a rigorous bound on the series remainder past the horizon N.  With
  w = v_N + c v_{N+1} (c > 0) and Lam = max_i (wP)_i / w_i we have
  wP <= Lam w and v_{N+1} <= w / c, hence
  sum_{n>N} r^n v_n <= r^(N+1) w / (c (1 - r Lam)) componentwise.  The
  Cayley graphs here are bipartite, so c = 1 is useless (the ratio is 1 on
  one parity class); c is tuned to balance the two classes.
* boundary: the ball truncation.  Values only increase with the radius;
  the missing part is estimated from three nested radii by geometric
  extrapolation.  This estimate is not a proof.
"""
from dataclasses import dataclass, field

import math

import numpy as np

from . import kernels


class DivergenceError(ArithmeticError):
    """Partial sums blow up: r is above the radius of convergence."""


@dataclass
class Sweep:
    rs: np.ndarray
    horizon: int
    mass: np.ndarray              # (K, n) accumulated orbit masses
    dmass: np.ndarray | None      # (K, n) d/dr of the same series
    returns: np.ndarray           # P_M^n(1, 1), n = 0..horizon
    moments: np.ndarray           # exact p_{2n}(1,1) for n <= radius
    tail: np.ndarray              # (K, n) rigorous tail bound (masses)
    lam: float                    # Collatz-Wielandt ratio at the horizon
    limit: int


def _orbit_sizes(ball):
    return np.asarray(ball.orbit_size, dtype=np.float64)


def sweep(ball, rs, horizon=None, tol=1e-13, max_horizon=20000, deriv=False,
          limit=None, start=None, cap=1e15, use_numba=None):
    """Accumulate sum_n r^n delta_1 P^n for every r in rs.

    horizon=None runs until the tail bound is below tol times the value at
    the identity for every r (or max_horizon is hit).  limit truncates the
    ball to rows < limit (nested sub-balls).  start replaces delta_1 by an
    arbitrary initial mass vector.
    """
    rs = np.atleast_1d(np.asarray(rs, dtype=np.float64))
    if np.any(rs < 0):
        raise ValueError("r must be >= 0")
    op = ball.op
    n = op.n
    limit = n if limit is None else int(limit)
    arrays = kernels.operator_arrays(op)
    sizes = _orbit_sizes(ball)
    K = len(rs)
    mass = np.zeros((K, n))
    dmass = np.zeros((K, n)) if deriv else None
    if start is None:
        v = np.zeros(n)
        v[0] = 1.0
    else:
        v = np.array(start, dtype=np.float64)
        v[limit:] = 0.0
    R = ball.radius
    returns = [v[0]]
    moments = [float(np.sum(v * v / sizes))] if start is None else []
    # v is stored as (true mass) / S and pw = r^step S, so long runs near the
    # radius of convergence neither underflow v nor overflow r^step
    S = 1.0
    pw = np.ones(K)
    nmax = max_horizon if horizon is None else int(horizon)
    kernels.accumulate(mass, v, pw, use_numba=use_numba)
    step = 0
    while True:
        nv = kernels.push(op, v, limit=limit, arrays=arrays, use_numba=use_numba)
        if step >= nmax or (horizon is None and step >= 2 * R + 2 and step % 16 == 0):
            nn = kernels.push(op, nv, limit=limit, arrays=arrays, use_numba=use_numba)
            lam, scale, c = _cw_bound(v, nv, nn, rs, step, use_numba, pw * rs)
            w = v + c * nv
            if step >= nmax:
                break
            pos = mass[:, :limit] > 0
            rel = np.where(pos, scale[:, None] * w[None, :limit] / np.where(pos, mass[:, :limit], 1.0), 0.0)
            if np.all(rel <= tol):
                break
        if mass[:, 0].max() > cap:
            raise DivergenceError("partial sums exceed the cap; r is beyond the radius of convergence")
        step += 1
        v = nv
        pw = pw * rs
        vmax = v.max()
        if 0 < vmax < _TINY:
            e = -int(np.frexp(vmax)[1])
            v = np.ldexp(v, e)
            pw = np.ldexp(pw, -e)
            S = math.ldexp(S, -e)
        kernels.accumulate(mass, v, pw, use_numba=use_numba)
        if deriv:
            with np.errstate(divide="ignore", invalid="ignore"):
                dc = np.where(rs > 0, step * pw / np.where(rs > 0, rs, 1.0), S if step == 1 else 0.0)
            kernels.accumulate(dmass, v, dc, use_numba=use_numba)
        returns.append(v[0] * S)
        if start is None and step <= R:
            moments.append(float(np.sum(v * v / sizes)) * S * S)
    if np.isfinite(lam) and np.any(rs * lam >= 1):
        bad = rs[rs * lam >= 1]
        raise DivergenceError(
            f"series does not converge on the truncated ball for r = {bad.tolist()} (1/Lam = {1 / lam:.6g})")
    tail = scale[:, None] * w[None, :]
    return Sweep(rs, step, mass, dmass, np.asarray(returns), np.asarray(moments), tail, lam, limit)


def _cw_ratio(v0, v1, v2, c, use_numba=None):
    return float(kernels.cw_ratios(v0, v1, v2, [c], use_numba)[0])


_TINY = 2.0 ** -600


def _cw_bound(v0, v1, v2, rs, step, use_numba=None, pw_next=None):
    """Best Lam over c and the tail factors r^(N+1) / (c (1 - r Lam)).

    pw_next replaces r^(N+1) when the vectors are stored rescaled.
    """
    pos = v0 > 0
    mu = float(np.max(v2[pos] / v0[pos])) if pos.any() else 0.0
    c0 = 1.0 / np.sqrt(mu) if mu > 0 else 1.0
    cs = c0 * np.geomspace(0.25, 4.0, 41)
    lams = kernels.cw_ratios(v0, v1, v2, cs, use_numba)
    i = int(np.argmin(lams))
    best = (float(lams[i]), float(cs[i]))
    lam, c = best
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        top = rs ** (step + 1) if pw_next is None else pw_next
        scale = np.where(rs * lam < 1, top / (c * (1 - rs * lam)), np.inf)
    scale = np.where(rs == 0, 0.0, scale)
    return lam, scale, c


@dataclass
class GreenField:
    """Truncated G_r(1, x) on a ball with its error terms.

    values[row] is G_r(1, x) for any element x of the row's orbit.  tail is
    rigorous; boundary is a nested-radius estimate (inf where unavailable,
    None when not computed).
    """
    r: float
    ball: object
    values: np.ndarray
    horizon: int
    tail: np.ndarray
    boundary: np.ndarray | None = None
    lam: float = 0.0
    deriv: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def radius(self):
        return self.ball.radius

    def value(self, w):
        """G_r(1, x) for a word (or NormalWord) x."""
        row = self.ball.find(tuple(w))
        if row < 0:
            raise KeyError("element outside the ball")
        return float(self.values[row])

    def error(self, rows=None):
        """Tail bound plus boundary estimate (upper error of each value)."""
        e = self.tail.copy()
        if self.boundary is not None:
            e = e + self.boundary
        return e if rows is None else e[rows]

    @property
    def certificate(self):
        """Largest error at the identity (used by the scalar checks)."""
        return float(self.error()[0])

    def sphere_sums(self, theta=1.0):
        """sum_{x in S_m} G_r(1,x)^theta for m = 0..radius."""
        sizes = _orbit_sizes(self.ball)
        ptr = self.ball.sphere_ptr
        contrib = sizes * self.values ** theta
        return np.array([contrib[ptr[m]:ptr[m + 1]].sum() for m in range(self.radius + 1)])

    def eta(self):
        return float(self.sphere_sums(2.0).sum())

    def sphere_max(self):
        ptr = self.ball.sphere_ptr
        return np.array([self.values[ptr[m]:ptr[m + 1]].max() for m in range(self.radius + 1)])


def _boundary_estimate(ball, rs, mass_full, horizon, tol, use_numba):
    """Geometric extrapolation in the radius from balls M-2, M-1, M."""
    R = ball.radius
    n = ball.n_rows
    K = len(rs)
    out = np.full((K, n), np.inf)
    if R < 3:
        return out
    ptr = ball.sphere_ptr
    m1 = sweep(ball, rs, horizon, tol=tol, limit=int(ptr[R]), use_numba=use_numba).mass
    m2 = sweep(ball, rs, horizon, tol=tol, limit=int(ptr[R - 1]), use_numba=use_numba).mass
    inner = int(ptr[R - 1])
    out[:, :inner] = geometric_extrapolation(mass_full[:, :inner], m1[:, :inner], m2[:, :inner])
    return out


def geometric_extrapolation(full, m1, m2, qmax=0.95):
    """Missing mass beyond radius M from values at radii M, M-1, M-2.

    With d1 = full - m1, d2 = m1 - m2 and q = d1 / d2 (clipped to
    [0, qmax]) the estimate is d1 q / (1 - q).
    """
    d1 = full - m1
    d2 = m1 - m2
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(d2 > 0, d1 / d2, 0.0)
    q = np.clip(q, 0.0, qmax)
    return np.maximum(d1, 0.0) * q / (1 - q)


def green_fields(rs, ball, horizon=None, tol=1e-13, boundary=False, deriv=False,
                 use_numba=None):
    """One GreenField per r in rs, all from a single sweep."""
    rs = np.atleast_1d(np.asarray(rs, dtype=np.float64))
    sw = sweep(ball, rs, horizon, tol=tol, deriv=deriv, use_numba=use_numba)
    sizes = _orbit_sizes(ball)
    bnd = None
    if boundary:
        bnd = _boundary_estimate(ball, rs, sw.mass, horizon, tol, use_numba) / sizes
    out = []
    for k, r in enumerate(rs):
        f = GreenField(float(r), ball, sw.mass[k] / sizes, sw.horizon, sw.tail[k] / sizes,
                       None if bnd is None else bnd[k], sw.lam,
                       None if sw.dmass is None else sw.dmass[k] / sizes,
                       meta={"returns": sw.returns, "moments": sw.moments})
        out.append(f)
    return out


def green_field(r, ball, horizon=None, tol=1e-13, boundary=False, deriv=False,
                use_numba=None):
    """G_r(1, .) on the ball by operator iteration (absorbing boundary).

    r = 0 gives the indicator of the identity; values are nondecreasing in
    both the horizon and the radius.
    """
    return green_fields([r], ball, horizon, tol, boundary, deriv, use_numba)[0]
