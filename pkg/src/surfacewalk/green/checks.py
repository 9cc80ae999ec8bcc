"""First-passage, restricted and avoidance functions, and the identity checks.

Every truncated value here is a lower bound for the true one (paths are
only ever dropped), and comes with an upper error: the rigorous series
tail plus, when computed, the heuristic boundary estimate.  Margins of the
inequality suite are evaluated on these intervals, so a negative certified
margin means the engine contradicts a theorem.
"""
from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from ..group.presentation import inverse_word
from ..group.rep import matinv_np, matmul_np, matrix_keys_np
from . import kernels
from .field import DivergenceError, _cw_bound, geometric_extrapolation, green_fields


class InternalConsistencyError(RuntimeError):
    """A certified violation of a proven inequality: a bug signal."""


class CertificateWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Certified:
    """value <= truth <= value + error (error may be inf)."""
    value: float
    error: float
    weak: bool = False

    def __float__(self):
        return float(self.value)

    @property
    def upper(self):
        return self.value + self.error


# ---- first passage ------------------------------------------------------------

def _interval(fld, row):
    if row < 0:
        raise KeyError("element outside the ball")
    return float(fld.values[row]), float(fld.error()[row])


def first_passage(r, x, y, fld, rel_tol=1e-3):
    """F_r(x, y) = G_r(1, x^-1 y) / G_r(1, 1), with its interval.

    x, y are words; fld is a GreenField at this r.  The returned error is
    the width of [a / (b + eb), (a + ea) / b] above the point value.
    """
    if abs(fld.r - r) > 1e-14 * max(1.0, r):
        raise ValueError("field computed at a different r")
    a, ea = _interval(fld, fld.ball.find(inverse_word(tuple(x)) + tuple(y)))
    b, eb = _interval(fld, 0)
    val = a / b
    hi = (a + ea) / b
    lo = a / (b + eb)
    err = max(hi - val, val - lo)
    weak = not np.isfinite(err) or err > rel_tol * val
    if weak:
        warnings.warn(f"first_passage certificate is weak ({err:.3g} vs value {val:.6g})",
                      CertificateWarning, stacklevel=2)
    return Certified(val, hi - val, weak)


# ---- restricted Green functions ------------------------------------------------

@dataclass
class RestrictedSeries:
    rs: np.ndarray
    values: np.ndarray        # (K, T) sums at the targets
    tail: np.ndarray          # (K, T) rigorous tail bounds
    coefficients: np.ndarray  # (horizon + 1, T) path weights per length at the targets
    horizon: int


def _mask(ball, omega):
    n = ball.n_rows
    if omega is None:
        return np.ones(n, dtype=bool)
    if callable(omega):
        omega = omega(ball)
    m = np.asarray(omega)
    if m.dtype != bool or m.shape != (n,):
        raise ValueError("omega must be None, a boolean row mask or a callable returning one")
    return m


def complement_of(ball, *elements):
    """Row mask of the ball minus the given elements (words)."""
    m = np.ones(ball.n_rows, dtype=bool)
    for w in elements:
        row = ball.find(tuple(w))
        if row >= 0:
            m[row] = False
    return m


def restricted_series(ball, source, targets, omega, rs, horizon=None, tol=1e-13,
                      max_horizon=20000, use_numba=None):
    """sum over paths source -> target whose interior stays in omega.

    Mass is recorded at the targets before leaving omega is enforced, so a
    target outside omega is still reached (endpoints are exempt).  Needs an
    explicit ball.
    """
    if ball.lumped:
        raise ValueError("restricted sums need an explicit ball")
    rs = np.atleast_1d(np.asarray(rs, dtype=np.float64))
    alive = _mask(ball, omega)
    targets = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    op = ball.op
    arrays = kernels.operator_arrays(op)
    v = np.zeros(op.n)
    v[source] = 1.0
    coeffs = [v[targets].copy()]
    vals = np.zeros((len(rs), len(targets)))
    vals += coeffs[0][None, :]
    pw = np.ones(len(rs))      # r^step S, with v stored as (true mass) / S
    S = 1.0
    nmax = max_horizon if horizon is None else int(horizon)
    step = 0

    def advance(u):
        out = kernels.push(op, u, arrays=arrays, use_numba=use_numba)
        hit = out[targets].copy()
        out[~alive] = 0.0
        return out, hit

    nv, nhit = advance(v)
    while True:
        check = step >= nmax or (horizon is None and step >= 2 * ball.radius + 2 and step % 16 == 0)
        if check:
            nn, _ = advance(nv)
            lam, scale, c = _cw_bound(v, nv, nn, rs, step, use_numba, pw * rs)
            # remaining weight at a target: the next arrival r^(N+1) hit_(N+1)
            # plus r (sum_{n>N} r^n u_n P)[y] <= r scale (w P)[y]
            w = v + c * nv
            wt = kernels.push(op, w, arrays=arrays, use_numba=use_numba)[targets]
            tail = (pw * rs)[:, None] * nhit[None, :] + (rs * scale)[:, None] * wt[None, :]
            if step >= nmax:
                break
            pos = vals > 0
            if np.all(np.where(pos, tail / np.where(pos, vals, 1.0), 0.0) <= tol):
                break
        step += 1
        v = nv
        pw = pw * rs
        vals += pw[:, None] * nhit[None, :]
        coeffs.append(nhit * S)
        vmax = v.max()
        if 0 < vmax < 2.0 ** -600:
            e = -int(np.frexp(vmax)[1])
            v = np.ldexp(v, e)
            pw = np.ldexp(pw, -e)
            S = math.ldexp(S, -e)
            nv, nhit = advance(v)
            continue
        if vals.max() > 1e15:
            raise DivergenceError("restricted sums blow up")
        nv, nhit = advance(v)
    if np.isfinite(lam) and np.any(rs * lam >= 1):
        raise DivergenceError("restricted series does not converge on the ball")
    return RestrictedSeries(rs, vals, tail, np.asarray(coeffs), step)


def restricted_green(r, x, y, omega, ball, horizon=None, tol=1e-13, use_numba=None):
    """G_r(x, y; omega): paths from x to y with interior in omega."""
    sx, sy = ball.find(tuple(x)), ball.find(tuple(y))
    if sx < 0 or sy < 0:
        raise KeyError("endpoint outside the ball")
    s = restricted_series(ball, sx, [sy], omega, [r], horizon, tol, use_numba=use_numba)
    return Certified(float(s.values[0, 0]), float(s.tail[0, 0]))


def avoidance(rs, x, ball, horizon=None, tol=1e-13, boundary=False, use_numba=None):
    """A_r(1; x): first returns to 1 that avoid x, for every r in rs.

    This is G_r(1, 1; Gamma minus {1, x}) - 1, and the return function
    avoiding x is G_r(1, 1; Gamma minus {x}) = 1 / (1 - A_r(1; x)).
    With boundary=True the error also carries the nested-radius estimate
    of the ball truncation.
    """
    omega = complement_of(ball, (), tuple(x))
    s = restricted_series(ball, 0, [0], omega, rs, horizon, tol, use_numba=use_numba)
    vals = s.values[:, 0]
    err = s.tail[:, 0].copy()
    if boundary and ball.radius >= 3:
        ptr = ball.sphere_ptr
        rows = np.arange(ball.n_rows)
        sub = [restricted_series(ball, 0, [0], omega & (rows < ptr[ball.radius - j]), rs,
                                 horizon, tol, use_numba=use_numba).values[:, 0]
               for j in (0, 1)]
        err += geometric_extrapolation(vals, sub[0], sub[1])
    return [Certified(float(vals[k] - 1.0), float(err[k])) for k in range(len(s.rs))]


# ---- identities ----------------------------------------------------------------

def generator_rows(ball):
    return np.array([ball.find((a,)) for a in range(ball.pres.ngens)])


def renewal_residual(r, ball=None, fld=None, probs=None, horizon=None, tol=1e-13,
                     use_numba=None):
    """|G(1,1) (1 - sum_x p_x r F(1,x)) - 1| with the certificate it should beat.

    Returns (residual, certificate).  On the truncated ball the first-step
    decomposition is exact, so the residual is the series tail at the
    identity and the certificate is its rigorous bound plus rounding.
    """
    if fld is None:
        fld = green_fields([r], ball, horizon=horizon, tol=tol, use_numba=use_numba)[0]
    ball = fld.ball
    L = ball.pres.ngens
    p = np.full(L, 1.0 / L) if probs is None else np.asarray(probs)
    rows = generator_rows(ball)
    G = fld.values
    s = float(np.sum(p * r * G[rows] / G[0]))
    res = abs(G[0] * (1 - s) - 1.0)
    t = fld.tail
    cert = float(t[0] + r * np.sum(p * t[rows])) + 64 * np.finfo(float).eps * G[0]
    return res, cert


@dataclass
class DerivativeCheck:
    r: float
    h: float
    fd: float            # central difference of G_r(1,1)
    series: float        # term-by-term derivative
    rhs: float           # r^-1 (eta - G)
    rel_error: float     # |fd - rhs| / rhs
    certificate: float   # bound on |fd - rhs| / rhs from tails and the step


def derivative_identity_check(r, ball, horizon=None, tol=1e-13, h=None, use_numba=None):
    """Central difference of G_r(1,1) against r^-1 (sum_z G(1,z)^2 - G(1,1)).

    Both sides refer to the walk killed outside the ball, for which the
    identity is exact, so the comparison isolates the difference step and
    the series tails.
    """
    if r <= 0:
        raise ValueError("r must be > 0")
    f0 = green_fields([r], ball, horizon=horizon, tol=tol, deriv=True, use_numba=use_numba)[0]
    cert0 = f0.certificate
    if h is None:
        h = max(1e-4, cert0 ** (1.0 / 3.0))
    if not h > 0 or r - 2 * h <= 0 or r + h == r:
        raise ValueError(f"step size {h} underflows at r = {r}")
    fs = green_fields([r - 2 * h, r - h, r + h, r + 2 * h], ball, horizon=horizon, tol=tol,
                      use_numba=use_numba)
    g = [f.values[0] for f in fs]
    fd = (g[2] - g[1]) / (2 * h)
    fd2 = (g[3] - g[0]) / (4 * h)
    sizes = np.asarray(ball.orbit_size, dtype=np.float64)
    eta = float(np.sum(sizes * f0.values ** 2))
    G0 = f0.values[0]
    rhs = (eta - G0) / r
    # tail errors of the four values, the eta tail, and the O(h^2) term
    # estimated from the two step sizes
    e_fd = (fs[1].tail[0] + fs[2].tail[0]) / (2 * h)
    e_eta = float(np.sum(sizes * (2 * f0.values * f0.tail + f0.tail ** 2))) / r
    e_h = abs(fd2 - fd) / 3.0 * 2.0
    cert = (e_fd + e_eta + e_h + 1e3 * np.finfo(float).eps * G0 / h) / rhs
    return DerivativeCheck(r, h, fd, float(f0.deriv[0]), rhs, abs(fd - rhs) / rhs, cert)


# ---- inequality suite -----------------------------------------------------------

@dataclass
class InequalityRow:
    name: str
    r: float
    instance: str
    lhs: float
    rhs: float
    margin: float            # point margin, >= 0 means the inequality holds
    certified_margin: float  # worst case over the value intervals
    status: str              # "certified", "undecided" or "violated"


@dataclass
class InequalityReport:
    rows: list = field(default_factory=list)
    harnack_fit: dict = field(default_factory=dict)

    def add(self, name, r, inst, lhs, rhs, worst, best, sense="<="):
        """lhs <= rhs (or >= with sense); worst / best are the margins at the
        least / most favourable ends of the value intervals."""
        if worst >= 0:
            st = "certified"
        elif best < 0:
            st = "violated"
        else:
            st = "undecided"
        margin = rhs - lhs if sense == "<=" else lhs - rhs
        self.rows.append(InequalityRow(name, r, inst, lhs, rhs, margin, worst, st))

    def counts(self):
        out = {}
        for row in self.rows:
            d = out.setdefault(row.name, {"certified": 0, "undecided": 0, "violated": 0})
            d[row.status] += 1
        return out

    @property
    def violations(self):
        return [r for r in self.rows if r.status == "violated"]

    def as_records(self):
        return [row.__dict__ for row in self.rows]


def _inv_pos(x):
    return 1.0 / x if x > 0 else math.inf


def pair_rows(ball, a_rows, b_rows):
    """Rows of a^-1 b for row arrays a, b of an explicit ball (-1 if outside)."""
    mats = ball.mats.astype(np.int64)
    A = matinv_np(mats[np.asarray(a_rows)])
    P = matmul_np(A, mats[np.asarray(b_rows)])
    return ball.find_keys(matrix_keys_np(P))


def inequality_suite(rs, ball, samples=1000, seed=0, horizon=None, tol=1e-12,
                     boundary=True, harnack_C=None, fields=None, raise_on_violation=True,
                     use_numba=None):
    """Margins of the Harnack, retracing, renewal, backscattering and
    supermultiplicativity inequalities on sampled instances.

    rs is one r or a grid; the sample budget is split over the five
    inequalities and the grid.  Elements are drawn from the sub-ball of
    radius (M - 2) // 2 so all products x^-1 y land where the boundary
    estimate exists.
    """
    if ball.lumped:
        raise ValueError("inequality_suite needs an explicit ball")
    rs = np.atleast_1d(np.asarray(rs, dtype=np.float64))
    rng = np.random.default_rng(seed)
    if fields is None:
        fields = green_fields(rs, ball, horizon=horizon, tol=tol, boundary=boundary,
                              use_numba=use_numba)
    M = ball.radius
    inner = (M - 2) // 2
    n_in = int(ball.sphere_ptr[inner + 1])
    L = ball.pres.ngens
    p = 1.0 / L
    gens = generator_rows(ball)
    rowsph = ball.row_sphere()
    # the symmetries fixing 1 act transitively on the generators, so one
    # avoidance function serves all of them
    A = avoidance(rs, (0,), ball, horizon=horizon, tol=tol, boundary=boundary,
                  use_numba=use_numba)
    rep = InequalityReport()
    K = len(rs)
    # 2L generator instances per r, the rest split over three sampled inequalities
    per = max(1, -(-(samples - 2 * L * K) // (3 * K)))

    for k, fld in enumerate(fields):
        r = float(rs[k])
        G = fld.values
        E = fld.error()
        G0, E0 = G[0], E[0]
        a_val, a_err = A[k].value, A[k].error

        # Harnack: G(1,z) <= C^d(y,z) G(1,y)
        C = (L / r) if harnack_C is None else harnack_C
        y = rng.integers(0, n_in, per)
        z = rng.integers(0, n_in, per)
        d = rowsph[pair_rows(ball, y, z)]
        best = 0.0
        for yi, zi, di in zip(y, z, d):
            Cd = C ** di
            rep.add("harnack", r, f"y={yi},z={zi}", G[zi], Cd * G[yi],
                    Cd * G[yi] - (G[zi] + E[zi]), Cd * (G[yi] + E[yi]) - G[zi])
            if di > 0:
                best = max(best, (G[zi] / G[yi]) ** (1.0 / di))
        rep.harnack_fit[r] = {"C_used": C, "C_fitted": best}

        # retracing F(1,x) >= p r / (1 - A) and renewal G(1,1) <= 1 / (1 - A - F^2)
        a_hi = a_val + a_err
        for x in gens:
            F = G[x] / G0
            F_lo = G[x] / (G0 + E0)
            F_hi = (G[x] + E[x]) / G0
            rhs = p * r / (1 - a_val)
            rhs_hi = p * r / (1 - a_hi) if a_hi < 1 else math.inf
            rep.add("retracing", r, f"x={x}", F, rhs, F_lo - rhs_hi, F_hi - rhs, sense=">=")
            bound = _inv_pos(1 - a_val - F * F)
            bound_lo = _inv_pos(1 - a_val - F_lo * F_lo)
            bound_hi = _inv_pos(1 - a_hi - F_hi * F_hi)
            rep.add("renewal", r, f"x={x}", G0, bound, bound_lo - (G0 + E0), bound_hi - G0)

        # backscattering: F(1,x)^2 G(1,1) <= sum_{n >= 2|x|} p_n r^n; the sum
        # uses the killed return probabilities, exact below twice the radius
        ret = np.asarray(fld.meta["returns"])
        with np.errstate(divide="ignore"):
            terms = np.exp(np.log(ret) + np.arange(len(ret)) * math.log(r))
        tails = np.cumsum(terms[::-1])[::-1]
        xs = rng.integers(1, n_in, per)
        for x in xs:
            m = int(rowsph[x])
            lhs = G[x] ** 2 / G0
            rhs = float(tails[2 * m]) if 2 * m < len(tails) else 0.0
            rep.add("backscattering", r, f"x={x}", lhs, rhs,
                    rhs - (G[x] + E[x]) ** 2 / G0, rhs + E0 - G[x] ** 2 / (G0 + E0))

        # supermultiplicativity: F(x,z) >= F(x,y) F(y,z)
        xs = rng.integers(0, n_in, per)
        ys = rng.integers(0, n_in, per)
        zs = rng.integers(0, n_in, per)
        xz, xy, yz = pair_rows(ball, xs, zs), pair_rows(ball, xs, ys), pair_rows(ball, ys, zs)
        for i in range(per):
            a, b, c = xz[i], xy[i], yz[i]
            lhs = G[a] / G0
            rhs = G[b] * G[c] / G0 ** 2
            worst = G[a] / (G0 + E0) - (G[b] + E[b]) * (G[c] + E[c]) / G0 ** 2
            best_ = (G[a] + E[a]) / G0 - G[b] * G[c] / (G0 + E0) ** 2
            rep.add("supermultiplicativity", r, f"x={xs[i]},y={ys[i]},z={zs[i]}",
                    lhs, rhs, worst, best_, sense=">=")

    if raise_on_violation and rep.violations:
        v = rep.violations[0]
        raise InternalConsistencyError(
            f"{len(rep.violations)} certified violations, first: {v.name} at r={v.r} ({v.instance})")
    return rep
