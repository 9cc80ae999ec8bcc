"""Scans over Green fields: Ancona constants, exponent fits, decay, metric.

All of them take fields that were already computed (one sweep serves a
whole r-grid) and only read values and error bars.
"""
from dataclasses import dataclass, field
import math

import mpmath as mp
import numpy as np

from ..group.presentation import inverse_word
from ..oracle import CoveringWalkParams, branch_gap, tree_eta


class UnusableGrid(ValueError):
    """Too few grid points survive the certificate filter."""


def _fit_line(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    A = np.stack([x, np.ones_like(x)], 1)
    (slope, icept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icept)
    return float(slope), float(icept), float(np.sqrt(np.mean(resid ** 2)))


# ---- geodesics on any ball ---------------------------------------------------

def geodesic_words(ball, w, cap=1000):
    """All geodesic words from 1 to the element of w (works on lumped balls).

    Walks down from the target: the last letter can be a when |x a^-1| is
    one less than |x|.  Lookups go through ball.find, so only elements of
    the ball are needed.
    """
    w = tuple(w)
    m = ball.length(w)
    out = []
    memo = {}

    def length(v):
        if v not in memo:
            row = ball.find(v)
            memo[v] = ball.sphere_of(row) if row >= 0 else -1
        return memo[v]

    def down(v, k, suffix):
        # v is a word for the current element, k its length
        if k == 0:
            out.append(suffix)
            if len(out) > cap:
                raise RuntimeError(f"more than {cap} geodesics")
            return
        for a in range(ball.pres.ngens):
            u = v + (a ^ 1,)
            if length(u) == k - 1:
                down(u, k - 1, (a,) + suffix)

    down(w, m, ())
    return sorted(out)


# ---- Ancona scan -------------------------------------------------------------

@dataclass
class AnconaScan:
    rs: np.ndarray
    C: np.ndarray                    # max ratio per r
    C_by_length: dict                # length -> per-r max
    n_geodesics: int
    n_pairs: int
    cap: int
    capped: int                      # pairs whose geodesic list hit the cap
    worst: list                      # per r: (geodesic word, split)
    meta: dict = field(default_factory=dict)

    @property
    def flatness(self):
        return float(self.C.max() / self.C.min())

    def as_records(self):
        return [{"r": float(r), "C_hat": float(c)} for r, c in zip(self.rs, self.C)]


def ancona_scan(fields, lengths, pairs=20, cap=200, seed=0):
    """C_r = max G(x0,xm) / (G(x0,xk) G(xk,xm)) over sampled geodesics and 0 <= k <= m.

    x0 = 1 (homogeneity); xm is drawn uniformly from S_m; every geodesic from
    1 to xm is used, up to cap per pair.  The end splits k = 0, m give
    1/G_r(1,1) exactly, so C_r >= 1/G_r(1,1).
    """
    ball = fields[0].ball
    if ball.words is None:
        raise ValueError("ancona_scan needs a ball with stored words")
    vals = np.stack([f.values for f in fields])
    rng = np.random.default_rng(seed)
    sizes = np.asarray(ball.orbit_size, dtype=np.float64)
    rowcache = {}

    def col(w):
        if w not in rowcache:
            rowcache[w] = ball.find(w)
        return vals[:, rowcache[w]]

    best = np.zeros(len(fields))
    worst = [None] * len(fields)
    by_len = {}
    ngeo = npairs = capped = 0
    for m in lengths:
        if m > ball.radius:
            raise ValueError(f"length {m} outside the ball")
        rows = ball.sphere_rows(m)
        w_ = sizes[rows] / sizes[rows].sum()
        bm = np.zeros(len(fields))
        for row in rng.choice(rows, size=pairs, p=w_):
            target = ball.word(int(row))
            try:
                geos = geodesic_words(ball, target, cap)
            except RuntimeError:
                capped += 1
                geos = geodesic_words(ball, target, 10 ** 9)[:cap]
            npairs += 1
            top = col(target)
            for g in geos:
                ngeo += 1
                for k in range(m + 1):
                    ratio = top / (col(g[:k]) * col(g[k:]))
                    bm = np.maximum(bm, ratio)
                    hit = ratio > best
                    for i in np.nonzero(hit)[0]:
                        worst[i] = (g, k)
                    best = np.maximum(best, ratio)
        by_len[m] = bm
    return AnconaScan(np.array([f.r for f in fields]), best, by_len, ngeo, npairs, cap,
                      capped, worst, {"seed": seed, "pairs_per_length": pairs})


def ancona_free(r, g):
    """On the tree every split gives G~ F~^m / (G~ F~^k G~ F~^(m-k)) = 1/G~_r(1,1)."""
    from ..oracle import covering_oracle
    return float(1 / covering_oracle(r, g).G)


# ---- exponent fits -----------------------------------------------------------

@dataclass
class ExponentFit:
    slope: float
    intercept: float
    residual: float
    x: np.ndarray                    # log(R - r)
    y: np.ndarray                    # log of the fitted quantity
    used: np.ndarray                 # r values used
    dropped: list                    # (r, reason)
    inv2_slope: float = math.nan     # eta^-2 = a (R - r) + b
    inv2_intercept: float = math.nan
    corrected: dict = field(default_factory=dict)

    def as_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "residual": self.residual,
                "r": self.used.tolist(), "log_delta": self.x.tolist(), "log_value": self.y.tolist(),
                "dropped": self.dropped, "inv2_slope": self.inv2_slope,
                "inv2_intercept": self.inv2_intercept, "corrected": self.corrected}


def critical_grid(R, kmin=2, kmax=6):
    """r = R - 10^(-k/2), k = kmin..kmax (geometric spacing towards R)."""
    return np.array([R - 10 ** (-k / 2) for k in range(kmin, kmax + 1)])


def eta_bracket(fld):
    """eta from values (lower) and from values + error (upper).

    Rows without a finite error (the outer spheres when a boundary estimate
    was asked for) are left at their values in the upper sum.
    """
    sizes = np.asarray(fld.ball.orbit_size, dtype=np.float64)
    err = fld.error()
    err = np.where(np.isfinite(err), err, 0.0)
    lo = float(np.sum(sizes * fld.values ** 2))
    hi = float(np.sum(sizes * (fld.values + err) ** 2))
    return lo, hi


def eta_and_exponent(fields, R_hat, R_lower=None, rel_tol=0.05, min_points=3):
    """OLS of log eta against log(R_hat - r), plus the eta^-2 linear fit.

    Grid points at or above R_lower (when given) or with a relative eta
    bracket wider than rel_tol are dropped and listed.
    """
    keep, dropped = [], []
    for f in fields:
        lo, hi = eta_bracket(f)
        if R_lower is not None and f.r >= R_lower:
            dropped.append((f.r, "above the lower end of the R bracket"))
        elif f.r >= R_hat:
            dropped.append((f.r, "not below R_hat"))
        elif not math.isfinite(hi) or (hi - lo) / lo > rel_tol:
            dropped.append((f.r, f"eta bracket {(hi - lo) / lo:.3g} above {rel_tol}"))
        else:
            keep.append((f.r, lo))
    if len(keep) < min_points:
        raise UnusableGrid(f"only {len(keep)} usable points; dropped: {dropped}")
    r = np.array([k[0] for k in keep])
    eta = np.array([k[1] for k in keep])
    x, y = np.log(R_hat - r), np.log(eta)
    s, b, res = _fit_line(x, y)
    s2, b2, _ = _fit_line(R_hat - r, eta ** -2.0)
    return ExponentFit(s, b, res, x, y, r, dropped, s2, b2)


def free_gap_exponent(g, deltas, correction=True):
    """Exponent of G~_R~ - G~_r against R~ - r on the tree (closed forms).

    The plain OLS slope carries the next term of the expansion,
    C sqrt(d) (1 + c sqrt(d) + e d + ...), which bends the log-log line;
    with correction=True a second fit log gap = a log d + b + c sqrt(d) + e d
    is reported alongside.
    """
    R = CoveringWalkParams(g).radius()
    deltas = np.asarray(deltas, dtype=np.float64)
    gaps = np.array([float(branch_gap(R - mp.mpf(d), g)) for d in deltas])
    x, y = np.log(deltas), np.log(gaps)
    s, b, res = _fit_line(x, y)
    fit = ExponentFit(s, b, res, x, y, float(R) - deltas, [])
    if correction:
        A = np.stack([x, np.ones_like(x), np.sqrt(deltas), deltas], 1)
        sol = np.linalg.lstsq(A, y, rcond=None)[0]
        fit.corrected = {"slope": float(sol[0]), "c": float(sol[2]), "e": float(sol[3]),
                         "model": "log gap = a log d + b + c sqrt(d) + e d"}
    return fit


def free_eta_exponent(g, deltas):
    """Exponent of eta~ against R~ - r (target -1/2)."""
    R = CoveringWalkParams(g).radius()
    deltas = np.asarray(deltas, dtype=np.float64)
    etas = np.array([float(tree_eta(R - mp.mpf(d), g)) for d in deltas])
    x, y = np.log(deltas), np.log(etas)
    s, b, res = _fit_line(x, y)
    return ExponentFit(s, b, res, x, y, float(R) - deltas, [])


# ---- decay, sphere sums, metric ----------------------------------------------

@dataclass
class DecayFit:
    log_max: np.ndarray
    rate: float                      # fitted rho in max_{S_m} G <= C rho^m
    eventually_decreasing: bool
    window: tuple


def decay_fit(fld, window=None):
    lm = np.log(fld.sphere_max())
    m0, m1 = window or (1, fld.radius)
    m = np.arange(m0, m1 + 1)
    s, _, _ = _fit_line(m, lm[m0:m1 + 1])
    tail = lm[len(lm) // 2:]
    return DecayFit(lm, float(math.exp(s)), bool(np.all(np.diff(tail) < 0)), (m0, m1))


def sphere_sum_lower_bound(fld):
    """sum_{S_m} G_r(1,x) + deficit >= r^m for every m; returns per-m margins.

    Valid for r >= 1 only (the bound uses r^n >= r^m for n >= m).
    """
    sizes = np.asarray(fld.ball.orbit_size, dtype=np.float64)
    ptr = fld.ball.sphere_ptr
    up = sizes * (fld.values + fld.error())
    s = np.array([up[ptr[m]:ptr[m + 1]].sum() for m in range(fld.radius + 1)])
    return s - fld.r ** np.arange(fld.radius + 1)


@dataclass
class MetricReport:
    triangle_violations: int         # certified: F(x,z) < F(x,y) F(y,z) beyond errors
    symmetry_defect: float           # max |d(x,y) - d(y,x)|
    symmetry_violations: int         # |F(x,y) - F(y,x)| beyond both error bars
    C1: float
    C2: float
    samples: int


def rw_metric_checks(fld, samples=500, seed=0, inner=None):
    """d_RW(x,y) = -log F(x,y) on sampled triples of B(inner).

    Distances need x^-1 y in the ball, so points are drawn from
    B(radius // 2).  C1, C2 are the extreme ratios d_RW / d over the pairs.
    """
    ball = fld.ball
    if ball.words is None:
        raise ValueError("rw_metric_checks needs stored words")
    inner = inner or ball.radius // 2
    rng = np.random.default_rng(seed)
    top = int(ball.sphere_ptr[inner + 1])
    err = fld.error()
    G11 = fld.values[0]

    def F(u, v):
        row = ball.find(inverse_word(u) + v)
        if row < 0:
            return None
        d = ball.sphere_of(row)
        return fld.values[row] / G11, (fld.values[row] + err[row]) / G11, d

    viol = sviol = 0
    sym = 0.0
    ratios = []
    for _ in range(samples):
        x, y, z = (ball.word(int(i)) for i in rng.integers(0, top, size=3))
        fxy, fyz, fxz, fyx = F(x, y), F(y, z), F(x, z), F(y, x)
        if None in (fxy, fyz, fxz, fyx):
            continue
        sym = max(sym, abs(math.log(fxy[0]) - math.log(fyx[0])))
        if fxy[0] > fyx[1] or fyx[0] > fxy[1]:
            sviol += 1
        # triangle for -log F is F(x,z) >= F(x,y) F(y,z); certified violation
        # needs the upper value of the left below the lower value of the right
        if fxz[1] < fxy[0] * fyz[0] * (1 - 1e-12):
            viol += 1
        for val, _, d in (fxy, fyz, fxz):
            if d > 0:
                ratios.append(-math.log(val) / d)
    ratios = np.array(ratios)
    return MetricReport(viol, sym, sviol, float(ratios.min()), float(ratios.max()), samples)
