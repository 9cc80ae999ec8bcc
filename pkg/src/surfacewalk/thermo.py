"""Green cocycle, pressure and the sphere statistics built from it.

Everything here reads truncated Green fields.  Values on the ball are lower
bounds and value + error are upper bounds, so fitted quantities come with a
bracket from the two choices, and quantities that the truncation distorts
are reported with the window they were fitted on.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .automaton import recurrent_class
from .group.presentation import inverse_word
from .group.rep import matinv_np, matmul_np, matrix_keys_np


class WindowError(ValueError):
    """Fit window too short or outside the ball."""


def _fit_line(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) < 2:
        raise WindowError("need at least two points for a slope")
    A = np.stack([x, np.ones_like(x)], 1)
    (slope, icept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icept)
    return float(slope), float(icept), float(np.sqrt(np.mean(resid ** 2)))


def _lookup(fld, w):
    row = fld.ball.find(tuple(w))
    if row < 0:
        return None
    return float(fld.values[row]), float(fld.error(np.array([row]))[0])


def _log_ratio(fld, num, den):
    """log G(1,num)/G(1,den) and a bound on its error from the field errors."""
    a, b = _lookup(fld, num), _lookup(fld, den)
    if a is None or b is None:
        return None, math.inf
    (va, ea), (vb, eb) = a, b
    val = math.log(va / vb)
    if not (math.isfinite(ea) and math.isfinite(eb)):
        return val, math.inf
    err = max(abs(math.log((va + ea) / vb) - val), abs(math.log(va / (vb + eb)) - val))
    return val, err


# ---- cocycle ------------------------------------------------------------------

@dataclass
class CocycleApprox:
    r: float
    order: int
    paths: list               # sampled recurrent paths omega_0 .. omega_order
    values: np.ndarray        # (paths, order + 1): f_n for n = 0..order
    errors: np.ndarray        # matching error bounds on the logs
    sup_norm: float
    differences: np.ndarray   # sup over paths of |f_{n+1} - f_n|
    rate: float               # geometric fit of the differences (nan if unusable)
    usable_n: int             # largest n whose certified error is below the difference
    meta: dict = field(default_factory=dict)


def recurrent_paths(aut, n, count, seed=0):
    """Random paths of n + 1 edges inside the recurrent class."""
    rec = sorted(recurrent_class(aut).recurrent)
    recset = set(rec)
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        s = int(rng.choice(rec))
        w = []
        for _ in range(n + 1):
            opts = [a for a in range(aut.pres.ngens)
                    if aut.trans[s, a] >= 0 and int(aut.trans[s, a]) in recset]
            if not opts:
                break
            a = int(rng.choice(opts))
            w.append(a)
            s = int(aut.trans[s, a])
        if len(w) == n + 1:
            out.append(tuple(w))
    return out


def cocycle(r, n, aut, fld, paths=None, samples=64, seed=0):
    """f_k(omega) = log G_r(1, omega_0..omega_k) / G_r(1, omega_1..omega_k), k <= n.

    The prefix that connects the start state to omega drops out by
    translation invariance, so only the labels of omega are needed.  On the
    free group every f_k equals log F~_r.
    """
    if abs(fld.r - r) > 1e-12:
        raise ValueError("field computed at a different r")
    if n + 1 > fld.radius:
        raise WindowError(f"order {n} needs radius {n + 1} (ball has {fld.radius})")
    if paths is None:
        paths = recurrent_paths(aut, n, samples, seed)
    vals = np.full((len(paths), n + 1), np.nan)
    errs = np.full((len(paths), n + 1), np.inf)
    for i, w in enumerate(paths):
        for k in range(n + 1):
            v, e = _log_ratio(fld, w[:k + 1], w[1:k + 1])
            if v is not None:
                vals[i, k], errs[i, k] = v, e
    diffs = np.nanmax(np.abs(np.diff(vals, axis=1)), axis=0) if n else np.zeros(0)
    errmax = np.max(errs, axis=0)
    usable = 0
    for k in range(1, n + 1):
        if errmax[k] + errmax[k - 1] < diffs[k - 1]:
            usable = k
        else:
            break
    rate = math.nan
    good = np.nonzero(diffs[:usable] > 0)[0]
    if len(good) >= 2:
        slope, _, _ = _fit_line(good, np.log(diffs[good]))
        rate = math.exp(slope)
    return CocycleApprox(r, n, list(paths), vals, errs, float(np.nanmax(np.abs(vals))),
                         diffs, rate, usable, {"max_error": errmax.tolist()})


def birkhoff_sum(fld, word):
    """S_n phi^+ along a geodesic word: sum of the f's of its suffixes.

    Telescopes to log G(1, w) - log G(1, last letter); returned with that
    closed form for comparison.
    """
    word = tuple(word)
    tot = 0.0
    for j in range(len(word) - 1):
        v, _ = _log_ratio(fld, word[j:], word[j + 1:])
        tot += v
    closed = math.log(fld.value(word)) - math.log(fld.value(word[-1:]))
    return tot, closed


# ---- pressure -----------------------------------------------------------------

@dataclass
class PressureEstimate:
    theta: float
    r: float
    slope: float
    intercept: float
    window: tuple
    residual: float
    sums: np.ndarray
    slope_low: float          # slope of the lower-bound sums
    slope_high: float         # slope of the upper-bound sums
    warning: str = ""

    @property
    def bracket(self):
        return min(self.slope_low, self.slope_high), max(self.slope_low, self.slope_high)

    def as_dict(self):
        return {"theta": self.theta, "r": self.r, "slope": self.slope,
                "intercept": self.intercept, "window": list(self.window),
                "residual": self.residual, "sums": self.sums.tolist(),
                "slope_low": self.slope_low, "slope_high": self.slope_high}


def sphere_sums_bracket(fld, theta):
    """Lower and upper bounds on sum_{S_m} G^theta from values and values + error."""
    sizes = np.asarray(fld.ball.orbit_size, dtype=np.float64)
    ptr = fld.ball.sphere_ptr
    lo = sizes * fld.values ** theta
    hi = sizes * (fld.values + fld.error()) ** theta
    M = fld.radius
    return (np.array([lo[ptr[m]:ptr[m + 1]].sum() for m in range(M + 1)]),
            np.array([hi[ptr[m]:ptr[m + 1]].sum() for m in range(M + 1)]))


def default_window(radius):
    """Skip the first spheres (transient) and the last third (truncated)."""
    lo = max(1, radius // 4)
    return lo, max(lo + 1, radius - max(1, radius // 3))


def pressure(theta, r, fld, window=None, max_residual=0.05):
    """Slope of m -> log sum_{S_m} G_r(1,x)^theta over window = (m0, m1)."""
    if abs(fld.r - r) > 1e-12:
        raise ValueError("field computed at a different r")
    m0, m1 = window or default_window(fld.radius)
    if m1 - m0 < 1 or m1 > fld.radius or m0 < 0:
        raise WindowError(f"window {(m0, m1)} invalid for radius {fld.radius}")
    lo, hi = sphere_sums_bracket(fld, theta)
    m = np.arange(m0, m1 + 1)
    slope, icept, res = _fit_line(m, np.log(lo[m0:m1 + 1]))
    s_hi = _fit_line(m, np.log(np.where(np.isfinite(hi), hi, np.nan)[m0:m1 + 1]))[0] \
        if np.all(np.isfinite(hi[m0:m1 + 1])) else math.nan
    est = PressureEstimate(theta, r, slope, icept, (m0, m1), res, lo, slope, s_hi)
    if res > max_residual:
        est.warning = f"fit residual {res:.3g} above {max_residual}"
    return est


def pressure_scan(theta, fields, window=None):
    """Pressure along an r-grid, with the monotonicity check."""
    ests = [pressure(theta, f.r, f, window) for f in fields]
    slopes = np.array([e.slope for e in ests])
    order = np.argsort([e.r for e in ests])
    increasing = bool(np.all(np.diff(slopes[order]) > 0))
    return ests, increasing


def sphere_sum_checks(fld_crit, fld_sub, window=(5, 9)):
    """The three sphere-sum echoes of Pressure(2 phi_R) = 0.

    flat: relative spread of sum_{S_m} G^2 at the critical field over the
    window.  decay: the same sums at the subcritical field decrease.
    growth: sum_{S_m} G_r(1,x) >= r^m, which holds for r >= 1 (every path to
    S_m has at least m steps).
    """
    m0, m1 = window
    if m1 > fld_crit.radius:
        raise WindowError(f"window {window} outside radius {fld_crit.radius}")
    s_crit = fld_crit.sphere_sums(2.0)[m0:m1 + 1]
    s_sub = fld_sub.sphere_sums(2.0)[m0:m1 + 1]
    spread = float(s_crit.max() / s_crit.min() - 1)
    s1 = fld_crit.sphere_sums(1.0)
    m = np.arange(len(s1))
    return {"window": [m0, m1], "crit_r": fld_crit.r, "sub_r": fld_sub.r,
            "crit_sums": s_crit.tolist(), "spread": spread,
            "sub_sums": s_sub.tolist(), "sub_decreasing": bool(np.all(np.diff(s_sub) < 0)),
            "theta1_sums": s1.tolist(),
            "theta1_ge_rm": bool(np.all(s1 >= fld_crit.r ** m * (1 - 1e-12)))}


def eta_pressure_link(fields, window=None):
    """eta(r) (1 - exp P(2 phi_r)) should be roughly constant near R."""
    rows = []
    for f in fields:
        p = pressure(2.0, f.r, f, window)
        eta = f.eta()
        rows.append({"r": f.r, "eta": eta, "pressure": p.slope,
                     "product": eta * (1 - math.exp(p.slope))})
    prods = np.array([x["product"] for x in rows])
    spread = float(prods.max() / prods.min() - 1) if len(prods) else math.nan
    return rows, spread


# ---- Gibbs sphere measure ------------------------------------------------------

@dataclass
class SphereGibbsMeasure:
    m: int
    rows: np.ndarray
    weights: np.ndarray       # per row (orbit weight = size * G^2), sums to 1
    normalization: float

    def sample(self, count, rng):
        return self.rows[rng.choice(len(self.rows), size=count, p=self.weights)]


def sphere_gibbs(fld, m):
    rows = fld.ball.sphere_rows(m)
    w = np.asarray(fld.ball.orbit_size, dtype=np.float64)[rows] * fld.values[rows] ** 2
    Z = float(w.sum())
    return SphereGibbsMeasure(m, rows, w / Z, Z)


# ---- level sets ---------------------------------------------------------------

@dataclass
class LevelSetCounts:
    eps: np.ndarray
    lower: np.ndarray         # elements certainly at or above eps (values)
    upper: np.ndarray         # elements possibly at or above eps (value + error)
    floor: float
    excluded: np.ndarray      # eps below the floor
    slope: float
    intercept: float
    residual: float


def level_floor(fld, probs_min=None):
    """No element just outside the ball can reach this level.

    A neighbour y of x satisfies G(1,y) >= p r G(1,x), so an element at
    distance k from the outermost sphere S_m with finite error bars is
    below max_{S_m} (value + error) / (p r)^k.  Here k = M + 1 - m.
    """
    p = probs_min if probs_min is not None else 1.0 / fld.ball.pres.ngens
    err = fld.error()
    for m in range(fld.radius, -1, -1):
        rows = fld.ball.sphere_rows(m)
        top = np.max(fld.values[rows] + err[rows])
        if np.isfinite(top):
            return float(top / (p * fld.r) ** (fld.radius + 1 - m))
    return math.inf


def level_set_count(eps, fld, floor=None):
    """#{x in the ball : G(1,x) >= eps}, log-log fit over the admissible eps."""
    eps = np.sort(np.asarray(eps, dtype=np.float64))
    floor = level_floor(fld) if floor is None else floor
    sizes = np.asarray(fld.ball.orbit_size, dtype=np.float64)
    lo_v, hi_v = fld.values, fld.values + fld.error()
    lower = np.array([sizes[lo_v >= e].sum() for e in eps])
    upper = np.array([sizes[hi_v >= e].sum() for e in eps])
    excluded = eps <= floor
    ok = ~excluded & (lower > 0)
    slope = icept = res = math.nan
    if ok.sum() >= 2:
        slope, icept, res = _fit_line(np.log(eps[ok]), np.log(lower[ok]))
    return LevelSetCounts(eps, lower, upper, floor, excluded, slope, icept, res)


# ---- Martin kernel ------------------------------------------------------------

@dataclass
class MartinKernelApprox:
    r: float
    x: tuple
    ray: tuple
    n: np.ndarray
    ratios: np.ndarray        # G(x, y_n) / G(1, y_n)
    errors: np.ndarray
    rate: float
    truncated: bool


def _geometric_rate(seq, errs):
    d = np.abs(np.diff(seq))
    e = errs[1:] + errs[:-1]
    good = np.nonzero((d > 0) & (d > e))[0]
    if len(good) < 2:
        return math.nan
    return math.exp(_fit_line(good, np.log(d[good]))[0])


def martin_kernel(r, x, ray, fld):
    """Approximants G_r(x, y_n) / G_r(1, y_n) along the ray y_n = ray[:n]."""
    x, ray = tuple(x), tuple(ray)
    xinv = inverse_word(x)
    ns, vals, errs = [], [], []
    truncated = False
    for n in range(1, len(ray) + 1):
        v, e = _log_ratio(fld, xinv + ray[:n], ray[:n])
        if v is None:
            truncated = True
            break
        ns.append(n)
        vals.append(math.exp(v))
        errs.append(math.exp(v) * math.expm1(e))
    vals, errs = np.array(vals), np.array(errs)
    return MartinKernelApprox(r, x, ray, np.array(ns), vals, errs,
                              _geometric_rate(vals, errs) if len(vals) > 2 else math.nan,
                              truncated)


def lambda_kernel(r, x, ray1, ray2, fld):
    """G(y_n, x) G(z_n, x) / G(y_n, z_n) for two rays from 1 (explicit balls).

    Needs y_n^-1 z_n inside the ball, which limits n to about radius / 2.
    """
    ball = fld.ball
    if ball.lumped:
        raise ValueError("lambda_kernel needs an explicit ball")
    rep = ball.rep

    def mat(w):
        return np.array(rep.word_matrix(tuple(w)), dtype=np.int64)[None, :]

    X = mat(x)
    out, errs = [], []
    for n in range(1, min(len(ray1), len(ray2)) + 1):
        Y, Z = mat(ray1[:n]), mat(ray2[:n])
        rows = ball.find_keys(matrix_keys_np(np.concatenate([
            matmul_np(matinv_np(Y), X), matmul_np(matinv_np(Z), X),
            matmul_np(matinv_np(Y), Z)])))
        if np.any(rows < 0):
            break
        v = fld.values[rows]
        e = fld.error(rows)
        val = v[0] * v[1] / v[2]
        hi = (v[0] + e[0]) * (v[1] + e[1]) / v[2]
        lo = v[0] * v[1] / (v[2] + e[2])
        out.append(val)
        errs.append(max(hi - val, val - lo))
    out, errs = np.array(out), np.array(errs)
    return out, errs, (_geometric_rate(out, errs) if len(out) > 2 else math.nan)


# ---- geodesic averages --------------------------------------------------------

@dataclass
class AverageReport:
    r: float
    ms: list
    mean: list                # mu_{r,m} mean of the per-x averages
    median: list
    iqr: list
    dispersion: list          # iqr / median
    xi_eta: float             # mean at the largest m: the observed xi(r) eta(r)
    xi: float                 # xi_eta / eta(r)
    samples: int | None


def _weighted_quantiles(x, w, qs):
    o = np.argsort(x)
    cw = np.cumsum(w[o])
    cw /= cw[-1]
    return [float(x[o][np.searchsorted(cw, q)]) for q in qs]


def geodesic_averages(fld, m):
    """Per-row (1/m) sum_y G(1,y) G(y,x) / G(1,x) on S_m.

    sum_y G(1,y) G(y,x) = sum_N (N + 1) r^N P^N(1,x) = G + r dG/dr, so the
    inner sum is read off the derivative field instead of a convolution.
    """
    if fld.deriv is None:
        raise ValueError("field needs deriv=True")
    rows = fld.ball.sphere_rows(m)
    return rows, (1 + fld.r * fld.deriv[rows] / fld.values[rows]) / m


def direct_average(fld, x, inner_radius):
    """The same average by summing over y in B(inner_radius) (explicit ball)."""
    ball = fld.ball
    if ball.lumped:
        raise ValueError("direct_average needs an explicit ball")
    x = tuple(x)
    rep = ball.rep
    X = np.array(rep.word_matrix(x), dtype=np.int64)[None, :]
    ys = np.arange(ball.sphere_ptr[inner_radius + 1])
    Yinv = matinv_np(ball.mats[ys].astype(np.int64))
    rows = ball.find_keys(matrix_keys_np(matmul_np(Yinv, np.repeat(X, len(ys), 0))))
    ok = rows >= 0
    tot = float(np.sum(fld.values[ys[ok]] * fld.values[rows[ok]]))
    return tot / fld.value(x) / len(x), int((~ok).sum())


def geodesic_average_stability(r, ms, fld, samples=None, seed=0):
    """Distribution of the per-x averages under mu_{r,m}, for each m in ms.

    samples=None uses the exact weights over the sphere; otherwise draws
    that many x from mu_{r,m}.
    """
    if abs(fld.r - r) > 1e-12:
        raise ValueError("field computed at a different r")
    rng = np.random.default_rng(seed)
    mean, med, iqr, disp = [], [], [], []
    for m in ms:
        gm = sphere_gibbs(fld, m)
        rows, avg = geodesic_averages(fld, m)
        w = gm.weights
        if samples:
            idx = rng.choice(len(rows), size=samples, p=w)
            avg, w = avg[idx], np.full(samples, 1.0 / samples)
        q1, q2, q3 = _weighted_quantiles(avg, w, (0.25, 0.5, 0.75))
        mean.append(float(np.sum(avg * w) / np.sum(w)))
        med.append(q2)
        iqr.append(q3 - q1)
        disp.append((q3 - q1) / q2)
    eta = fld.eta()
    return AverageReport(r, list(ms), mean, med, iqr, disp, mean[-1], mean[-1] / eta, samples)


# ---- thin triangles -----------------------------------------------------------

def empirical_delta(ball, samples=200, seed=0, vertex_radius=None):
    """Largest distance from a point of one side to the other two sides.

    Triangles are 1, x, y with x, y in B(vertex_radius); sides are ShortLex
    geodesics.  Distances beyond the ball count as radius + 1, so the value
    is a lower estimate of the thin-triangle constant, for reporting.
    """
    if ball.lumped or ball.words is None:
        raise ValueError("empirical_delta needs an explicit ball with words")
    rep = ball.rep
    M = ball.radius
    k = vertex_radius or M // 3
    rng = np.random.default_rng(seed)
    top = int(ball.sphere_ptr[k + 1])
    rsph = ball.row_sphere()

    def path_mats(start, word):
        P = np.array(rep.word_matrix(tuple(start)), dtype=np.int64)[None, :]
        out = [P]
        for l in word:
            P = matmul_np(P, rep.gens_array[l:l + 1])
            out.append(P)
        return np.concatenate(out)

    def dist(A, B):
        prod = matmul_np(np.repeat(matinv_np(A), len(B), 0), np.tile(B, (len(A), 1)))
        rows = ball.find_keys(matrix_keys_np(prod))
        d = np.where(rows >= 0, rsph[np.maximum(rows, 0)], M + 1)
        return d.reshape(len(A), len(B))

    best = 0
    for _ in range(samples):
        i, j = rng.integers(1, top, size=2)
        x, y = ball.word(int(i)), ball.word(int(j))
        row = ball.find(inverse_word(x) + y)
        if row < 0:
            continue
        s1, s2, s3 = path_mats((), x), path_mats((), y), path_mats(x, ball.word(row))
        for side, others in ((s1, (s2, s3)), (s2, (s1, s3)), (s3, (s1, s2))):
            d = np.min(np.concatenate([dist(side, o) for o in others], 1), 1)
            best = max(best, int(d.max()))
    return best
