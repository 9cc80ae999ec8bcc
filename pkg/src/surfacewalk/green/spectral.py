"""Spectral radius R = 1 / rho of the walk from exact return probabilities.

On a ball of radius M the moments p_2n = P{X_2n = 1} are exact for n <= M
(p_2n = sum_x P{X_n = x}^2 and X_n stays inside the ball).  The sequences
p_2n^(-1/2n) and sqrt(p_2n / p_2n+2) decrease to R, so every term is a
rigorous upper bound; R~ of the covering walk is another.

The point estimate uses the hyperbolic local limit law
p_2n ~ C R^(-2n) n^(-3/2): log p_2n + 1.5 log n is fitted by
a - 2n log R + b/n + c/n^2 + d/n^3 over the last points.  Its error bar is
heuristic (a multiple of the change when the window moves by one), so the
lower end of the bracket is not a proof.  A rigorous but weak lower bound
comes from the test function theta^|x|.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from ..oracle import CoveringWalkParams
from . import kernels


class InconsistentBounds(RuntimeError):
    pass


@dataclass
class SpectralRadiusEstimate:
    R_hat: float
    lower: float              # R_hat - heuristic error
    upper: float              # min of the rigorous upper bounds
    lower_rigorous: float     # test-function bound
    error: float
    moments: np.ndarray       # p_2n, n = 0..M
    upper_bounds: dict = field(default_factory=dict)
    method: dict = field(default_factory=dict)

    @property
    def width(self):
        return (self.upper - self.lower) / self.R_hat

    def zuk_gate(self, genus):
        """R > sqrt(g), judged on the lower end of the bracket."""
        return self.lower > math.sqrt(genus)

    def as_dict(self):
        return {"R_hat": self.R_hat, "lower": self.lower, "upper": self.upper,
                "lower_rigorous": self.lower_rigorous, "error": self.error,
                "width": self.width, "moments": self.moments.tolist(),
                "upper_bounds": self.upper_bounds, "method": self.method}


def return_moments(ball, use_numba=None):
    """Exact p_2n(1, 1) for n = 0..ball.radius."""
    op = ball.op
    arrays = kernels.operator_arrays(op)
    sizes = np.asarray(ball.orbit_size, dtype=np.float64)
    v = np.zeros(op.n)
    v[0] = 1.0
    out = [1.0]
    for _ in range(ball.radius):
        v = kernels.push(op, v, arrays=arrays, use_numba=use_numba)
        out.append(float(np.sum(v * v / sizes)))
    return np.asarray(out)


def _fit_log_R(p2, order, npts, end):
    n = np.arange(end - npts, end, dtype=np.float64)
    y = np.log(p2[end - npts:end]) + 1.5 * np.log(n)
    cols = [np.ones_like(n), -2 * n] + [n ** -j for j in range(1, order + 1)]
    sol = np.linalg.lstsq(np.stack(cols, 1), y, rcond=None)[0]
    return float(np.exp(sol[1]))


def extrapolate_radius(p2, order=3, safety=3.0):
    """Point estimate and heuristic error from p_2n, n = 0..M."""
    p2 = np.asarray(p2, dtype=np.float64)
    M = len(p2) - 1
    npts = order + 2
    if M < npts + 1:
        order = max(1, M - 3)
        npts = order + 2
    if M < npts + 1:
        raise ValueError("need more moments (ball radius too small)")
    last = _fit_log_R(p2, order, npts, M + 1)
    prev = _fit_log_R(p2, order, npts, M)
    return last, safety * abs(last - prev), {"order": order, "window": npts,
                                             "previous": prev}


def down_degree_max(ball):
    """Largest number of neighbours one step closer to 1 (explicit balls only)."""
    nbr = ball.nbr
    rs = ball.row_sphere()
    inner = ball.sphere_ptr[ball.radius]
    t = nbr[:inner]
    down = (t >= 0) & (rs[np.maximum(t, 0)] == rs[:inner, None] - 1)
    return int(down.sum(1).max())


def test_function_bound(L, dmax):
    """rho <= min_theta max_x (d/theta + (L - d) theta) / L = 2 sqrt(d (L - d)) / L."""
    if dmax <= 0:
        return math.inf
    rho = 2 * math.sqrt(dmax * (L - dmax)) / L
    return 1.0 / rho if rho > 0 else math.inf


def spectral_radius(pres, ball, max_steps=None, dmax=None, use_numba=None):
    """Bracket for R from the exact moments on the ball.

    dmax is the largest down-degree over the group (2 for surface groups,
    1 for free groups); if None it is read off the ball, which needs an
    explicit ball, and defaults to 2 (surface) or 1 (free) otherwise.
    """
    if ball.radius < 4:
        raise ValueError("spectral_radius needs ball radius >= 4")
    p2 = return_moments(ball, use_numba=use_numba)
    if max_steps is not None:
        p2 = p2[:max_steps // 2 + 1]
    n = np.arange(1, len(p2))
    root = p2[1:] ** (-1.0 / (2 * n))
    ratio = np.sqrt(p2[:-1] / p2[1:])[1:]
    Rt = float(CoveringWalkParams(pres.genus).radius())
    ub = {"covering_walk": Rt,
          "moment_root": float(root.min()),
          "moment_ratio": float(ratio.min())}
    upper = min(ub.values())
    R_hat, err, meta = extrapolate_radius(p2)
    if dmax is None:
        if ball.nbr is not None and not ball.lumped:
            dmax = down_degree_max(ball)
        else:
            dmax = 2 if pres.surface else 1
    low_rig = test_function_bound(pres.ngens, dmax)
    if R_hat > upper:
        meta["unclamped"] = R_hat
        R_hat = upper
    lower = min(R_hat - err, upper)
    meta.update({"moments_exact_to": 2 * (len(p2) - 1), "ball_radius": ball.radius,
                 "dmax": dmax, "law": "p_2n ~ C R^-2n n^-3/2"})
    est = SpectralRadiusEstimate(R_hat, lower, upper, low_rig, err, p2, ub, meta)
    if low_rig > upper * (1 + 1e-12) or meta.get("unclamped", 0) > upper * (1 + 1e-3):
        raise InconsistentBounds(f"bounds disagree: {est.as_dict()}")
    return est
