"""Branching random walks with Poisson offspring on a Cayley ball.

Each particle of generation n has Poisson(r) children; every child takes
one step of the random walk.  The mean number of particles at y in
generation n is r^n P^n(1, y), so the mean total number of visits is
G_r(1, y).  Particles that step out of the ball are killed, matching the
absorbing boundary of the operator engine, so Monte Carlo tallies and the
exact sums refer to the same truncated walk.

Colored runs split Poisson(R + eps) into U ~ Poisson(R) children of the
parent's color and V ~ Poisson(eps) pioneers of color + 1.  Two placements
of pioneers are supported:

* "jump": pioneers step like every other child.  Then the color-k mean is
  eps^k (P G_R)^k G_R, i.e. sum_n C(n, k) R^(n-k) eps^k P^n by generation.
* "stay": pioneers are born at the parent's site without a step.  Then the
  color-k mean is eps^k G_R^(k+1), the k-fold Green convolution, and by
  generation sum_n C(n, k) R^(n-k) eps^k P^(n-k).
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .green import kernels
from .green.field import sweep

PARTICLE_CAP = 10**7


def poisson_inversion(rng, mean, size):
    """Poisson variates by inverting the cdf (deterministic given the stream)."""
    if mean < 0:
        raise ValueError("Poisson mean must be >= 0")
    if mean == 0 or size == 0:
        return np.zeros(size, dtype=np.int64)
    if mean >= 10:
        return rng.poisson(mean, size)
    kmax = int(mean + 12 * math.sqrt(mean) + 25)
    k = np.arange(kmax + 1)
    logpmf = k * math.log(mean) - mean - np.array([math.lgamma(i + 1) for i in k])
    cdf = np.cumsum(np.exp(logpmf))
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size), side="right").astype(np.int64)


@dataclass
class BRWConfig:
    r: float
    horizon: int
    replicas: int = 10000
    seed: int = 0
    cap: int = PARTICLE_CAP
    probs: np.ndarray | None = None

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("offspring mean must be >= 0")
        if self.cap <= 0 or self.horizon < 0 or self.replicas < 1:
            raise ValueError("cap, horizon and replicas must be positive")


@dataclass
class ColoredBRWConfig:
    R: float
    eps: float
    kmax: int
    horizon: int
    replicas: int = 10000
    seed: int = 0
    pioneers: str = "jump"
    cap: int = PARTICLE_CAP

    def __post_init__(self):
        if self.eps < 0 or self.R < 0:
            raise ValueError("R and eps must be >= 0")
        if self.pioneers not in ("jump", "stay"):
            raise ValueError("pioneers must be 'jump' or 'stay'")

    @property
    def mean(self):
        return self.R + self.eps


@dataclass
class VisitTally:
    """Mean visits per row (and color) with Monte Carlo standard errors."""
    mean: np.ndarray            # (colors, n_rows)
    se: np.ndarray
    replicas: int
    generation_mean: np.ndarray  # mean particles per generation (all colors)
    generation_se: np.ndarray
    pioneer_mean: np.ndarray | None = None   # (colors, n_rows) pioneers born per site
    pioneer_se: np.ndarray | None = None
    truncated: list = field(default_factory=list)  # (replica, generation) cap hits
    seed: int = 0

    def at(self, row, color=0):
        return float(self.mean[color, row]), float(self.se[color, row])


class _Acc:
    def __init__(self, shape):
        self.s = np.zeros(shape)
        self.s2 = np.zeros(shape)

    def add(self, flat_index, counts):
        self.s.flat[flat_index] += counts
        self.s2.flat[flat_index] += counts.astype(np.float64) ** 2

    def finish(self, n):
        m = self.s / n
        var = np.maximum(self.s2 / n - m * m, 0.0)
        return m, np.sqrt(var / max(n - 1, 1))


def _replica_rng(seed, i):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(i)]))


def _steps(rng, nbr, sites, L, probs):
    if probs is None:
        letters = rng.integers(0, L, sites.size)
    else:
        letters = np.searchsorted(np.cumsum(probs), rng.random(sites.size), side="right")
        letters = np.minimum(letters, L - 1)
    return nbr[sites, letters]


def _check_ball(ball):
    if ball.lumped or ball.nbr is None:
        raise ValueError("branching walks need an explicit ball")


def simulate_brw(config, ball, start=0):
    """Plain branching random walk; tallies visits per row over all generations."""
    _check_ball(ball)
    n = ball.n_rows
    L = ball.pres.ngens
    visits = _Acc((1, n))
    gens = _Acc((config.horizon + 1,))
    truncated = []
    for i in range(config.replicas):
        rng = _replica_rng(config.seed, i)
        sites = np.array([start], dtype=np.int64)
        sizes = np.zeros(config.horizon + 1)
        tally = {}
        for g in range(config.horizon + 1):
            sizes[g] = sites.size
            u, c = np.unique(sites, return_counts=True)
            for a, b in zip(u.tolist(), c.tolist()):
                tally[a] = tally.get(a, 0) + b
            if g == config.horizon or sites.size == 0:
                break
            kids = poisson_inversion(rng, config.r, sites.size)
            total = int(kids.sum())
            if total > config.cap:
                truncated.append((i, g))
                break
            parents = np.repeat(sites, kids)
            nxt = _steps(rng, ball.nbr, parents, L, config.probs)
            sites = nxt[nxt >= 0]
        if tally:
            idx = np.fromiter(tally.keys(), dtype=np.int64)
            visits.add(idx, np.fromiter(tally.values(), dtype=np.float64))
        gens.add(np.arange(config.horizon + 1), sizes)
    m, se = visits.finish(config.replicas)
    gm, gse = gens.finish(config.replicas)
    return VisitTally(m, se, config.replicas, gm, gse, truncated=truncated, seed=config.seed)


def colored_vk_mc(config, ball, start=0):
    """Colored branching walk; visit and pioneer tallies for colors 0..kmax."""
    _check_ball(ball)
    n = ball.n_rows
    L = ball.pres.ngens
    K = config.kmax + 1
    visits = _Acc((K, n))
    pion = _Acc((K, n))
    gens = _Acc((config.horizon + 1,))
    truncated = []
    for i in range(config.replicas):
        rng = _replica_rng(config.seed, i)
        sites = np.array([start], dtype=np.int64)
        colors = np.zeros(1, dtype=np.int64)
        sizes = np.zeros(config.horizon + 1)
        vt, pt = {}, {}
        for g in range(config.horizon + 1):
            sizes[g] = sites.size
            key = colors * n + sites
            u, c = np.unique(key, return_counts=True)
            for a, b in zip(u.tolist(), c.tolist()):
                vt[a] = vt.get(a, 0) + b
            if g == config.horizon or sites.size == 0:
                break
            nu = poisson_inversion(rng, config.R, sites.size)
            nv = poisson_inversion(rng, config.eps, sites.size)
            if int(nu.sum() + nv.sum()) > config.cap:
                truncated.append((i, g))
                break
            # same-color children step; pioneers step or stay
            s_u = np.repeat(sites, nu)
            c_u = np.repeat(colors, nu)
            s_v = np.repeat(sites, nv)
            c_v = np.repeat(colors, nv) + 1
            keep = c_v < K
            s_v, c_v = s_v[keep], c_v[keep]
            s_u = _steps(rng, ball.nbr, s_u, L, None)
            if config.pioneers == "jump":
                s_v = _steps(rng, ball.nbr, s_v, L, None)
            ok_v = s_v >= 0
            # a pioneer is counted where it is born, even if it then dies at the boundary
            if config.pioneers == "stay":
                pk = c_v * n + s_v
            else:
                pk = c_v[ok_v] * n + s_v[ok_v]
            if pk.size:
                u, c = np.unique(pk, return_counts=True)
                for a, b in zip(u.tolist(), c.tolist()):
                    pt[a] = pt.get(a, 0) + b
            ok_u = s_u >= 0
            sites = np.concatenate([s_u[ok_u], s_v[ok_v]])
            colors = np.concatenate([c_u[ok_u], c_v[ok_v]])
        if vt:
            visits.add(np.fromiter(vt.keys(), dtype=np.int64), np.fromiter(vt.values(), dtype=np.float64))
        if pt:
            pion.add(np.fromiter(pt.keys(), dtype=np.int64), np.fromiter(pt.values(), dtype=np.float64))
        gens.add(np.arange(config.horizon + 1), sizes)
    m, se = visits.finish(config.replicas)
    pm, pse = pion.finish(config.replicas)
    gm, gse = gens.finish(config.replicas)
    return VisitTally(m, se, config.replicas, gm, gse, pm, pse, truncated, config.seed)


# ---- exact tallies ---------------------------------------------------------------

def _powers(ball, nsteps, start=0, use_numba=None):
    """P^n(1, .) as orbit masses for n = 0..nsteps (killed at the boundary)."""
    op = ball.op
    arrays = kernels.operator_arrays(op)
    v = np.zeros(op.n)
    v[start] = 1.0
    out = [v]
    for _ in range(nsteps):
        v = kernels.push(op, v, arrays=arrays, use_numba=use_numba)
        out.append(v)
    return out


def brw_exact(r, horizon, ball, use_numba=None):
    """Mean visits per element up to the horizon: sum_{n<=H} r^n P^n(1, .)."""
    sizes = np.asarray(ball.orbit_size, dtype=np.float64)
    tot = np.zeros(ball.n_rows)
    for n, v in enumerate(_powers(ball, horizon, use_numba=use_numba)):
        tot += r ** n * v
    return tot / sizes


def colored_vk_horizon(R, eps, kmax, horizon, ball, pioneers="jump", use_numba=None):
    """Exact per-color mean visits up to the horizon, (kmax + 1, n_rows)."""
    sizes = np.asarray(ball.orbit_size, dtype=np.float64)
    pw = _powers(ball, horizon, use_numba=use_numba)
    out = np.zeros((kmax + 1, ball.n_rows))
    for k in range(kmax + 1):
        for n in range(k, horizon + 1):
            coef = math.comb(n, k) * R ** (n - k) * eps ** k
            out[k] += coef * (pw[n] if pioneers == "jump" else pw[n - k])
    return out / sizes


def colored_vk_exact(eps, k, ball, R, horizon=None, tol=1e-13, use_numba=None):
    """eps^k (G_R^(k+1))(1, .): the k-fold Green convolution on the ball.

    Works on lumped balls (every iterate is invariant under the symmetries
    fixing 1).  Returns (values per element, tail bound per element); the
    tail bound propagates the rigorous series tails through the iteration.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    sizes = np.asarray(ball.orbit_size, dtype=np.float64)
    s = sweep(ball, [R], horizon, tol=tol, use_numba=use_numba)
    mass, err = s.mass[0], s.tail[0]
    gmax = mass[0] + err[0]      # G(x, y) <= G(1, 1) for all x, y
    for _ in range(k):
        s = sweep(ball, [R], horizon, tol=tol, start=mass, use_numba=use_numba)
        # (v + e) G <= v G + e G, and e G at one element is at most |e| G(1, 1)
        err = eps * (s.tail[0] + err.sum() * gmax * sizes)
        mass = eps * s.mass[0]
    return mass / sizes, err / sizes


def snapback_ratios(R, delta, kmax, ball, horizon=None, tol=1e-13, use_numba=None):
    """H_k(delta) = sum G(1,x_1) ... G(x_{k-1},x_k) (1+delta)^|x_k| G(x_k,1), k = 1..kmax.

    Returns (H, ratios H_{k+1}/H_k).  G(x, 1) = G(1, x) by symmetry of the walk.
    """
    sizes = np.asarray(ball.orbit_size, dtype=np.float64)
    weight = (1.0 + delta) ** ball.row_sphere()
    s = sweep(ball, [R], horizon, tol=tol, use_numba=use_numba)
    g = s.mass[0] / sizes
    mass = s.mass[0]
    H = []
    for k in range(1, kmax + 1):
        H.append(float(np.sum(mass * weight * g)))
        if k < kmax:
            mass = sweep(ball, [R], horizon, tol=tol, start=mass, use_numba=use_numba).mass[0]
    H = np.asarray(H)
    return H, H[1:] / H[:-1]
