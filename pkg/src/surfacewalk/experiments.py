"""Named experiments: each returns table rows, nested diagnostics and a
count of certified-invariant violations.  The command line writes these
out; tests call them directly.
"""
from dataclasses import dataclass, field
import math
from pathlib import Path

import numpy as np

from . import brw, thermo
from .automaton import build_automaton, free_automaton, growth, recurrent_class, validate_counts
from .green import green_fields, inequality_suite, renewal_residual, spectral_radius
from .green import scans
from .green.spectral import InconsistentBounds
from .group import GroupPresentation, ball_enumerate, radial_tree_ball
from .group.io import ball_fingerprint, load_ball, load_field, save_ball, save_field
from .oracle import CoveringWalkParams, covering_oracle, green_derivative, tree_eta


class ConfigError(ValueError):
    """Invalid experiment configuration (usage error)."""


@dataclass
class Result:
    records: list
    diagnostics: dict = field(default_factory=dict)
    violations: int = 0
    partial: bool = False
    extra_files: dict = field(default_factory=dict)   # name -> text


# ---- configuration -----------------------------------------------------------

DEFAULTS = {
    "genus": 2, "radius": 6, "horizon": None, "tol": 1e-12, "free": False, "lumped": False,
    "r": None, "r_grid": None, "seed": 0, "samples": 1000, "replicas": 10000,
    "eps": 0.05, "kmax": 2, "theta": 2.0, "K": None, "validate_radius": 10,
    "lengths": None, "pairs": 20, "window": None, "eps_grid": None, "x": None, "ray": None,
    "m_range": None, "pioneers": "jump",
}

TYPES = {"genus": int, "radius": int, "horizon": int, "tol": float, "free": bool,
         "lumped": bool, "r": float, "seed": int, "samples": int, "replicas": int,
         "eps": float, "kmax": int, "theta": float, "K": int, "validate_radius": int,
         "pairs": int, "pioneers": str}


def parse_grid(spec):
    """'a:b:step' (inclusive of b up to rounding) or 'x,y,z' or a list."""
    if spec is None:
        return None
    if isinstance(spec, (list, tuple, np.ndarray)):
        return [float(v) for v in spec]
    spec = str(spec).strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid '{spec}' must look like start:stop:step")
        a, b, h = (float(p) for p in parts)
        if h <= 0 or b < a:
            raise ConfigError(f"grid '{spec}' is empty")
        n = int(math.floor((b - a) / h + 1e-9))
        return [round(a + i * h, 12) for i in range(n + 1)]
    try:
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"bad grid '{spec}'") from e


def parse_word(spec, pres):
    if spec is None or isinstance(spec, (list, tuple)):
        return tuple(spec or ())
    return pres.parse(spec)


def _coerce(t, v):
    if t is None:
        return v
    if t is bool:
        return v if isinstance(v, bool) else str(v).lower() in ("1", "true", "yes")
    return t(v)


def validate_config(cfg):
    """Fill defaults, coerce types, report every bad field at once."""
    if not cfg:
        raise ConfigError("empty configuration")
    out = dict(DEFAULTS)
    errors = []
    for k, v in cfg.items():
        key = k.replace("-", "_")
        if key not in DEFAULTS and key not in ("experiment", "out_dir", "threads", "cache_dir"):
            errors.append(f"{k}: unknown field")
            continue
        if v is None:
            out[key] = None
            continue
        t = TYPES.get(key)
        try:
            out[key] = _coerce(t, v)
        except (TypeError, ValueError):
            errors.append(f"{k}: expected {t.__name__}, got {v!r}")
    if out["genus"] is not None and out["genus"] < 1:
        errors.append("genus: must be >= 1")
    if out["radius"] is not None and out["radius"] < 0:
        errors.append("radius: must be >= 0")
    for key in ("r_grid", "eps_grid", "lengths", "m_range", "window"):
        try:
            out[key] = parse_grid(out[key])
        except ConfigError as e:
            errors.append(f"{key}: {e}")
    if errors:
        raise ConfigError("; ".join(errors))
    return out


def r_values(cfg, default=None):
    if cfg["r_grid"]:
        return cfg["r_grid"]
    if cfg["r"] is not None:
        return [cfg["r"]]
    if default is None:
        raise ConfigError("r or r_grid is required")
    return list(default)


# ---- cache -------------------------------------------------------------------

class Cache:
    """Ball and field snapshots under one directory (no-op when dir is None)."""

    def __init__(self, directory=None):
        self.dir = Path(directory) if directory else None
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def ball(self, pres, radius, lumped=False):
        if lumped and not pres.surface:
            return radial_tree_ball(pres.genus, radius)
        tag = f"ball_g{pres.genus}{'s' if pres.surface else 'f'}_M{radius}{'_lumped' if lumped else ''}.npz"
        if self.dir and (self.dir / tag).exists():
            return load_ball(self.dir / tag)
        b = ball_enumerate(pres, radius, lumped=lumped)
        if self.dir:
            save_ball(b, self.dir / tag)
        return b

    def fields(self, rs, ball, horizon=None, tol=1e-12, boundary=False, deriv=False):
        if not self.dir or not hasattr(ball, "keys"):
            return green_fields(rs, ball, horizon, tol, boundary, deriv)
        fp = ball_fingerprint(ball)
        out, todo = {}, []
        for r in rs:
            p = self.dir / f"field_{fp}_r{r!r}_N{horizon}_t{tol:g}_b{int(boundary)}_d{int(deriv)}.npz"
            if p.exists():
                out[r] = load_field(p, ball)
            else:
                todo.append(r)
        if todo:
            for r, f in zip(todo, green_fields(todo, ball, horizon, tol, boundary, deriv)):
                save_field(f, self.dir / f"field_{fp}_r{r!r}_N{horizon}_t{tol:g}_b{int(boundary)}_d{int(deriv)}.npz")
                out[r] = f
        return [out[r] for r in rs]


def _pres(cfg):
    return GroupPresentation(cfg["genus"], surface=not cfg["free"])


# ---- experiments ------------------------------------------------------------

def oracle_table(cfg, cache=None):
    g = cfg["genus"]
    R = CoveringWalkParams(g).radius()
    rows = []
    for r in r_values(cfg):
        if r > float(R) * (1 + 1e-12):
            raise ConfigError(f"r = {r} beyond R~ = {float(R)}")
        o = covering_oracle(r, g)
        rows.append({"r": r, "R_tilde": float(R), "F": float(o.F), "G": float(o.G),
                     "dG_dr": float(green_derivative(r, g)) if r < float(R) else math.inf,
                     "eta": float(tree_eta(r, g))})
    return Result(rows, {"genus": g, "R_tilde": float(R)})


def green_table(cfg, cache):
    pres = _pres(cfg)
    ball = cache.ball(pres, cfg["radius"], cfg["lumped"])
    fs = cache.fields(r_values(cfg), ball, cfg["horizon"], cfg["tol"], boundary=True)
    rows = []
    for f in fs:
        s = f.sphere_sums(1.0)
        rows.append({"r": f.r, "G11": float(f.values[0]), "certificate": f.certificate,
                     "horizon": f.horizon, "eta": f.eta(),
                     "sphere_sums": ";".join(f"{v:.12g}" for v in s)})
    return Result(rows, {"radius": ball.radius, "rows": ball.n_rows})


def spectral(cfg, cache):
    pres = _pres(cfg)
    ball = cache.ball(pres, cfg["radius"], cfg["lumped"])
    try:
        est = spectral_radius(pres, ball)
    except InconsistentBounds as e:
        return Result([], {"error": str(e)}, violations=1)
    gate = est.zuk_gate(pres.genus) if pres.surface else True
    d = est.as_dict()
    d["zuk_gate"] = gate
    row = {k: d[k] for k in ("R_hat", "lower", "upper", "lower_rigorous", "error", "width")}
    row["zuk_gate"] = gate
    return Result([row], d, violations=0 if gate else 1)


def inequalities(cfg, cache):
    pres = _pres(cfg)
    ball = cache.ball(pres, cfg["radius"])
    rep = inequality_suite(r_values(cfg, [1.0]), ball, samples=cfg["samples"], seed=cfg["seed"],
                           horizon=cfg["horizon"], raise_on_violation=False)
    return Result(rep.as_records(), {"counts": rep.counts()}, violations=len(rep.violations))


def ancona(cfg, cache):
    pres = _pres(cfg)
    ball = cache.ball(pres, cfg["radius"], cfg["lumped"])
    fs = cache.fields(r_values(cfg, [1.0, 1.2, 1.4]), ball, cfg["horizon"], cfg["tol"])
    lengths = [int(v) for v in (cfg["lengths"] or range(2, max(3, ball.radius - 1)))]
    sc = scans.ancona_scan(fs, lengths, pairs=cfg["pairs"], seed=cfg["seed"])
    rows = [{"r": float(r), "C_hat": float(c), "inv_G11": float(1 / f.values[0])}
            for r, c, f in zip(sc.rs, sc.C, fs)]
    return Result(rows, {"flatness": sc.flatness, "geodesics": sc.n_geodesics,
                         "pairs": sc.n_pairs, "cap": sc.cap, "capped": sc.capped,
                         "lengths": lengths,
                         "by_length": {int(k): v.tolist() for k, v in sc.C_by_length.items()}})


def decay(cfg, cache):
    pres = _pres(cfg)
    ball = cache.ball(pres, cfg["radius"], cfg["lumped"])
    fs = cache.fields(r_values(cfg, [1.0]), ball, cfg["horizon"], cfg["tol"], boundary=True)
    rows, viol = [], 0
    for f in fs:
        d = scans.decay_fit(f)
        margin = scans.sphere_sum_lower_bound(f)
        viol += int(np.sum(margin < 0))
        rows.append({"r": f.r, "rho": d.rate, "eventually_decreasing": d.eventually_decreasing,
                     "log_max": ";".join(f"{v:.10g}" for v in d.log_max),
                     "min_sphere_margin": float(np.min(margin))})
    return Result(rows, {}, violations=viol)


def exponent(cfg, cache):
    if cfg["free"]:
        deltas = np.geomspace(1e-4, 1e-2, 9)
        fit = scans.free_gap_exponent(cfg["genus"], deltas)
        eta = scans.free_eta_exponent(cfg["genus"], deltas)
        rows = [{"quantity": "G_R - G_r", "slope": fit.slope, "residual": fit.residual,
                 "corrected_slope": fit.corrected.get("slope")},
                {"quantity": "eta", "slope": eta.slope, "residual": eta.residual,
                 "corrected_slope": None}]
        return Result(rows, {"gap": fit.as_dict(), "eta": eta.as_dict()})
    pres = _pres(cfg)
    ball = cache.ball(pres, cfg["radius"], True)
    est = spectral_radius(pres, ball)
    rs = r_values(cfg, scans.critical_grid(est.R_hat, 2, 6))
    fs = cache.fields(list(rs), ball, cfg["horizon"], cfg["tol"])
    try:
        fit = scans.eta_and_exponent(fs, est.R_hat, est.lower)
    except scans.UnusableGrid as e:
        return Result([], {"error": str(e), "spectral": est.as_dict()}, partial=True)
    rows = [{"r": float(r), "log_delta": float(x), "log_eta": float(y)}
            for r, x, y in zip(fit.used, fit.x, fit.y)]
    return Result(rows, {"slope": fit.slope, "fit": fit.as_dict(), "R_hat": est.R_hat,
                         "R_lower": est.lower})


def brw_verify(cfg, cache):
    pres = _pres(cfg)
    ball = cache.ball(pres, cfg["radius"])
    H = cfg["horizon"] or 20
    r = cfg["r"] if cfg["r"] is not None else 1.0
    tally = brw.simulate_brw(brw.BRWConfig(r, H, cfg["replicas"], cfg["seed"]), ball)
    exact = brw.brw_exact(r, H, ball)
    z = (tally.mean[0] - exact) / np.where(tally.se[0] > 0, tally.se[0], np.inf)
    rows = []
    for row in range(min(ball.n_rows, 1 + pres.ngens)):
        rows.append({"row": row, "word": pres.format(ball.word(row)), "mc": float(tally.mean[0, row]),
                     "se": float(tally.se[0, row]), "exact": float(exact[row]), "z": float(z[row])})
    viol = int(np.sum(np.abs(z[:1 + pres.ngens]) > 3))
    return Result(rows, {"r": r, "horizon": H, "replicas": cfg["replicas"],
                         "truncated": tally.truncated, "max_abs_z": float(np.max(np.abs(z)))},
                  violations=viol)


def colored(cfg, cache):
    pres = _pres(cfg)
    ball = cache.ball(pres, cfg["radius"])
    H = cfg["horizon"] or 30
    R = cfg["r"] if cfg["r"] is not None else 1.5
    conf = brw.ColoredBRWConfig(R, cfg["eps"], cfg["kmax"], H, cfg["replicas"], cfg["seed"],
                                cfg["pioneers"])
    tally = brw.colored_vk_mc(conf, ball)
    exact = brw.colored_vk_horizon(R, cfg["eps"], cfg["kmax"], H, ball, cfg["pioneers"])
    rows, viol = [], 0
    for k in range(cfg["kmax"] + 1):
        for row in range(1 + pres.ngens):
            se = tally.se[k, row]
            z = (tally.mean[k, row] - exact[k, row]) / se if se > 0 else 0.0
            viol += int(abs(z) > 3)
            rows.append({"color": k, "row": row, "mc": float(tally.mean[k, row]),
                         "se": float(se), "exact": float(exact[k, row]), "z": float(z)})
    return Result(rows, {"R": R, "eps": cfg["eps"], "horizon": H, "pioneers": cfg["pioneers"]},
                  violations=viol)


def automaton_validate(cfg, cache):
    pres = _pres(cfg)
    vr = cfg["validate_radius"]
    if pres.surface:
        lball = cache.ball(pres, vr, True)
        counts = lball.sphere_counts()
        aut = build_automaton(pres, K=cfg["K"], validate_radius=vr, counts=counts)
    else:
        aut = free_automaton(pres.genus)
        counts = [1] + [4 * pres.genus * (4 * pres.genus - 1) ** (m - 1) for m in range(1, vr + 1)]
        validate_counts(aut, vr, counts)
    paths = aut.path_counts(vr)
    rows = [{"m": m, "automaton": paths[m], "bfs": counts[m], "match": paths[m] == counts[m]}
            for m in range(vr + 1)]
    rec = recurrent_class(aut)
    gr = growth(aut, vr, counts)
    viol = sum(not r["match"] for r in rows)
    return Result(rows, {"K": aut.K, "states": aut.n_states, "recurrent": len(rec.recurrent),
                         "zeta": gr.zeta, "C": gr.C},
                  violations=viol,
                  extra_files={"automaton.json": aut.to_json(), "automaton.dot": aut.to_dot()})


def _thermo_fields(cfg, cache, rs, deriv=False, boundary=False):
    pres = _pres(cfg)
    ball = cache.ball(pres, cfg["radius"], cfg["lumped"])
    return ball, cache.fields(list(rs), ball, cfg["horizon"], cfg["tol"], boundary, deriv)


def pressure(cfg, cache):
    ball, fs = _thermo_fields(cfg, cache, r_values(cfg, [0.8, 1.0, 1.2, 1.4]))
    win = tuple(int(v) for v in cfg["window"]) if cfg["window"] else None
    ests, inc = thermo.pressure_scan(cfg["theta"], fs, win)
    rows = [{"theta": e.theta, "r": e.r, "slope": e.slope, "slope_high": e.slope_high,
             "residual": e.residual, "window": f"{e.window[0]}-{e.window[1]}"} for e in ests]
    return Result(rows, {"increasing": inc}, violations=0 if inc else 1)


def pressure_zero(cfg, cache):
    """Sphere sums of G^2 at R_lower (flat) and at 0.8 R_hat (decaying)."""
    pres = _pres(cfg)
    ball = cache.ball(pres, cfg["radius"], True)
    est = spectral_radius(pres, ball)
    fc, fs = cache.fields([est.lower, 0.8 * est.R_hat], ball, cfg["horizon"], 1e-9)
    m1 = ball.radius
    chk = thermo.sphere_sum_checks(fc, fs, (max(1, m1 - 4), m1))
    rows = [{"m": m, "crit": c, "sub": s}
            for m, c, s in zip(range(chk["window"][0], chk["window"][1] + 1),
                               chk["crit_sums"], chk["sub_sums"])]
    return Result(rows, {**chk, "spectral": est.as_dict()})


def levels(cfg, cache):
    ball, (f,) = _thermo_fields(cfg, cache, r_values(cfg, [1.0]), boundary=True)
    floor = thermo.level_floor(f)
    eps = cfg["eps_grid"] or list(np.geomspace(10 * floor, 100 * floor, 6))
    lc = thermo.level_set_count(eps, f, floor)
    rows = [{"eps": float(e), "lower": float(a), "upper": float(b), "excluded": bool(x)}
            for e, a, b, x in zip(lc.eps, lc.lower, lc.upper, lc.excluded)]
    return Result(rows, {"slope": lc.slope, "floor": lc.floor, "residual": lc.residual})


def martin(cfg, cache):
    pres = _pres(cfg)
    ball, (f,) = _thermo_fields(cfg, cache, r_values(cfg, [1.0]), boundary=True)
    x = parse_word(cfg["x"] or "a1", pres)
    ray = parse_word(cfg["ray"], pres) if cfg["ray"] else ball.word(int(ball.sphere_ptr[ball.radius - len(x)]))
    mk = thermo.martin_kernel(f.r, x, ray, f)
    rows = [{"n": int(n), "ratio": float(v), "error": float(e)}
            for n, v, e in zip(mk.n, mk.ratios, mk.errors)]
    return Result(rows, {"rate": mk.rate, "truncated": mk.truncated,
                         "x": pres.format(x), "ray": pres.format(ray)})


def ergodic_avg(cfg, cache):
    ball, (f,) = _thermo_fields(cfg, cache, r_values(cfg, [1.0]), deriv=True)
    ms = [int(m) for m in (cfg["m_range"] or range(1, ball.radius))]
    rep = thermo.geodesic_average_stability(f.r, ms, f, samples=None, seed=cfg["seed"])
    rows = [{"m": m, "mean": a, "median": b, "iqr": c, "dispersion": d}
            for m, a, b, c, d in zip(rep.ms, rep.mean, rep.median, rep.iqr, rep.dispersion)]
    return Result(rows, {"xi_eta": rep.xi_eta, "xi": rep.xi, "eta": f.eta()})


def renewal(cfg, cache):
    pres = _pres(cfg)
    ball = cache.ball(pres, cfg["radius"], cfg["lumped"])
    rows, viol = [], 0
    for r in r_values(cfg, [0.5, 1.0]):
        res, cert = renewal_residual(r, ball, horizon=cfg["horizon"], tol=cfg["tol"])
        viol += int(res > cert)
        rows.append({"r": r, "residual": res, "certificate": cert})
    return Result(rows, {}, violations=viol)


EXPERIMENTS = {
    "oracle-table": oracle_table,
    "decay-fit": decay,
    "ancona-scan": ancona,
    "sphere-sums": pressure,
    "pressure-zero": pressure_zero,
    "critical-exponent": exponent,
    "brw-verify": brw_verify,
    "automaton-validate": automaton_validate,
}
