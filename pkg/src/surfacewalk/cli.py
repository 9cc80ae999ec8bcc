"""Command line front end.

    surfacewalk [--config FILE] [--out-dir DIR] [--seed N] [--threads N] COMMAND [options]

Every command writes COMMAND.csv (table), COMMAND.json (diagnostics plus
the validated configuration) and manifest.json into the output directory.
Exit codes: 0 success, 1 certified-invariant violation, 2 usage error.
"""
import argparse
import csv
import hashlib
import io
import json
import os
from pathlib import Path
import platform
import sys
import time

import numpy as np

from . import __version__
from . import experiments as ex

COMMANDS = {
    "oracle": ex.oracle_table,
    "green": ex.green_table,
    "spectral-radius": ex.spectral,
    "ancona-scan": ex.ancona,
    "inequalities": ex.inequalities,
    "renewal": ex.renewal,
    "exponent": ex.exponent,
    "decay": ex.decay,
    "brw": ex.brw_verify,
    "brw-colored": ex.colored,
    "automaton": ex.automaton_validate,
    "pressure": ex.pressure,
    "levels": ex.levels,
    "martin": ex.martin,
    "ergodic-avg": ex.ergodic_avg,
}

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p):
    g = p.add_argument_group("experiment")
    g.add_argument("--genus", type=int)
    g.add_argument("--radius", type=int)
    g.add_argument("--horizon", type=int)
    g.add_argument("--tol", type=float)
    g.add_argument("--free", action="store_const", const=True,
                   help="free group F_2g instead of the surface group")
    g.add_argument("--lumped", action="store_const", const=True,
                   help="quotient the ball by its symmetries")
    g.add_argument("--r", type=float)
    g.add_argument("--r-grid", help="start:stop:step or comma list")
    g.add_argument("--samples", type=int)
    g.add_argument("--replicas", type=int)
    g.add_argument("--eps", type=float)
    g.add_argument("--kmax", type=int)
    g.add_argument("--pioneers", choices=("jump", "stay"))
    g.add_argument("--theta", type=float)
    g.add_argument("--K", type=int)
    g.add_argument("--validate-radius", type=int)
    g.add_argument("--lengths")
    g.add_argument("--pairs", type=int)
    g.add_argument("--window")
    g.add_argument("--eps-grid")
    g.add_argument("--x")
    g.add_argument("--ray")
    g.add_argument("--m-range")


def build_parser():
    p = _Parser(prog="surfacewalk", description="Random walks on surface-group Cayley graphs")
    p.add_argument("--config", help="JSON file with experiment fields (flags override)")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--cache-dir", default=None, help="reuse ball and field snapshots")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command")
    for name in COMMANDS:
        _add_common(sub.add_parser(name))
    run = sub.add_parser("run-experiment")
    run.add_argument("name", nargs="?")
    _add_common(run)
    for name in ex.EXPERIMENTS:
        if name not in COMMANDS:
            _add_common(sub.add_parser(name))
    return p


def _config_from(args):
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text() or "{}")
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {args.config}: {e}")
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
    skip = {"config", "out_dir", "cache_dir", "threads", "command", "name"}
    for k, v in vars(args).items():
        if k not in skip and v is not None:
            cfg[k] = v
    return cfg


def _csv_text(records):
    if not records:
        return ""
    keys = list(records[0])
    for r in records[1:]:
        keys += [k for k in r if k not in keys]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: _fmt(r.get(k)) for k in keys})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    return str(o)


def config_hash(cfg):
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=_json_default).encode()).hexdigest()


def _versions():
    import scipy
    out = {"surfacewalk": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
           "python": platform.python_version()}
    try:
        import numba
        out["numba"] = numba.__version__
    except ImportError:
        out["numba"] = None
    return out


def run(name, cfg, out_dir=None, cache_dir=None, threads=None):
    """Run a command or named experiment; returns (exit code, manifest)."""
    fn = COMMANDS.get(name) or ex.EXPERIMENTS.get(name)
    if fn is None:
        raise UsageError(f"unknown experiment '{name}'; choose from "
                         f"{sorted(set(COMMANDS) | set(ex.EXPERIMENTS))}")
    cfg = ex.validate_config(cfg)
    if threads:
        try:
            import numba
            numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
        except ImportError:
            pass
    t0 = time.perf_counter()
    result = fn(cfg, ex.Cache(cache_dir))
    elapsed = time.perf_counter() - t0
    out = Path(out_dir or f"out/{name}")
    out.mkdir(parents=True, exist_ok=True)
    files = {f"{name}.csv": _csv_text(result.records),
             f"{name}.json": json.dumps({"experiment": name, "config": cfg,
                                         "diagnostics": result.diagnostics,
                                         "violations": result.violations},
                                        indent=1, sort_keys=True, default=_json_default) + "\n"}
    files.update(result.extra_files)
    inventory = {}
    for fname, text in files.items():
        (out / fname).write_text(text)
        inventory[fname] = hashlib.sha256(text.encode()).hexdigest()
    manifest = {"experiment": name, "config": cfg, "config_hash": config_hash(cfg),
                "versions": _versions(), "seconds": round(elapsed, 3),
                "violations": result.violations, "partial": result.partial,
                "files": inventory}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True,
                                                  default=_json_default) + "\n")
    code = EXIT_VIOLATION if result.violations else EXIT_OK
    return code, manifest


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        name = args.command
        if name == "run-experiment":
            name = args.name
        if not name:
            raise UsageError("no command given")
        cfg = _config_from(args)
        if name == "run-experiment" or (args.command == "run-experiment" and not args.name):
            raise UsageError("run-experiment needs an experiment name")
        code, manifest = run(name, cfg, args.out_dir, args.cache_dir, args.threads)
    except (UsageError, ex.ConfigError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps({"experiment": manifest["experiment"], "violations": manifest["violations"],
                      "files": sorted(manifest["files"]), "seconds": manifest["seconds"]}))
    return code


if __name__ == "__main__":
    sys.exit(main())
