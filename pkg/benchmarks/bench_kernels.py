"""Numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--radius 6] [--lumped-radius 8] [--repeat 5]

Times one operator push, one Collatz-Wielandt ratio scan (41 values of c)
and a full Green sweep, each with use_numba=True and use_numba=False, and
checks that both paths give the same numbers.  Setting
SURFACEWALK_NO_NUMBA=1 switches the library default to numpy; this script
passes use_numba explicitly so it always measures both.
"""
import argparse
import time

import numpy as np

from surfacewalk.green import kernels
from surfacewalk.green.field import sweep
from surfacewalk.group import GroupPresentation, ball_enumerate


def best_of(fn, repeat):
    fn()                                    # warm-up (numba compiles here)
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        ts.append(time.perf_counter() - t0)
    return min(ts), out


def bench_ball(label, ball, repeat):
    op = ball.op
    arrays = kernels.operator_arrays(op)
    rng = np.random.default_rng(0)
    v = rng.random(op.n)
    v1 = kernels.push(op, v, arrays=arrays, use_numba=False)
    v2 = kernels.push(op, v1, arrays=arrays, use_numba=False)
    cs = np.linspace(0.0, 4.0, 41)
    rs = [0.5, 1.0, 1.4]
    cases = {
        "push": lambda nb: kernels.push(op, v, arrays=arrays, use_numba=nb),
        "cw_ratios": lambda nb: kernels.cw_ratios(v, v1, v2, cs, use_numba=nb),
        "sweep": lambda nb: sweep(ball, rs, tol=1e-9, use_numba=nb).mass,
    }
    print(f"\n{label}: {op.n} rows")
    print(f"{'kernel':<10} {'numba [s]':>10} {'numpy [s]':>10} {'speedup':>8} {'max diff':>10}")
    for name, fn in cases.items():
        t_nb, a = best_of(lambda: fn(True), repeat if name != "sweep" else 1)
        t_np, b = best_of(lambda: fn(False), repeat if name != "sweep" else 1)
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        fin = np.isfinite(a) & np.isfinite(b)
        diff = float(np.max(np.abs(a[fin] - b[fin]) / np.maximum(np.abs(b[fin]), 1e-300))) if fin.any() else 0.0
        print(f"{name:<10} {t_nb:>10.4f} {t_np:>10.4f} {t_np / t_nb:>8.1f} {diff:>10.2e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--radius", type=int, default=6, help="explicit ball radius")
    ap.add_argument("--lumped-radius", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args()
    pres = GroupPresentation(2)
    bench_ball(f"explicit B({a.radius}), g=2", ball_enumerate(pres, a.radius), a.repeat)
    bench_ball(f"lumped B({a.lumped_radius}), g=2",
               ball_enumerate(pres, a.lumped_radius, lumped=True, store_words=False), a.repeat)


if __name__ == "__main__":
    main()
