"""Timing comparison of the compiled kernels against the NumPy fallback.

Runs each hot kernel on both backends over a few sizes and prints the
median wall time plus the speedup. Exits non-zero if the two backends
disagree numerically, so this doubles as a coarse parity check.

Usage:
    python3 benchmarks/bench_kernels.py [--repeats N] [--seed S]
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from affplan._kernels import _py

try:
    from affplan._kernels import _ext
except ImportError:
    _ext = None


def median_time(fn, repeats: int) -> float:
    fn()  # warm up caches and lazy allocations
    t0 = time.perf_counter()
    fn()
    rough = time.perf_counter() - t0
    # Loop fast kernels so each sample is around a millisecond; single
    # calls at the small sizes are too short for the clock to resolve.
    inner = max(1, int(1e-3 / max(rough, 1e-9)))
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        times.append((time.perf_counter() - t0) / inner)
    return float(np.median(times))


def make_cases(rng: np.random.Generator):
    cases = []

    for c, n in ((4, 25), (16, 64), (64, 256)):
        a = rng.standard_normal((c, n))
        wk, wq, wv = (rng.standard_normal((c, c)) / np.sqrt(c) for _ in range(3))
        up = rng.standard_normal((c, n))
        alpha = 0.7
        cases.append(
            (
                f"attention fwd c={c} n={n}",
                lambda m, a=a, wk=wk, wq=wq, wv=wv: m.attention_forward(
                    a, wk, wq, wv, 0.7
                )[0],
            )
        )
        cases.append(
            (
                f"attention bwd c={c} n={n}",
                lambda m, a=a, wk=wk, wq=wq, wv=wv, up=up, alpha=alpha: np.concatenate(
                    [g.ravel() for g in m.attention_backward(a, wk, wq, wv, alpha, up)[:4]]
                ),
            )
        )

    for side in (64, 256, 512):
        fg = rng.random((side, side)) < 0.3
        cases.append(
            (
                f"distance transform {side}x{side}",
                lambda m, fg=fg: m.squared_edt(fg).astype(float),
            )
        )

    for side in (64, 256):
        vals = rng.random((side, side))
        fg = rng.random((side, side)) < 0.4
        cases.append(
            (
                f"masked smooth {side}x{side}",
                lambda m, vals=vals, fg=fg: m.masked_gaussian_smooth(
                    vals, fg, 5.0, 15
                ),
            )
        )
    return cases


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeats", type=int, default=7, help="timed runs per case")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _ext is None:
        print("compiled backend not available; build it with pip install -e .")
        return 1

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<34} {'py':>10} {'ext':>10} {'speedup':>8}")
    worst_dev = 0.0
    for name, call in make_cases(rng):
        out_py = np.asarray(call(_py), dtype=np.float64)
        out_ext = np.asarray(call(_ext), dtype=np.float64)
        dev = float(np.max(np.abs(out_py - out_ext)))
        worst_dev = max(worst_dev, dev)
        t_py = median_time(lambda: call(_py), args.repeats)
        t_ext = median_time(lambda: call(_ext), args.repeats)
        print(
            f"{name:<34} {t_py * 1e3:>8.2f}ms {t_ext * 1e3:>8.2f}ms "
            f"{t_py / t_ext:>7.1f}x"
        )

    print(f"\nmax |py - ext| over all cases: {worst_dev:.2e}")
    if worst_dev > 1e-9:
        print("backends disagree beyond tolerance", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
