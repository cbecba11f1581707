"""Wall-clock comparison of the compiled and pure-Python Euler loops.

    python3 benchmarks/bench_backends.py [--repeat N] [--years Y]

Each bundled scenario is run on both backends; the example-3 network is
also run over a longer horizon to show per-step cost. Results must match
bit for bit, which the script checks before reporting times.
"""

from __future__ import annotations

import argparse
import dataclasses
import time

import numpy as np

from hfgt_hydro import kernels, load_bundled, simulate


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--years", type=float, default=20.0, help="horizon for the long example-3 run")
    args = ap.parse_args(argv)
    if "compiled" not in kernels.AVAILABLE:
        raise SystemExit("compiled backend not built; run `pip install -e . --no-build-isolation` first")

    cases = [(n, load_bundled(n)) for n in ("example1", "example2", "example3")]
    ex3 = cases[-1][1]
    steps = int(args.years * 365 * 86400 / ex3.config.dt)
    cases.append((f"example3 x {args.years:g} y", dataclasses.replace(
        ex3, config=dataclasses.replace(ex3.config, horizon=steps, stride=24))))

    print(f"{'scenario':<22}{'steps':>8}{'compiled s':>12}{'python s':>12}{'speedup':>9}")
    for name, doc in cases:
        tc, a = best_of(lambda: simulate(doc, backend="compiled"), args.repeat)
        tp, b = best_of(lambda: simulate(doc, backend="python"), args.repeat)
        if not (np.array_equal(a.states, b.states) and np.array_equal(a.firings, b.firings)):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<22}{doc.config.horizon:>8}{tc:>12.4f}{tp:>12.4f}{tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
