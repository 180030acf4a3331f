"""Compare the compiled core with the pure-Python fallback.

    python3 benchmarks/bench_backends.py [--sizes 51 101] [--problems hjb1 hjb2] [--repeat 3]

Prints solve seconds (best of ``--repeat``) for each backend, the speed-up,
and the max pointwise difference between the two fields (expected 0).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from ngsp import Grid, HAVE_CORE, ProblemSpec, make_problem, solve


def best_time(grid, field, method, backend, repeat):
    runs = [solve(grid, field, [(0.0, 0.0)], method, backend=backend) for _ in range(repeat)]
    return min(r.wall_seconds for r in runs), runs[0]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[51, 101])
    ap.add_argument("--problems", nargs="+", default=["isotropic", "hjb1", "hjb2"])
    ap.add_argument("--methods", nargs="+", default=["ngsp", "oum"])
    ap.add_argument("--repeat", type=int, default=1)
    args = ap.parse_args(argv)
    if not HAVE_CORE:
        print("compiled core not available; build with `pip install -e . --no-build-isolation`")
        return 1

    print(f"{'problem':10s} {'method':6s} {'N':>5s} {'core s':>9s} {'python s':>10s} "
          f"{'speed-up':>9s} {'max diff':>9s}")
    for name in args.problems:
        field = make_problem(ProblemSpec(name))
        for method in args.methods:
            for n in args.sizes:
                g = Grid(n)
                tc, rc = best_time(g, field, method, "core", args.repeat)
                tp, rp = best_time(g, field, method, "python", args.repeat)
                diff = float(np.max(np.abs(rc.values - rp.values)))
                print(f"{name:10s} {method:6s} {n:5d} {tc:9.4f} {tp:10.3f} {tp / tc:8.0f}x {diff:9.1e}")
                sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
