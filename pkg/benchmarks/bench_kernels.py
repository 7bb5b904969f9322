"""Compare compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Each workload runs on every available backend; outputs are checked for
bitwise agreement before timings are reported.
"""

import argparse
import json
import time

import numpy as np

from skinkit import kernels
from skinkit.geometry import fixtures
from skinkit.geometry.sdf import voxelize_sdf
from skinkit.geometry.shell import SkinParams, offset_shell
from skinkit.placement import PlacementConfig, sample_poisson


def _workloads():
    shell = offset_shell(fixtures.icosphere(0.1, 3), SkinParams(thickness=0.005))
    patch = fixtures.rectangle(0.28, 0.104, 28, 10)
    big = fixtures.rectangle(1.0, 1.0, 40, 40)
    rng = np.random.default_rng(0)
    tri = rng.normal(size=(3, 3))
    pts = rng.normal(size=(200000, 3))

    return {
        "voxelize 2 mm sphere shell": lambda: voxelize_sdf(shell, 0.002).values,
        "poisson 4.5 cm patch": lambda: np.array(
            [s.position for s in sample_poisson(patch, None, PlacementConfig(0.045, seed=3))]),
        "poisson 2 cm 1 m^2": lambda: np.array(
            [s.position for s in sample_poisson(big, None, PlacementConfig(0.02, seed=3))]),
        "point-triangle x200000": lambda: kernels.point_triangle_distance(pts, *tri),
    }


def _time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args(argv)

    backends = kernels.available()
    prev = kernels.backend_name()
    results = []
    try:
        for name, fn in _workloads().items():
            row = {"workload": name}
            ref = None
            for b in backends:
                kernels.use_backend(b)
                row[b], out = _time(fn, args.repeat)
                if ref is None:
                    ref = out
                elif not np.array_equal(ref, out):
                    raise SystemExit(f"backends disagree on {name!r}")
            results.append(row)
    finally:
        kernels.use_backend(prev)

    header = f"{'workload':32s}" + "".join(f"{b:>12s}" for b in backends)
    if "compiled" in backends:
        header += f"{'speedup':>10s}"
    print(header)
    for row in results:
        line = f"{row['workload']:32s}" + "".join(f"{row[b]:11.4f}s" for b in backends)
        if "compiled" in backends:
            line += f"{row['python'] / row['compiled']:9.1f}x"
        print(line)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
