"""Time the numba and numpy kernels on the same assembly workload.

Usage::

    python benchmarks/bench_kernels.py --n 16 --q 7 --repeat 3
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from corner_bie import _kernels, build_graded_mesh, build_polygon, default_partition
from corner_bie.mesh import uniform_spec
from corner_bie.operators import Assembly

SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]


def workload(mesh):
    asm = Assembly(mesh)
    asm.A
    asm.C
    return asm


def time_backend(name: str, mesh, repeat: int) -> tuple[float, np.ndarray]:
    _kernels.angle_matrix = getattr(_kernels, f"angle_matrix_{name}")
    _kernels.layer_matrix = getattr(_kernels, f"layer_matrix_{name}")
    workload(mesh)  # warm up (numba compiles on first call)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        asm = workload(mesh)
        best = min(best, time.perf_counter() - t0)
    return best, asm.C


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=16, help="panels per half-segment")
    parser.add_argument("--q", type=float, default=7.0, help="grading exponent")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba backend unavailable (unset CORNER_BIE_BACKEND or install numba)")
    poly = build_polygon(SQUARE)
    mesh = build_graded_mesh(poly, default_partition(poly), uniform_spec(poly, args.n, args.q))
    print(f"square, n={args.n}, q={args.q}: {mesh.n_panels} panels")
    results = {name: time_backend(name, mesh, args.repeat) for name in ("numba", "numpy")}
    for name, (t, _) in results.items():
        print(f"{name:>6}: {t:8.3f} s  (A and C assembly, best of {args.repeat})")
    diff = np.max(np.abs(results["numba"][1] - results["numpy"][1]))
    print(f"speedup {results['numpy'][0] / results['numba'][0]:.2f}x, max |C_numba - C_numpy| = {diff:.2e}")


if __name__ == "__main__":
    main()
