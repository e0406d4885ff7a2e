"""Benchmark the compiled Z2 reduction core against the pure-Python fallback.

Usage: python benchmarks/bench_backends.py [--max-points 96]

Workload: full persistence (edges + triangles) of noisy circle clouds of
growing size, the hot path of the topology module.
"""

import argparse
import time

import numpy as np

from memloop import _reduce_py
from memloop.core import make_rng
from memloop.topology import PointCloud, build_rips

try:
    from memloop import _fastreduce
except ImportError:
    _fastreduce = None


def complex_columns(n_points, seed=0):
    rng = make_rng(seed)
    th = 2 * np.pi * np.arange(n_points) / n_points
    pts = np.column_stack([np.cos(th), np.sin(th)]) + rng.normal(0, 0.05, (n_points, 2))
    comp = build_rips(PointCloud(pts), 2.5)
    edge_cols = [comp.edges[j] for j in range(len(comp.edges))]
    eidx = {tuple(e): j for j, e in enumerate(map(tuple, comp.edges))}
    tri_cols = [
        np.sort([eidx[(t[0], t[1])], eidx[(t[0], t[2])], eidx[(t[1], t[2])]])
        for t in map(tuple, comp.triangles)
    ]
    return comp, edge_cols, tri_cols


def run_reduction(impl, n_vertices, edge_cols, tri_cols):
    impl.reduce_columns(edge_cols, n_vertices, need_basis=True)
    impl.reduce_columns(tri_cols, len(edge_cols), need_chains=True)


def bench(impl, n_vertices, edge_cols, tri_cols, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        run_reduction(impl, n_vertices, edge_cols, tri_cols)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--max-points", type=int, default=96)
    args = parser.parse_args()

    sizes = [n for n in (16, 32, 48, 64, 80, 96, 128) if n <= args.max_points]
    print(f"{'points':>7} {'edges':>7} {'tris':>8} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for n in sizes:
        comp, edge_cols, tri_cols = complex_columns(n)
        t_py = bench(_reduce_py, n, edge_cols, tri_cols)
        if _fastreduce is not None:
            t_c = bench(_fastreduce, n, edge_cols, tri_cols)
            speedup = f"{t_py / t_c:7.1f}x"
            t_c_str = f"{t_c * 1e3:9.1f}ms"
        else:
            speedup, t_c_str = "    n/a", "  (absent)"
        print(f"{n:>7} {len(edge_cols):>7} {len(tri_cols):>8} {t_py * 1e3:9.1f}ms {t_c_str} {speedup}")


if __name__ == "__main__":
    main()
