#!/usr/bin/env python3
"""Compare the numba kernels against the pure-numpy fallbacks.

Runs the hot kernels of the engine (EAM energy / gradient / Hessian,
BFS hop counts, Voronoi-cell clipping, point location) on identical
inputs through both backends, checks agreement and reports timings.

Usage:
    python benchmarks/benchmark_kernels.py [--n 60] [--repeats 5]
"""

import argparse
import time

import numpy as np

from bqce.kernels import _numba, _numpy
from bqce.lattice import VORONOI_TEMPLATE, generate_domain, neighbor_shells
from bqce.mesh import micro_mesh


def timeit(fn, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=60, help="hexagon side length")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    dom = generate_domain(args.n, "divacancy")
    nbrs = neighbor_shells(dom)
    rng = np.random.default_rng(0)
    pos = dom.pos + 0.02 * rng.standard_normal((dom.n_points, 2))
    w = (dom.free | dom.is_halo).astype(float)
    active = np.nonzero(w > 0)[0].astype(np.int64)
    eam_args = (pos, active, w, nbrs.pair_ptr, nbrs.pair_idx, nbrs.dens_ptr,
                nbrs.dens_idx, 4.4, 3.0, 5.0, 6 * np.exp(-3.0))

    mesh = micro_mesh(dom)
    ptr, items, x0, y0, inv, nx, ny = mesh.grid()
    tri_xy = np.ascontiguousarray(mesh.tri_xy)
    queries = rng.uniform(-args.n * 0.7, args.n * 0.7, (20000, 2))
    npairs = 40000
    ps = rng.integers(0, dom.free_ids.size, npairs).astype(np.int64)
    pe = rng.integers(0, mesh.n_elements, npairs).astype(np.int64)
    site_xy = dom.pos[dom.free_ids]

    cases = [
        ("eam_energy", lambda m: lambda: m.eam_energy(*eam_args)),
        ("eam_energy_gradient",
         lambda m: lambda: m.eam_energy_gradient(*eam_args)),
        ("eam_hessian_triplets",
         lambda m: lambda: m.eam_hessian_triplets(
             pos, active[:4096], w, nbrs.pair_ptr, nbrs.pair_idx,
             nbrs.dens_ptr, nbrs.dens_idx, 4.4, 3.0, 5.0,
             6 * np.exp(-3.0))),
        ("bfs_hops", lambda m: lambda: m.bfs_hops(
            dom.n_points, dom._graph_ptr, dom._graph_idx, dom.defect_ids)),
        ("clip_cell_areas", lambda m: lambda: m.clip_cell_areas(
            VORONOI_TEMPLATE, site_xy, tri_xy, ps, pe)),
        ("locate_points", lambda m: lambda: m.locate_points(
            queries, tri_xy, ptr, items, x0, y0, inv, nx, ny)),
    ]

    print(f"domain N={args.n}: {dom.free.sum()} free sites, "
          f"{mesh.n_elements} micro elements, {queries.shape[0]} queries")
    print(f"{'kernel':<22}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, make in cases:
        make(_numba)()  # trigger JIT outside the timed region
        t_nb, out_nb = timeit(make(_numba), args.repeats)
        t_np, out_np = timeit(make(_numpy), max(1, args.repeats // 2))
        if name == "eam_energy":
            assert abs(out_nb[3] - out_np[3]) < 1e-10 * abs(out_nb[3])
        print(f"{name:<22}{1e3 * t_nb:>12.2f}{1e3 * t_np:>12.2f}"
              f"{t_np / t_nb:>10.1f}x")


if __name__ == "__main__":
    main()
