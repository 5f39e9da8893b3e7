"""Time the compiled kernels against the numpy fallback on realistic lattice sizes.

    python benchmarks/bench_kernels.py [--N 17] [--repeat 5]

Prints one line per kernel with the best-of-``repeat`` time of each backend,
the speed-up, and the largest absolute difference between their outputs.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from biflow import _pykernels, kernels
from biflow.convexity import random_direction
from biflow.fields import Field, project_to_sphere
from biflow.grid import build_grid
from biflow.ops import _support_stencil
from biflow.sphere import tension_parts


def _cases(N: int):
    g = build_grid(N)
    eta = random_direction(g, 3, seed=0).reshape(3, -1)
    u = np.zeros((3, g.size))
    u[0] = 1.0
    ne = g.nonexterior.reshape(-1)
    u[:, ne] = project_to_sphere(u[:, ne] + 0.3 * eta[:, ne])
    u = np.ascontiguousarray(u)
    inv_h2 = 1.0 / g.h**2
    lap, offs = g.lap_idx, g.neighbor_offsets
    n = lap.size

    def lap_nodes(be):
        out = np.zeros_like(u)
        be.lap_nodes(u, lap, offs, inv_h2, out)
        return out

    def tension_nodes(be):
        a, s, tau = np.empty((3, n)), np.empty(n), np.empty((3, n))
        be.tension_nodes(u, lap, offs, inv_h2, a, s, tau)
        return tau

    _, cols, coef = _support_stencil(g)

    def gradsq_nodes(be):
        out = np.empty(cols.shape[-1])
        be.gradsq_nodes(u, cols, coef, out)
        return out

    g_c = np.ascontiguousarray(eta[:, g.interior_idx])

    def tangent_nodes(be):
        out = np.empty_like(g_c)
        be.tangent_nodes(u, g_c, g.interior_idx, out)
        return out

    v = u.copy()
    v[:, ne] = project_to_sphere(v[:, ne] + 1e-3 * eta[:, ne])
    cu = tension_parts(Field(g, u.reshape((3,) + g.shape)))
    cv = tension_parts(Field(g, v.reshape((3,) + g.shape)))

    def intrinsic_change(be):
        return np.array([be.intrinsic_change(u, v, lap, offs, inv_h2, cu[1], cu[2], cv[0], cv[2],
                                             g.lap_weights)])

    # Green's sum on a coarser lattice: the direct sum is quadratic in the node count
    gg = build_grid(min(N, 13))
    inside = np.flatnonzero((gg.r < 1.0).reshape(-1))
    xs = np.ascontiguousarray(gg.x.reshape(4, -1)[:, inside])
    coef_g = np.ascontiguousarray(gg.weights.reshape(-1)[inside] * 192.0)
    self_index = np.arange(inside.size, dtype=np.int64)

    def green_sum(be):
        out = np.zeros(inside.size)
        be.green_sum(xs, xs, coef_g, -1.0 / (8 * np.pi**2), self_index, out, kernels.thread_count())
        return out

    return [("lap_nodes", lap_nodes), ("tension_nodes", tension_nodes),
            ("gradsq_nodes", gradsq_nodes), ("tangent_nodes", tangent_nodes),
            ("intrinsic_change", intrinsic_change),
            (f"green_sum (N={gg.N})", green_sum)]


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--N", type=int, default=17)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if "cython" not in kernels.available_backends():
        raise SystemExit("compiled kernels are not built; nothing to compare")
    from biflow import _ckernels

    print(f"N = {args.N}, best of {args.repeat}, threads = {kernels.thread_count()}")
    print(f"{'kernel':<22}{'python [ms]':>13}{'cython [ms]':>13}{'speed-up':>10}{'max |diff|':>12}")
    for name, fn in _cases(args.N):
        t_py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat))
        diff = float(np.max(np.abs(fn(_pykernels) - fn(_ckernels))))
        print(f"{name:<22}{1e3 * t_py:13.2f}{1e3 * t_c:13.2f}{t_py / t_c:10.1f}{diff:12.2e}")


if __name__ == "__main__":
    main()
