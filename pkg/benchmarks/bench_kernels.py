"""Compare the compiled and numpy residual/Jacobian kernels.

Usage: python benchmarks/bench_kernels.py [--size N] [--repeat R]
"""

import argparse
import timeit

import numpy as np

from flexlat import kernels
from flexlat.builders import triangulated_plane
from flexlat.flex import Configuration, _colmap, unpack
from flexlat.realization import all_edge_lengths


def setup(size: int, seed: int = 0):
    c, r = triangulated_plane(C=[[size, 0], [0, size]])
    q = Configuration.from_realization(c, r)
    rng = np.random.default_rng(seed)
    x = q.coords + 1e-2 * rng.standard_normal(q.coords.shape)
    pos, a, b = unpack(x, c.n_orbits)
    target = np.array(list(all_edge_lengths(c, r).values()))
    return c, pos, a, b, np.ascontiguousarray(c.constraint_array), _colmap(c.n_orbits, 0), target


def bench(backend, data, repeat: int):
    c, pos, a, b, edges, colmap, target = data
    res = np.empty(len(edges))
    jac = np.zeros((len(edges), 3 * c.n_orbits))

    def residual():
        backend.edge_residuals(pos, a, b, edges, target, res)

    def jacobian():
        jac[:] = 0.0
        backend.edge_jacobian(pos, a, b, edges, colmap, jac)

    t_res = min(timeit.repeat(residual, number=10, repeat=repeat)) / 10
    t_jac = min(timeit.repeat(jacobian, number=1, repeat=repeat))
    return (t_res, t_jac), res.copy(), jac.copy()


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=20, help="refine the plane by diag(size, size)")
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    data = setup(args.size)
    print(f"{data[0].n_orbits} orbits, {len(data[4])} constraints")
    t_py, r_py, j_py = bench(kernels.python_backend, data, args.repeat)
    print(f"{'backend':9s} {'residual':>12s} {'jacobian':>12s}")
    print(f"{'python':9s} {1e3 * t_py[0]:9.3f} ms {1e3 * t_py[1]:9.3f} ms")
    if kernels.compiled_backend is None:
        print("compiled : not built")
        return
    t_c, r_c, j_c = bench(kernels.compiled_backend, data, args.repeat)
    print(f"{'compiled':9s} {1e3 * t_c[0]:9.3f} ms {1e3 * t_c[1]:9.3f} ms  "
          f"(speed-up x{t_py[0] / t_c[0]:.1f}, x{t_py[1] / t_c[1]:.1f}; "
          "jacobian time includes zeroing the dense output)")
    print(f"max |difference|: residual {np.abs(r_py - r_c).max():.2e}, "
          f"jacobian {np.abs(j_py - j_c).max():.2e}")


if __name__ == "__main__":
    main()
