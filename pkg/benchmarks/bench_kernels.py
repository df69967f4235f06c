#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy twins.

Run:
    python benchmarks/bench_kernels.py [--repeats N]

The table shows per-call milliseconds for both implementations at training-
scale shapes. On typical AVX machines the branchy kernels (ray tracing,
occlusion, environment lookup, lattice generation) win under numba while the
plain transcendentals are fastest through numpy's SIMD ufuncs; the package
defaults follow those measurements (see matlight/kernels.py).
"""

import argparse
import time

import numpy as np

from matlight import kernels
from matlight.hemisphere import tangent_frames


def timeit(fn, repeats):
    fn()  # warm up / compile
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats * 1000.0


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    z32 = rng.normal(size=(131072, 64)).astype(np.float32)
    g32 = rng.normal(size=z32.shape).astype(np.float32)
    normals = rng.normal(size=(2048, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    normals32 = np.ascontiguousarray(normals.astype(np.float32))
    t32, bt32 = tangent_frames(normals32)
    grid = rng.random((16, 32, 3)).astype(np.float32)
    dirs = rng.normal(size=(131072, 3)).astype(np.float32)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    gdirs = rng.normal(size=(dirs.shape[0], 3)).astype(np.float32)
    spheres = np.array([[0.0, 0.0, 0.45, 0.45]])
    planes = np.array([[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.6]])
    origins = rng.normal(size=(131072, 3)) * 0.5 + np.array([0, 0, 1.5])
    raydirs = rng.normal(size=(131072, 3))
    raydirs /= np.linalg.norm(raydirs, axis=1, keepdims=True)
    tmax = np.full(origins.shape[0], np.inf)

    def nb_sine():
        out = np.empty_like(z32)
        kernels._sine_forward_nb(z32.reshape(-1), np.float32(30.0), out.reshape(-1))

    def nb_sine_bwd():
        out = np.empty_like(z32)
        kernels._sine_backward_nb(z32.reshape(-1), np.float32(30.0), g32.reshape(-1), out.reshape(-1))

    def nb_sigmoid():
        out = np.empty_like(z32)
        kernels._sigmoid_nb(z32.reshape(-1), out.reshape(-1))

    def nb_env():
        out = np.empty((dirs.shape[0], 3), dtype=grid.dtype)
        kernels._env_lookup_nb(grid, dirs, out)

    def nb_env_bwd():
        grad = np.zeros(grid.shape, dtype=gdirs.dtype)
        kernels._env_lookup_backward_nb(grad, dirs, gdirs)

    def nb_fib():
        out = np.empty((normals32.shape[0], 64, 3), dtype=np.float32)
        kernels._fibonacci_directions_nb(64, t32, bt32, normals32, out)

    def nb_trace():
        best_t = np.empty(origins.shape[0])
        kind = np.empty(origins.shape[0], dtype=np.int8)
        index = np.empty(origins.shape[0], dtype=np.int32)
        kernels._trace_rays_nb(origins, raydirs, spheres, planes, best_t, kind, index)

    def nb_occl():
        out = np.empty(origins.shape[0], dtype=np.bool_)
        kernels._occluded_nb(origins, raydirs, tmax, spheres, planes, out)

    cases = [
        ("sine fwd 8.4M f32", nb_sine, lambda: kernels.sine_forward_np(z32, 30.0)),
        ("sine bwd 8.4M f32", nb_sine_bwd, lambda: kernels.sine_backward_np(z32, 30.0, g32)),
        ("sigmoid 8.4M f32", nb_sigmoid, lambda: kernels.sigmoid_np(z32)),
        ("env lookup 131k", nb_env, lambda: kernels.env_lookup_np(grid, dirs)),
        ("env scatter 131k", nb_env_bwd, lambda: kernels.env_lookup_backward_np(grid.shape, dirs, gdirs)),
        ("fib dirs 2048x64", nb_fib, lambda: kernels.fibonacci_directions_np(64, t32, bt32, normals32)),
        ("trace rays 131k", nb_trace, lambda: kernels.trace_rays_np(origins, raydirs, spheres, planes)),
        ("occlusion 131k", nb_occl, lambda: kernels.occluded_np(origins, raydirs, tmax, spheres, planes)),
    ]

    print(f"{'kernel':<20} {'numba ms':>10} {'numpy ms':>10} {'numba/numpy':>12}")
    for name, nb_fn, np_fn in cases:
        t_nb = timeit(nb_fn, args.repeats) if kernels.NUMBA_ENABLED else float("nan")
        t_np = timeit(np_fn, args.repeats)
        ratio = t_nb / t_np if t_np > 0 else float("nan")
        print(f"{name:<20} {t_nb:>10.2f} {t_np:>10.2f} {ratio:>12.2f}")
    if not kernels.NUMBA_ENABLED:
        print("numba disabled (MATLIGHT_PURE_NUMPY set or numba missing); numpy column only")


if __name__ == "__main__":
    main()
