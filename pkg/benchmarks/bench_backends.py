#!/usr/bin/env python3
"""Compare the compiled kernel backend against the NumPy fallback.

Times the three leaf kernels on element-sized workloads and a full
stiffness/mass assembly of a harmonic-potential system, switching the
active backend in-process.

Run:  python benchmarks/bench_backends.py [--level 3] [--k 2]
"""

import argparse
import time

import numpy as np

from polyvem import _kernels
from polyvem.forms import ProblemCoefficients
from polyvem.mesh import generate_family
from polyvem.polyquad import monomial_exponents, reference_triangle_rule
from polyvem.system import assemble


def time_call(fn, *args, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(k):
    exps = monomial_exponents(k)
    rng = np.random.default_rng(0)
    pts = np.ascontiguousarray(rng.uniform(-1, 1, (20000, 2)))
    ang = np.linspace(0, 2 * np.pi, 8)[:-1]
    verts = np.ascontiguousarray(np.column_stack([np.cos(ang), np.sin(ang)]))
    center = np.ascontiguousarray(verts.mean(axis=0))
    rn, rw = reference_triangle_rule(2 * k + 2)

    rows = []
    for name in _kernels.available_backends():
        _kernels.use(name)
        rows.append(
            (
                name,
                time_call(_kernels.monomial_values, exps, 0.0, 0.0, 1.0, pts),
                time_call(_kernels.monomial_gradients, exps, 0.0, 0.0, 1.0, pts),
                time_call(
                    lambda: [
                        _kernels.fan_quadrature(verts, center, rn, rw)
                        for _ in range(1000)
                    ]
                ),
            )
        )
    return rows


def bench_assembly(level, k):
    mesh = generate_family("voronoi", level, (-10, -10, 10, 10), seed=7)
    coeffs = ProblemCoefficients(
        potential=lambda p: 0.5 * (p[:, 0] ** 2 + p[:, 1] ** 2)
    )
    rows = []
    for name in _kernels.available_backends():
        _kernels.use(name)
        t = time_call(assemble, mesh, k, coeffs, repeat=3)
        rows.append((name, mesh.n_cells, t))
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--level", type=int, default=3)
    parser.add_argument("--k", type=int, default=2)
    args = parser.parse_args()

    print(f"available backends: {_kernels.available_backends()}")
    print(f"\nkernel micro-benchmarks (k={args.k}, 20k points / 1000 fans):")
    print(f"{'backend':10s} {'values':>10s} {'gradients':>10s} {'fan x1000':>10s}")
    for name, tv, tg, tf in bench_kernels(args.k):
        print(f"{name:10s} {tv * 1e3:9.2f}ms {tg * 1e3:9.2f}ms {tf * 1e3:9.2f}ms")

    print(f"\nfull assembly (voronoi level {args.level}, k={args.k}):")
    rows = bench_assembly(args.level, args.k)
    base = dict((name, t) for name, _, t in rows).get("python")
    for name, ncells, t in rows:
        speed = f"  speedup vs python x{base / t:.2f}" if base else ""
        print(f"{name:10s} {ncells} cells: {t:8.3f}s{speed}")


if __name__ == "__main__":
    main()
