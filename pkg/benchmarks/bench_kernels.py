#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure numpy fallbacks.

Runs the three hot routines (pointwise quadratic-form products, weighted
energy accumulation, Green strain extraction) at solver-realistic sizes and
prints a timing table.  Also times one representative cell solve under each
backend via a subprocess with PLATEHOM_PURE_PYTHON toggled.

Usage: python benchmarks/bench_kernels.py [--sizes 20000,200000]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from platehom._kernels import pykernels

try:
    from platehom._kernels import _core
except ImportError:
    _core = None


def time_call(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_pointwise(n, d, rng):
    q = rng.standard_normal((n, d, d))
    q = q @ np.swapaxes(q, -1, -2) + 2 * np.eye(d)
    v = rng.standard_normal((n, d))
    w = rng.uniform(0.5, 1.0, n)
    f = rng.standard_normal((n, 3, 3)) * 0.1 + np.eye(3)

    rows = []
    backends = [("python", pykernels)] + ([("cython", _core)] if _core else [])
    for label, mod in backends:
        rows.append((f"apply_quadform_field d={d}", label,
                     time_call(mod.apply_quadform_field, q, v)))
        rows.append((f"quadform_energy d={d}", label,
                     time_call(mod.quadform_energy, q, v, w)))
        if d == 6:
            rows.append(("green_strain_voigt", label,
                         time_call(mod.green_strain_voigt, f)))
    return rows


def bench_solve(backend_env):
    """One layered cell solve (N=16, 128^2 grid) in a fresh interpreter."""
    code = (
        "import time, numpy as np\n"
        "from platehom.material import material_from_config, reduce_field\n"
        "from platehom.cell import homogenize\n"
        "import platehom._kernels as k\n"
        "cfg = {'kind': 'isotropic_analytic', 'grid': [128, 128], 'x3_nodes': 4,\n"
        "       'mu': '2 + cos(2*pi*y1)', 'lambda': '1'}\n"
        "red = reduce_field(material_from_config(cfg))\n"
        "t0 = time.perf_counter()\n"
        "v = homogenize(red, np.array([1.0, 0, 0]), modes=16)\n"
        "print(k.backend_name(), time.perf_counter() - t0, v)\n"
    )
    env = dict(os.environ)
    env["PLATEHOM_PURE_PYTHON"] = backend_env
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, env=env)
    if out.returncode != 0:
        raise RuntimeError(out.stderr)
    name, seconds, value = out.stdout.split()
    return name, float(seconds), float(value)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="20000,200000")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    rng = np.random.default_rng(0)
    print(f"compiled backend available: {_core is not None}\n")
    for n in sizes:
        print(f"-- {n} points --")
        results = {}
        for d in (3, 6):
            for name, label, seconds in bench_pointwise(n, d, rng):
                results.setdefault(name, {})[label] = seconds
        for name, by_backend in results.items():
            line = f"  {name:28s}"
            for label, seconds in by_backend.items():
                line += f"  {label}: {seconds * 1e3:8.2f} ms"
            if "cython" in by_backend and "python" in by_backend:
                line += f"  speedup: {by_backend['python'] / by_backend['cython']:.2f}x"
            print(line)
        print()

    print("-- end-to-end layered cell solve (N=16, 128^2 grid) --")
    rows = [bench_solve("1")]
    if _core is not None:
        rows.append(bench_solve("0"))
    for name, seconds, value in rows:
        print(f"  {name:8s} {seconds:7.3f} s   value={value:.12f}")
    if len(rows) == 2 and abs(rows[0][2] - rows[1][2]) > 1e-12:
        raise SystemExit("backend values diverged")


if __name__ == "__main__":
    main()
