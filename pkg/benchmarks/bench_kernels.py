"""Compare the compiled and pure-Python stress kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--points 40] [--gap 1e-6] [--full]

Times the inner k-integrals of the transverse spectral function over a sweep
of real frequencies with each backend, checks that both give the same values,
and with ``--full`` also times a complete ``stress_split`` evaluation.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

import casimir_bvl.stress_bvl as sb
from casimir_bvl import kernels
from casimir_bvl.lifshitz import ThermalGeometry
from casimir_bvl.materials import MaterialModel


def sweep(backend, omegas, geom, model):
    sb.kernel = backend
    t0 = time.perf_counter()
    vals = [sb._calT_raw(complex(w), geom.gap, geom.constants.c, model, sb.INNER_BUDGET)[0] for w in omegas]
    return time.perf_counter() - t0, np.array(vals)


def full(backend, geom, model):
    sb.kernel = backend
    t0 = time.perf_counter()
    res = sb.stress_split(geom, model)
    return time.perf_counter() - t0, res.total


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--points", type=int, default=40)
    p.add_argument("--gap", type=float, default=1e-6)
    p.add_argument("--full", action="store_true", help="also time a full stress_split")
    args = p.parse_args(argv)

    if kernels.compiled_backend is None:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation`")
    geom = ThermalGeometry(args.gap, 300.0)
    model = MaterialModel.drude()
    omegas = np.geomspace(1e11, sb.frequency_cutoff(geom, model), args.points)
    original = sb.kernel
    try:
        tc, vc = sweep(kernels.compiled_backend, omegas, geom, model)
        tp, vp = sweep(kernels.python_backend, omegas, geom, model)
        dev = float(np.max(np.abs(vc - vp) / np.maximum(np.abs(vp), 1e-300)))
        print(f"inner integrals, {args.points} frequencies at gap {args.gap:g} m")
        print(f"  cython  {tc:8.3f} s")
        print(f"  python  {tp:8.3f} s")
        print(f"  speedup {tp / tc:8.1f}x   max rel. difference {dev:.1e}")
        if args.full:
            fc, sc_ = full(kernels.compiled_backend, geom, model)
            fp, sp = full(kernels.python_backend, geom, model)
            print("stress_split")
            print(f"  cython  {fc:8.3f} s   total {sc_:.10e} Pa")
            print(f"  python  {fp:8.3f} s   total {sp:.10e} Pa")
            print(f"  speedup {fp / fc:8.1f}x   rel. difference {abs(sc_ - sp) / abs(sp):.1e}")
    finally:
        sb.kernel = original


if __name__ == "__main__":
    main()
