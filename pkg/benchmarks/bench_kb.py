"""Time the two-time stepper with the compiled core against the numpy fallback.

Usage: python3 benchmarks/bench_kb.py [--n-t 2000] [--repeat 3] [--full-memory]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from decoherence.kadanoff_baym import available_backends, evolve_kb
from decoherence.kernels import build_kernels
from decoherence.selfmass import QftParams


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-t", type=int, default=2000)
    ap.add_argument("--dt", type=float, default=0.05)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--full-memory", action="store_true", help="keep the whole history instead of t_mem = 10 beta")
    args = ap.parse_args()

    params = QftParams(m_phi=1.0, h=3.0, beta=0.5, k=1.0)
    t_mem = None if args.full_memory else 10.0 * params.beta
    kernels = build_kernels(params, dt=args.dt, t_mem=t_mem, n_steps=args.n_t)
    print(f"n_t={args.n_t} dt={args.dt} memory steps={kernels.n_mem} backends={available_backends()}")
    results = {}
    for backend in available_backends():
        times = []
        for _ in range(args.repeat):
            start = time.perf_counter()
            grid = evolve_kb(params, kernels, args.n_t, backend=backend)
            times.append(time.perf_counter() - start)
        results[backend] = (min(times), grid.F)
        print(f"{backend:>9}: best of {args.repeat} = {min(times):.3f} s")
    if len(results) == 2:
        (tc, Fc), (tp, Fp) = results["compiled"], results["python"]
        print(f"speed-up {tp / tc:.1f}x, max |F_compiled - F_python| = {np.max(np.abs(Fc - Fp)):.2e}")


if __name__ == "__main__":
    main()
