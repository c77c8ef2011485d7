"""Compiled vs numpy solver loop, dense and CSR.

    python benchmarks/bench_backends.py [--iters 4000] [--repeat 3]

Prints microseconds per iteration for each backend and the speedup.  Both
backends run the same system with the same uniforms, so the traces are
also compared for agreement (nan when rounding differences
send the greedy rule down different paths).
"""
import argparse
import time

import numpy as np
import scipy.sparse as sp

from noisy_kaczmarz import _backend
from noisy_kaczmarz.matrix import RowMatrix
from noisy_kaczmarz.noise import generate_gaussian_ground_truth, random_solution
from noisy_kaczmarz.solvers import SolverConfig, WorkingSystem, solve


def _cases():
    gt = generate_gaussian_ground_truth(400, 200, seed=1)
    yield "dense 400x200", WorkingSystem(gt.A, gt.b, gt)
    gt = generate_gaussian_ground_truth(2000, 500, seed=2)
    yield "dense 2000x500", WorkingSystem(gt.A, gt.b, gt)
    S = sp.random(20000, 300, density=0.01, random_state=3, format="csr")
    S = (S + sp.vstack([sp.eye(300)] * 67).tocsr()[:20000]).tocsr()
    A = RowMatrix.from_scipy(S)
    gt = random_solution(A, 4)
    yield "csr 20000x300 (1%)", WorkingSystem(A, gt.b, gt)


def _time(system, backend, method, iters, repeat):
    cfg = SolverConfig(method=method, theta=1.0, max_iterations=iters,
                       stop_tolerance=1e-300, seed=5, backend=backend)
    best, trace = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        trace = solve(system, cfg)
        best = min(best, time.perf_counter() - t0)
    return best / trace.iterations * 1e6, trace


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--iters", type=int, default=4000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    if "compiled" not in _backend.BACKENDS:
        print("compiled extension not built; only the numpy loop is available")
    print(f"{'case':<22}{'method':<8}{'python us/it':>14}{'compiled us/it':>16}"
          f"{'speedup':>9}{'max |dx|':>11}")
    for name, system in _cases():
        for method in ("rk", "rgrk"):
            py, tp = _time(system, "python", method, args.iters, args.repeat)
            if "compiled" in _backend.BACKENDS:
                cc, tc = _time(system, "compiled", method, args.iters, args.repeat)
                same = np.array_equal(tp.selected_index, tc.selected_index)
                dx = float(np.max(np.abs(tp.final_x - tc.final_x))) if same else float("nan")
                print(f"{name:<22}{method:<8}{py:>14.1f}{cc:>16.1f}{py / cc:>9.1f}{dx:>11.1e}")
            else:
                print(f"{name:<22}{method:<8}{py:>14.1f}{'-':>16}")


if __name__ == "__main__":
    main()
