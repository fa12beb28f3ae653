"""Time the compiled and numpy ring kernels on the same run and compare results.

    python benchmarks/bench_kernels.py [--duration 1000] [--repeat 3]
"""
import argparse
import time
import warnings

import numpy as np

from lateral_ovm import kernels, simulator
from lateral_ovm.model import ModelParams
from lateral_ovm.simulator import SimOptions, standard_ring


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--duration", type=float, default=1000.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = ModelParams(alpha=2.85, p=1.0, q=0.0, lambda1=0.2, lambda2=0.0)
    records = {}
    for backend in kernels.available():
        for mode in ("nearest", "paired"):
            opts = SimOptions(duration=args.duration, mode=mode)
            best = float("inf")
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                rec = simulator.run(standard_ring(), params, opts, backend=backend)
                best = min(best, time.perf_counter() - t0)
            records[backend, mode] = rec
            steps = opts.n_steps * 2 * 100
            print(f"{backend:7} {mode:8} best of {args.repeat}: {best:8.3f} s  "
                  f"({steps / best / 1e6:.2f} M vehicle-steps/s, rk4)")
    if len(kernels.available()) == 2:
        for mode in ("nearest", "paired"):
            diff = np.max(np.abs(records["cython", mode].headways - records["python", mode].headways))
            print(f"max headway difference cython vs python ({mode}): {diff:.2e} m")


if __name__ == "__main__":
    main()
