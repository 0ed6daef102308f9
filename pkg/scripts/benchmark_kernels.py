"""Benchmark the numba kernel backend against the pure-numpy fallback.

Each backend runs in its own subprocess because the backend is frozen at
import time (NECODE_PURE_NUMPY=1 forces the fallback).  Workloads cover
the three hot paths: one-sided Jacobi SVD, two-sided Jacobi eigh, and the
im2col unfold/fold pair.  Timings are best-of-repeat wall clock after one
untimed warmup call, so numba JIT compilation is excluded.

    python3 scripts/benchmark_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json
import time

import numpy as np

from necode import _kernels

rng = np.random.default_rng(7)
CASES = {
    "jacobi_svd 64x256": lambda: _kernels.jacobi_svd(rng.normal(size=(64, 256))),
    "jacobi_svd 128x512": lambda: _kernels.jacobi_svd(rng.normal(size=(128, 512))),
    "jacobi_eigh 256": lambda: _kernels.jacobi_eigh(_sym(256)),
    "unfold 15x15 batch64": lambda: [_kernels.unfold(img, (15, 15), (1, 1), (0, 0))
                                     for img in IMAGES],
    "fold_delta 15x15 batch64": lambda: [_kernels.fold_delta(c, (1, 16, 16),
                                                             (15, 15), (1, 1), (0, 0))
                                         for c in COLS],
}

def _sym(n):
    A = rng.normal(size=(n, n))
    return (A + A.T) / 2.0

IMAGES = rng.random(size=(64, 1, 16, 16))
COLS = [_kernels.unfold(img, (15, 15), (1, 1), (0, 0)) for img in IMAGES]

repeat = int(REPEAT)
out = {"backend": _kernels.active_backend(), "timings_ms": {}}
for name, fn in CASES.items():
    fn()  # warmup: triggers JIT compilation on the numba backend
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    out["timings_ms"][name] = best * 1e3
print(json.dumps(out))
"""


def run_backend(pure_numpy, repeat):
    env = dict(os.environ)
    if pure_numpy:
        env["NECODE_PURE_NUMPY"] = "1"
    else:
        env.pop("NECODE_PURE_NUMPY", None)
    code = WORKER.replace("REPEAT", str(repeat))
    proc = subprocess.run([sys.executable, "-c", code], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5,
                        help="timed repetitions per case (best is kept)")
    args = parser.parse_args()
    results = [run_backend(False, args.repeat), run_backend(True, args.repeat)]
    names = list(results[0]["timings_ms"])
    left, right = results[0]["backend"], results[1]["backend"]
    if left == right:
        print("numba unavailable: both subprocesses used the numpy fallback")
    width = max(len(n) for n in names)
    print(f"{'case':<{width}}  {left:>12}  {right:>12}  {'ratio':>7}")
    for name in names:
        a = results[0]["timings_ms"][name]
        b = results[1]["timings_ms"][name]
        print(f"{name:<{width}}  {a:>10.2f}ms  {b:>10.2f}ms  {b / a:>6.2f}x")


if __name__ == "__main__":
    main()
