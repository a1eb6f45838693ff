#!/usr/bin/env python3
"""Time the numba kernels against the numpy fallback at the sizes the experiments use.

    python benchmarks/bench_kernels.py [--repeat 5]

End-to-end trial timings are taken in fresh subprocesses with and without
RANDLB_DISABLE_NUMBA so each backend is active for the whole run.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from randlb import _kernels


def best_of(fn, repeat):
    fn()  # warm-up / JIT
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(rng):
    d_big = 726_817
    V4 = np.linalg.qr(rng.standard_normal((d_big, 4)))[0].T.copy()
    Q8 = np.linalg.qr(rng.standard_normal((d_big, 8)))[0].T.copy()
    x = rng.standard_normal(d_big) / np.sqrt(d_big)
    V16 = np.linalg.qr(rng.standard_normal((4096, 16)))[0].T.copy()
    X = rng.standard_normal((1024, 4096)) / 64
    G = rng.standard_normal((4096, 2000))
    return [
        ("piece_argmax  k=4  d=726817", lambda impl: impl.piece_argmax(V4, x, 1 / 16)),
        ("gs_residual   m=8  d=726817", lambda impl: impl.gs_residual(Q8, 8, x)),
        ("batch_max  1024x4096 k=16", lambda impl: impl.batch_piece_max(V16, X, 1 / 128)),
        ("cap_count  4096x2000", lambda impl: impl.cap_count(G, 0.05)),
    ]


TRIAL_SNIPPET = """
import time
from randlb.harness import ExperimentConfig, run_experiment
run_experiment(ExperimentConfig(k=4, d=726817, algo='hybrid', trials=1))
t0 = time.perf_counter()
run_experiment(ExperimentConfig(k=4, d=726817, algo='hybrid', trials={n}))
print((time.perf_counter() - t0) / {n})
"""


def trial_time(disable_numba, n):
    env = dict(os.environ)
    if disable_numba:
        env["RANDLB_DISABLE_NUMBA"] = "1"
    else:
        env.pop("RANDLB_DISABLE_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", TRIAL_SNIPPET.format(n=n)], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--trials", type=int, default=10, help="trials for the end-to-end timing")
    args = ap.parse_args()
    if _kernels.numba_impl is None:
        sys.exit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':30s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for name, call in kernel_cases(rng):
        t_np = best_of(lambda: call(_kernels.numpy_impl), args.repeat)
        t_nb = best_of(lambda: call(_kernels.numba_impl), args.repeat)
        print(f"{name:30s} {1e3 * t_np:11.2f} {1e3 * t_nb:11.2f} {t_np / t_nb:8.2f}")
    t_np = trial_time(True, args.trials)
    t_nb = trial_time(False, args.trials)
    print(f"{'trial k=4 d=726817 (hybrid)':30s} {1e3 * t_np:11.1f} {1e3 * t_nb:11.1f} "
          f"{t_np / t_nb:8.2f}")


if __name__ == "__main__":
    main()
