"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N] [--m ROWS]

Prints one line per kernel with the best-of-N wall time of each backend and
the speedup. Both backends are also checked to give the same result.
"""

import argparse
import time

import numpy as np

from silo_dp import _backend
from silo_dp.core_math import LossConfig
from silo_dp.data import PartnerDataset
from silo_dp.dppsgd import DppsgdHyperparams, train_non_private
from silo_dp.gbdt import GbdtParams, fit_gbdt


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def problem(m, d, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((m, d))
    X /= np.linalg.norm(X, axis=1, keepdims=True) * 1.5
    y = (rng.uniform(size=m) < 1 / (1 + np.exp(-4 * X[:, 0]))).astype(float)
    return X, y


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--m", type=int, default=5000)
    args = ap.parse_args()
    if "compiled" not in _backend.BACKENDS:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")

    X, y = problem(args.m, 46)
    data = PartnerDataset("bench", X, y, "ramped", normalized=True)
    hp = DppsgdHyperparams(loss_cfg=LossConfig(C=50.0, lam=1e-3, R=1000.0), epochs=5)
    F = 1 / (1 + np.exp(-X[:, :10] * 5))
    gp = GbdtParams(n_rounds=20)

    jobs = {
        f"psgd 5 epochs, m={args.m}, d=46": lambda b: train_non_private(data, hp, backend=b).weights,
        f"gbdt 20 rounds depth 6, m={args.m}, k=10": lambda b: fit_gbdt(F, y, gp, backend=b).predict_proba(F),
    }
    print(f"{'kernel':44s} {'compiled':>10s} {'python':>10s} {'speedup':>8s}  same")
    for name, job in jobs.items():
        tc, oc = best_of(lambda: job("compiled"), args.repeat)
        tp, op = best_of(lambda: job("python"), args.repeat)
        same = np.allclose(oc, op, rtol=1e-9, atol=1e-12)
        print(f"{name:44s} {tc:9.3f}s {tp:9.3f}s {tp / tc:7.1f}x  {same}")


if __name__ == "__main__":
    main()
