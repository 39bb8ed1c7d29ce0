"""Compare the compiled kernels with the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--seed S]

Each workload is timed with both backends on identical inputs; the best of N
repeats is reported together with the speedup and the largest output
difference between backends.
"""

import argparse
import time

import numpy as np

from poirec import kernels, synth
from poirec.alignment import em_train, user_pairs
from poirec.linear import train_hinge
from poirec.ranking import RankGroup, train_listnet


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def workloads(seed):
    data = synth.generate(synth.SynthConfig(n_users=40, n_appropriateness=100, seed=seed))
    pairs = [p for u in data.users.values() for p in user_pairs(u, data.venues)]
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(2000, 50))
    y = np.where(X[:, :5].sum(axis=1) + rng.normal(size=2000) > 0, 1.0, -1.0)
    groups = [
        RankGroup(f"u{q}", [f"v{i}" for i in range(30)], rng.normal(size=(30, 5)), rng.integers(-2, 3, 30))
        for q in range(200)
    ]
    return {
        f"EM, {len(pairs)} pairs x 20 iters": lambda b: em_train(pairs, max_iters=20, tol=1e-300, backend=b)[0].translation,
        "Pegasos, 2000 x 50, 20 epochs": lambda b: train_hinge(X, y, reg=1e-3, epochs=20, backend=b).weights,
        "ListNet, 200 lists x 30, 100 epochs": lambda b: train_listnet(groups, epochs=100, graded=True, backend=b),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if "cython" not in kernels.BACKENDS:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'workload':<40} {'python s':>9} {'cython s':>9} {'speedup':>8} {'max diff':>9}")
    for name, fn in workloads(args.seed).items():
        tp, a = best_of(lambda: fn("python"), args.repeat)
        tc, b = best_of(lambda: fn("cython"), args.repeat)
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        print(f"{name:<40} {tp:9.3f} {tc:9.3f} {tp / tc:7.1f}x {diff:9.1e}")


if __name__ == "__main__":
    main()
