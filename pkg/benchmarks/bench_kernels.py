#!/usr/bin/env python3
"""Compare the compiled split-search kernels with the numpy fallback.

Times one level of split search (the hot loop) and a short training run for
each backend, and checks that both backends produce the same model bytes.

    python benchmarks/bench_kernels.py --rows 50000 --features 12 --trees 20
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ja4ml.gbdt import BACKENDS, TrainConfig, train
from ja4ml.gbdt import _kernels
from ja4ml.gbdt.model import _PresortedMatrix


def make_data(n: int, d: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 200, size=(n, d)).astype(np.float64)  # label-encoded style
    X[:, 1] = rng.integers(0, 60, size=n)
    logit = 0.03 * (X[:, 0] - 100) + 0.1 * (X[:, 1] - 30) + rng.normal(scale=1.0, size=n)
    return X, (logit > 0).astype(np.float64)


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=50_000)
    ap.add_argument("--features", type=int, default=12)
    ap.add_argument("--trees", type=int, default=20)
    ap.add_argument("--depth", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    X, y = make_data(args.rows, args.features, args.seed)
    pre = _PresortedMatrix(X)
    g = 0.5 - y
    h = np.full(len(y), 0.25)
    features = np.arange(X.shape[1], dtype=np.int32)
    node_of = (np.arange(len(y)) % 8).astype(np.int32)  # eight live nodes, as at depth 3
    cfg = TrainConfig(n_trees=args.trees, max_depth=args.depth)

    print(f"rows={args.rows} features={args.features} trees={args.trees} depth={args.depth}")
    print(f"{'backend':10s}{'split level (ms)':>18s}{'train (s)':>12s}{'s/tree':>10s}")
    digests, level_times = {}, {}
    for name in sorted(BACKENDS):
        k = _kernels.get(name)
        lvl = best_of(lambda: k.best_splits(pre.sorted_vals, pre.order, g, h, node_of, 8, features, 1.0), args.repeat)
        t0 = time.perf_counter()
        model = train(X, y, cfg, backend=name)
        tt = time.perf_counter() - t0
        digests[name] = model.digest()
        level_times[name] = lvl
        print(f"{name:10s}{lvl * 1e3:>18.2f}{tt:>12.2f}{tt / max(1, args.trees):>10.3f}")
    if len(digests) > 1:
        same = len(set(digests.values())) == 1
        print(f"models identical across backends: {same}")
        print(f"split-level speedup compiled/python: {level_times['python'] / level_times['compiled']:.1f}x")
    else:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
