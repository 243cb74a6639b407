"""Time the compiled and NumPy kernel backends on the same problem.

    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --users 250 --items 6900 --ratings 16000 --pairs 400000

The default sizes are roughly those of the full-size synthetic grid
(about 16k training ratings, top-50 similarity over ~6.9k posts, d=16).
"""

import argparse
import time

import numpy as np

from hybridmf import kernels
from hybridmf.factorization import Hyperparams, train
from hybridmf.profiles import RatingMatrix
from hybridmf.similarity import SimilarityMatrix


def make_problem(args):
    rng = np.random.default_rng(args.seed)
    key = np.unique(rng.integers(0, args.users * args.items, size=args.ratings))
    rows, cols = np.divmod(key, args.items)
    vals = rng.uniform(0, 5, len(key))
    j = rng.integers(0, args.items, size=args.pairs // 2)
    n = rng.integers(0, args.items, size=args.pairs // 2)
    upper = np.unique(np.minimum(j, n) * args.items + np.maximum(j, n))
    sj, sn = np.divmod(upper, args.items)
    svals = rng.random(len(upper))
    ratings = RatingMatrix(tuple(f"u{u}" for u in range(args.users)),
                           tuple(f"p{i}" for i in range(args.items)), rows, cols, vals, (0.0, 5.0))
    sim = SimilarityMatrix(ratings.items, sj, sn, svals)
    return ratings, sim


def time_call(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(K, ratings, sim, d, repeat, rng):
    P = rng.normal(0, 0.1, (len(ratings.users), d))
    Q = rng.normal(0, 0.1, (len(ratings.items), d))
    pr = np.concatenate([sim.rows, sim.cols])
    pc = np.concatenate([sim.cols, sim.rows])
    pv = np.concatenate([sim.vals, sim.vals])

    def grad():
        dP, dQ = np.zeros_like(P), np.zeros_like(Q)
        K.rating_grad(ratings.rows, ratings.cols, ratings.vals, P, Q, dP, dQ)
        K.pair_grad(pr, pc, pv, Q, dQ, 0.1)

    return {
        "rating_sse": time_call(lambda: K.rating_sse(ratings.rows, ratings.cols, ratings.vals, P, Q), repeat),
        "pair_sse": time_call(lambda: K.pair_sse(pr, pc, pv, Q), repeat),
        "gradient": time_call(grad, repeat),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--users", type=int, default=250)
    parser.add_argument("--items", type=int, default=6900)
    parser.add_argument("--ratings", type=int, default=16000)
    parser.add_argument("--pairs", type=int, default=400000)
    parser.add_argument("--d", type=int, default=16)
    parser.add_argument("--epochs", type=int, default=20)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    ratings, sim = make_problem(args)
    print(f"{len(ratings.users)} users x {len(ratings.items)} items, {ratings.nnz} ratings, "
          f"{len(sim)} stored similarities, d={args.d}")
    backends = kernels.available()
    if "cython" not in backends:
        print("compiled backend not built; run `pip install -e . --no-build-isolation` first")

    results = {}
    for name in backends:
        kernels.use(name)
        timings = bench_kernels(kernels.active(), ratings, sim, args.d, args.repeat,
                                np.random.default_rng(args.seed))
        hp = Hyperparams(d=args.d, epochs=args.epochs, zero_samples=0, seed=args.seed)
        t0 = time.perf_counter()
        _, report = train(ratings, sim, hp)
        timings["train_epoch"] = (time.perf_counter() - t0) / max(len(report.losses), 1)
        timings["final_loss"] = report.final_loss
        results[name] = timings

    names = ["rating_sse", "pair_sse", "gradient", "train_epoch"]
    print(f"{'kernel':<14}" + "".join(f"{b:>12}" for b in backends)
          + ("    speedup" if len(backends) > 1 else ""))
    for key in names:
        line = f"{key:<14}" + "".join(f"{results[b][key] * 1e3:>10.2f}ms" for b in backends)
        if len(backends) > 1:
            line += f"{results['python'][key] / results['cython'][key]:>10.1f}x"
        print(line)
    if len(backends) > 1:
        a, b = results["cython"]["final_loss"], results["python"]["final_loss"]
        # gradient scatter order differs, so trajectories agree only to rounding
        print(f"final loss after {args.epochs} epochs: cython {a:.10g}, python {b:.10g} "
              f"(relative difference {abs(a - b) / abs(a):.1e})")


if __name__ == "__main__":
    main()
