"""Wall time of the SMO solver against training-set size."""
import argparse
import time

import numpy as np

from jamcast.svr import SvrHyperparams, train_svr


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 250, 500, 1000, 2016])
    ap.add_argument("--dim", type=int, default=9)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    train_svr((rng.normal(size=(5, args.dim)), rng.normal(size=5)))  # jit warmup
    print(f"{'n':>6} {'seconds':>9} {'n_sv':>6}")
    for n in args.sizes:
        X = rng.normal(size=(n, args.dim))
        y = np.clip(5 + 2 * np.sin(X[:, 0]) + rng.normal(0, 0.5, n), 0, 10)
        t0 = time.perf_counter()
        model = train_svr((X, y), SvrHyperparams())
        print(f"{n:>6} {time.perf_counter() - t0:>9.3f} {model.dual_coefs.size:>6}")


if __name__ == "__main__":
    main()
