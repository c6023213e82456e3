"""Time the posterior-moment kernel under both backends.

Usage: ``python benchmarks/bench_posterior.py [--obs 500] [--bank 2000] [--pilots 1 2]``
"""

import argparse
import timeit

import numpy as np

from tddlink.config import complex_normal
from tddlink.kernels import BACKEND, posterior_moments


def make_inputs(n_obs, n_bank, tau_f, seed=0):
    rng = np.random.default_rng(seed)
    pred = complex_normal(rng, (n_bank, tau_f), 4.0)
    obs = pred[rng.integers(0, n_bank, n_obs)] + complex_normal(rng, (n_obs, tau_f))
    own = complex_normal(rng, n_bank)
    interf = rng.exponential(size=n_bank)
    return obs, pred, own, interf


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--obs", type=int, default=500)
    parser.add_argument("--bank", type=int, default=2000)
    parser.add_argument("--pilots", type=int, nargs="+", default=[1, 2, 4])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    backends = ["numpy"] + (["cython"] if BACKEND == "cython" else [])
    if BACKEND != "cython":
        print("compiled extension not built; timing the numpy backend only")
    print(f"{'tau_f':>5} {'backend':>8} {'best ms':>9} {'speedup':>8}")
    for tf in args.pilots:
        inputs = make_inputs(args.obs, args.bank, tf)
        ref = None
        for backend in backends:
            out = posterior_moments(*inputs, backend=backend)
            if ref is None:
                ref = out
            else:
                for a, b in zip(ref, out):
                    np.testing.assert_allclose(a, b, rtol=1e-10)
            best = min(timeit.repeat(lambda: posterior_moments(*inputs, backend=backend),
                                     number=1, repeat=args.repeat))
            if backend == "numpy":
                base = best
            print(f"{tf:>5} {backend:>8} {1e3 * best:>9.2f} {base / best:>7.1f}x")


if __name__ == "__main__":
    main()
