"""Compare the compiled and numpy kernels on the hot paths.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from exchange_index import corpus, kernels
from exchange_index.config import DEFAULT


def cases():
    rng = np.random.default_rng(0)
    e2 = corpus.e2()
    eco, omega = corpus.random_economy(rng)
    while eco.n < 4 or eco.l < 4:
        eco, omega = corpus.random_economy(rng)
    return [("e2 (n=2, l=2)", e2.eco, e2.omega), (f"random (n={eco.n}, l={eco.l})", eco, omega)]


def workloads(eco, omega):
    p = np.ones(eco.l)
    target = omega.copy()
    target[0] *= 0.999
    target[1] += omega[0] * 0.001
    tol = DEFAULT
    return {
        "excess_demand": lambda be: be.excess_demand(eco.coef, eco.sigma, omega, p),
        "excess_jacobian": lambda be: be.excess_jacobian(eco.coef, eco.sigma, omega, p),
        "newton": lambda be: be.newton(eco.coef, eco.sigma, omega, 1.5 * p, tol.newton, tol.newton_max_iter,
                                       tol.backtrack, tol.price_floor),
        "continuation": lambda be: be.continuation(eco.coef, eco.sigma, omega, target, p, tol.continuation_steps,
                                                   tol.newton, tol.newton_max_iter, tol.backtrack,
                                                   tol.price_floor, tol.trust_factor),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy backend is available")
    names = sorted(backends)
    print(f"{'case':<22}{'kernel':<17}" + "".join(f"{n + ' (us)':>16}" for n in names) + f"{'speedup':>10}")
    for label, eco, omega in cases():
        for kernel, fn in workloads(eco, omega).items():
            times = {}
            for name in names:
                be = backends[name]
                times[name] = min(timeit.repeat(lambda: fn(be), number=args.repeat, repeat=3)) / args.repeat * 1e6
            speed = times["python"] / times["cython"] if "cython" in times else float("nan")
            print(f"{label:<22}{kernel:<17}" + "".join(f"{times[n]:>16.1f}" for n in names) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
