"""Compare the compiled and numpy sweep kernels.

Times ``max_root_modulus_grid`` and ``brute_force_sweep`` on a random real
spectrum for both backends and checks that the two agree.

Usage: python3 benchmarks/bench_sweep.py [--size N] [--repeat R] [--seed S]
"""

import argparse
import time

import numpy as np

from aaadmm import kernels, theory


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=60, help="number of eigenvalues")
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    mus = np.concatenate([rng.uniform(-0.5, 0.95, args.size - 4), 0.8 * np.exp(1j * rng.uniform(0, np.pi, 4))])
    backends = ["python"] + (["compiled"] if kernels._compiled is not None else [])
    if len(backends) == 1:
        print("compiled extension not built; timing the numpy backend only")

    cases = [(1, 0.01), (2, 0.05), (3, 0.1)]
    print(f"{'case':<22}{'points':>8}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'max diff':>11}")
    for m, step in cases:
        axis = theory.beta_grid(-1.0, 1.0, step)
        grid = np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m)
        timings, results = {}, {}
        for b in backends:
            timings[b], results[b] = best_of(lambda: kernels.max_root_modulus_grid(mus, grid, backend=b), args.repeat)
        diff = np.max(np.abs(results[backends[0]] - results[backends[-1]]))
        speed = timings["python"] / timings[backends[-1]]
        row = f"{f'grid m={m} step={step}':<22}{grid.shape[0]:>8}"
        row += "".join(f"{timings[b]:>11.3f}s" for b in backends)
        print(row + f"{speed:>9.1f}x{diff:>11.1e}")

    print()
    for m, step in cases[1:]:
        found = {}
        for b in backends:
            t, res = best_of(lambda: theory.brute_force_sweep(mus, m, step=step, backend=b), 1)
            found[b] = res
            print(f"sweep m={m} step={step} [{b}]: {t:.3f}s beta={np.round(res.beta, 3).tolist()} "
                  f"factor={res.factor:.6f}")
        if len(found) == 2:
            same = np.allclose(found["python"].beta, found["compiled"].beta)
            print(f"  optimum agrees: {same}")


if __name__ == "__main__":
    main()
