#!/usr/bin/env python3
"""Benchmark the compiled t-SNE kernels against the numpy fallback.

The perplexity search and the embedding gradient are the two inner loops
of exact t-SNE; this compares both backends on growing point counts and
checks they agree numerically.

Usage: python benchmarks/bench_tsne.py [--sizes 250,500,1000,2000]
"""

import argparse
import time

import numpy as np

from fieldvae._kernels import numpy_impl

try:
    from fieldvae._kernels import tsne_core
except ImportError:
    tsne_core = None


def timeit(fn, repeats=3):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench(n, rng):
    z = rng.standard_normal((n, 8))
    sq = np.sum(z * z, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * z @ z.T, 0.0)
    target = np.log2(30.0)

    rows = []
    t_np, (p_np, _, _) = timeit(lambda: numpy_impl.conditional_probs(d2, target))
    row = {"kernel": "conditional_probs", "n": n, "numpy_s": t_np}
    if tsne_core is not None:
        t_cy, (p_cy, _, _) = timeit(lambda: tsne_core.conditional_probs(d2, target))
        assert np.allclose(p_cy, p_np, atol=1e-10)
        row.update(cython_s=t_cy, speedup=t_np / t_cy)
    rows.append(row)

    P = (p_np + p_np.T) / (2.0 * n)
    P = np.ascontiguousarray(P)
    Y = np.ascontiguousarray(rng.standard_normal((n, 2)))
    t_np, (g_np, kl_np) = timeit(lambda: numpy_impl.kl_grad(P, Y))
    row = {"kernel": "kl_grad", "n": n, "numpy_s": t_np}
    if tsne_core is not None:
        t_cy, (g_cy, kl_cy) = timeit(lambda: tsne_core.kl_grad(P, Y))
        assert np.allclose(g_cy, g_np, atol=1e-10)
        assert abs(kl_cy - kl_np) < 1e-10
        row.update(cython_s=t_cy, speedup=t_np / t_cy)
    rows.append(row)
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="250,500,1000,2000")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if tsne_core is None:
        print("compiled backend not built; timing the numpy fallback only\n")
    rng = np.random.default_rng(0)
    header = f"{'kernel':<18}{'N':>6}{'numpy [s]':>12}{'cython [s]':>12}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        for row in bench(n, rng):
            cy = f"{row['cython_s']:12.4f}" if "cython_s" in row else " " * 12
            sp = f"{row['speedup']:8.1f}x" if "speedup" in row else ""
            print(f"{row['kernel']:<18}{row['n']:>6}{row['numpy_s']:>12.4f}{cy}{sp}")


if __name__ == "__main__":
    main()
