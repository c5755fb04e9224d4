"""Time the compiled partition-search kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--seed 0]

Both backends run on identical random mass tables; results must agree.
"""
import argparse
import time

import numpy as np

from permdecomp.kernels import implementations


def mass_table(rng, n_atoms, n):
    """Random ``(K, 2**n)`` table of squared subset-sum norms per atom."""
    parts = rng.normal(size=(n_atoms, n)) + 1j * rng.normal(size=(n_atoms, n))
    parts *= rng.random((n_atoms, 1)) ** 3
    subsets = np.arange(1 << n)
    bits = ((subsets[:, None] >> np.arange(n)) & 1).astype(float)
    return np.ascontiguousarray(np.abs(parts @ bits.T) ** 2)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    impls = implementations()
    if "cython" not in impls:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(args.seed)
    cases = [("objective", 64, 4), ("local_improve", 64, 4), ("brute_force", 10, 3),
             ("brute_force", 12, 4)]
    print(f"{'kernel':14s} {'atoms':>5s} {'n':>2s} " +
          " ".join(f"{name:>12s}" for name in impls) + "   speedup")
    for kernel, K, n in cases:
        masses = mass_table(rng, K, n)
        labels = rng.integers(0, n, size=K)
        if kernel == "objective":
            call = lambda m: m.objective(masses, labels, n)
        elif kernel == "local_improve":
            call = lambda m: m.local_improve(masses, labels, n)
        else:
            call = lambda m: m.brute_force(masses, n, labels)
        timings, outputs = {}, {}
        for name, mod in impls.items():
            timings[name], outputs[name] = best_of(lambda: call(mod), args.repeat)
        values = [float(out[0]) for out in outputs.values()]
        if not np.allclose(values, values[0], rtol=1e-12, atol=0):
            raise SystemExit(f"{kernel}: backends disagree: {values}")
        speed = timings["python"] / timings["cython"] if "cython" in timings else float("nan")
        print(f"{kernel:14s} {K:5d} {n:2d} " +
              " ".join(f"{timings[name] * 1e3:10.3f}ms" for name in impls) +
              f"   {speed:7.1f}x")


if __name__ == "__main__":
    main()
