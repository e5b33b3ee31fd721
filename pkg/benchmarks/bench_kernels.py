"""Time the compiled and pure-Python kernels on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from pathmeasures._kernels import backends


def _chain(rng, S, N):
    k = rng.random((N, S, S)) + 0.05
    k /= k.sum(axis=2, keepdims=True)
    return rng.random(S) + 0.1, k


def _coupling(rng, n):
    K = rng.random((n, n)) + 1e-3
    a = rng.dirichlet(np.ones(n))
    b = rng.dirichlet(np.ones(n))
    return np.log(K), np.log(a), np.log(b)


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    mods = backends()
    cases = []
    for S, N in ((3, 6), (4, 7), (6, 6)):
        init, ker = _chain(rng, S, N)
        cases.append((f"path_weights S={S} N={N}", lambda m, i=init, k=ker: m.path_weights(i, k)))
    for n in (4, 32, 128):
        lk, la, lb = _coupling(rng, n)
        g0 = np.zeros(n)
        cases.append((f"sinkhorn_log n={n}",
                      lambda m, lk=lk, la=la, lb=lb, g0=g0: m.sinkhorn_log(lk, la, lb, g0, 1e-10, 100_000, 50, 1e-14)))

    names = sorted(mods)
    print(f"{'case':28s}" + "".join(f"{n + ' [ms]':>16s}" for n in names) + f"{'speedup':>10s}")
    for label, fn in cases:
        times = {}
        for n in names:
            fn(mods[n])
            times[n] = min(timeit.repeat(lambda: fn(mods[n]), number=1, repeat=args.repeat)) * 1e3
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:28s}" + "".join(f"{times[n]:16.3f}" for n in names) + f"{speed:10.1f}x")


if __name__ == "__main__":
    main()
