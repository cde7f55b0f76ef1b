"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from honest_otr import _fallback
from honest_otr.debias import nodewise_dantzig
from honest_otr.smoother import bandwidth

try:
    from honest_otr import _core
except ImportError:
    _core = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def smoother_case(n, p, rng):
    u = rng.standard_normal(n)
    y = rng.standard_normal(n)
    x = rng.standard_normal((n, p))
    h = bandwidth(u)
    return lambda mod: mod.loo_smooth(u, y, x, h)


def dantzig_case(q, rng):
    z = rng.standard_normal((3 * q, q))
    gram = z.T @ z / (3 * q)
    eta = 0.5 * np.abs(gram - np.diag(np.diag(gram))).max()

    def run(mod):
        import honest_otr._backend as backend
        saved = backend.simplex_iterate
        backend.simplex_iterate = mod.simplex_iterate
        try:
            for k in range(4):
                nodewise_dantzig(gram, k, eta)
        finally:
            backend.simplex_iterate = saved
    return run


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    cases = [(f"loo_smooth n={n} p={p}", smoother_case(n, p, rng))
             for n, p in ((300, 200), (1000, 50))]
    cases += [(f"nodewise LP q={q} (4 coords)", dantzig_case(q, rng)) for q in (40, 120)]
    print(f"{'kernel':32s} {'numpy (s)':>10s} {'compiled (s)':>13s} {'speedup':>8s}")
    for name, case in cases:
        t_py = best_of(lambda: case(_fallback), args.repeat)
        if _core is None:
            print(f"{name:32s} {t_py:10.4f} {'n/a':>13s} {'':>8s}")
            continue
        t_c = best_of(lambda: case(_core), args.repeat)
        print(f"{name:32s} {t_py:10.4f} {t_c:13.4f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
