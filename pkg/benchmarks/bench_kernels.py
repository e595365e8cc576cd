"""Time the compiled simplex kernel against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Two workloads: single fixed-band LP subproblems of growing size, and a full
multi-start search (CCP iterations plus cleanup) on a synthetic panel.
"""
import argparse
import contextlib
import time

import numpy as np

from statarb import _kernels
from statarb.ccp import FinderConfig, search
from statarb.lp import build_fixed_band_lp, solve_lp
from statarb.market_data import SyntheticConfig, apply_scaling, compute_scaling, generate_synthetic


@contextlib.contextmanager
def use_backend(name):
    saved = _kernels.pivot, _kernels.simplex_loop
    _kernels.pivot, _kernels.simplex_loop = _kernels.get_backend(name)
    try:
        yield
    finally:
        _kernels.pivot, _kernels.simplex_loop = saved


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def lp_cases():
    for n, T in ((5, 100), (10, 250), (10, 500), (20, 500)):
        pm = generate_synthetic(SyntheticConfig(n_assets=n, n_days=T, seed=1))
        P = apply_scaling(pm, compute_scaling(pm)).prices
        g = np.random.default_rng(0).normal(size=T)
        yield f"LP n={n} T={T}", build_fixed_band_lp(P, g, 50.0)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = ["python"] + (["cython"] if _kernels.BACKEND == "cython" else [])
    if len(backends) == 1:
        print("compiled kernel not built; timing the fallback only")

    rows = []
    for label, prob in lp_cases():
        rows.append((label, {b: best_of(lambda: solve_lp(prob, backend=b), args.repeat) for b in backends}))
    for n, T, kind in ((10, 500, "fixed"), (10, 500, "moving"), (20, 500, "fixed")):
        pm = generate_synthetic(SyntheticConfig(n_assets=n, n_days=T, seed=7))
        cfg = FinderConfig(band_kind=kind, leverage_limit=50 if kind == "fixed" else 100)
        timings = {}
        for b in backends:
            with use_backend(b):
                timings[b] = best_of(lambda: search(pm, cfg), args.repeat)
        rows.append((f"search n={n} T={T} {kind} (10 inits)", timings))

    head = f"{'workload':<38}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else "")
    print(head)
    for label, t in rows:
        line = f"{label:<38}" + "".join(f"{t[b] * 1e3:>10.1f}ms" for b in backends)
        if len(backends) > 1:
            line += f"{t['python'] / t['cython']:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
