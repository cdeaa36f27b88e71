"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--rows 2000] [--repeat 3]

Reports wall time per ADMM fit, per Weber solve and per lasso fit for each
backend, and checks that both backends agree.
"""

from __future__ import annotations

import argparse
import logging
import time

import numpy as np

from recipdelay import kernels
from recipdelay.baselines import fit_lasso
from recipdelay.dprr import DprrConfig, fit, weber_point
from recipdelay.features import Dataset


def planted_dataset(n: int, d: int = 14, n_groups: int = 150, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    X[:, -1] = 1.0
    group = rng.integers(n_groups, size=n)
    offsets = rng.normal(scale=2.0, size=(n_groups, d))
    w = rng.normal(size=d)
    y = np.einsum("ij,ij->i", X, w + offsets[group]) + rng.normal(scale=0.5, size=n)
    return Dataset(X=X, y=y, u=list(range(n)), v=[int(g) for g in group], t1=np.zeros(n, dtype=np.int64),
                   group=group.astype(np.int64), fill_value=0.0)


def best_of(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--iterations", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    logging.getLogger("recipdelay").setLevel(logging.ERROR)  # fixed-iteration runs hit the cap by design

    backends = ["python"] + (["cython"] if kernels.compiled_backend is not None else [])
    ds = planted_dataset(args.rows)
    cfg = DprrConfig(beta=0.1, max_iterations=args.iterations, eps_primal=1e-300, eps_dual=1e-300)
    pts = np.random.default_rng(1).normal(size=(200, 14))

    results = {}
    print(f"rows={args.rows} iterations={args.iterations} repeat={args.repeat}")
    print(f"{'kernel':<10}{'backend':<10}{'seconds':>10}")
    for name in backends:
        t_admm, model = best_of(lambda: fit(ds, config=cfg, backend=name), args.repeat)
        t_weber, med = best_of(lambda: weber_point(pts, backend=name), args.repeat)
        t_lasso, las = best_of(lambda: fit_lasso(ds, 0.1, backend=name), args.repeat)
        results[name] = (model.w_tilde, med, las.coef)
        for kernel, t in (("admm", t_admm), ("weber", t_weber), ("lasso", t_lasso)):
            print(f"{kernel:<10}{name:<10}{t:>10.4f}")
    if len(backends) == 2:
        diffs = [float(np.max(np.abs(a - b))) for a, b in zip(results["python"], results["cython"])]
        print("max |python - cython|: admm %.2e  weber %.2e  lasso %.2e" % tuple(diffs))


if __name__ == "__main__":
    main()
