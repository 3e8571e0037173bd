"""Time the numba kernels against their numpy twins on the same inputs.

    python benchmarks/bench_backends.py [--counts 256] [--repeat 3]

Each row reports the best wall time per backend and the max abs difference
between the two results.  The first numba call (compilation) is excluded.
"""
import argparse
import time

import numpy as np

from dissipation_lab import use_backend
from dissipation_lab.flux import dr_flux
from dissipation_lab.mollify import KernelProfile, build_kernel, mollify, mollify_points
from dissipation_lab.scenarios import generate_scenario


def best_of(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _arr(res):
    if isinstance(res, tuple):
        res = res[0]
    return np.asarray(getattr(res, "values", res))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--counts", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    n = args.counts
    real = generate_scenario("taylor_green", counts=(n, n))
    u = real.u
    rho = build_kernel(KernelProfile(), 2, 17)
    ell = 8 * max(u.grid.spacing)
    pts = np.random.default_rng(0).uniform(1.0, 5.0, size=(2000, 2))
    cases = {
        "mollify(grid)": lambda: mollify(u, rho, ell, with_gradient=True),
        "mollify_points": lambda: mollify_points(u, rho, ell, pts, ngrad=2),
        "dr_flux": lambda: dr_flux(u, rho, ell),
        "build_kernel(flow)": lambda: build_kernel(
            KernelProfile("flow-averaged-bump", generator=((2.0, 0.0), (0.0, -2.0)), levels=64), 2, 24),
    }
    print(f"grid {n}x{n}, ell = {ell:.4g}, kernel nodes {len(rho.nodes)}")
    print(f"{'case':22s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, fn in cases.items():
        with use_backend("numba"):
            fn()
            t_nb, r_nb = best_of(fn, args.repeat)
        with use_backend("numpy"):
            t_np, r_np = best_of(fn, args.repeat)
        a, b = _arr(r_nb), _arr(r_np)
        diff = float(np.max(np.abs(a - b))) if a.shape == b.shape else float("nan")
        print(f"{name:22s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.2f} {diff:10.2e}")


if __name__ == "__main__":
    main()
