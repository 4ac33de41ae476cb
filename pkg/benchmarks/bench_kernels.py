"""Timing comparison of the compiled kernels against the NumPy fallback.

Runs each hot kernel at training-typical shapes under both backends and
prints per-call times plus the speedup. Correctness is asserted on the
fly (allclose between backends) so a silently divergent kernel fails
loudly here too.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from hypemarl._kernels import _core, numpy_backend


def _timeit(fn, args, repeat, warmup=3):
    for _ in range(warmup):
        fn(*args)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def _check(a, b):
    if not isinstance(a, tuple):
        a, b = (a,), (b,)
    for x, y in zip(a, b):
        np.testing.assert_allclose(np.asarray(x), np.asarray(y),
                                   rtol=1e-12, atol=1e-12)


def cases(rng):
    n_theta = 790_000          # hypernet-sized flat parameter vector
    p = rng.normal(size=n_theta)
    g = rng.normal(size=n_theta)
    m = np.zeros(n_theta)
    v = np.zeros(n_theta)
    yield ("adam_apply", "theta 790k",
           (p, g, m, v, 10, 1e-4, 0.9, 0.999, 1e-8))

    yield ("polyak_apply", "theta 790k", (p.copy(), g, 0.005))

    b, nin, nout = 289, 2, 256  # one grouped main-net layer, all agents
    w = rng.normal(size=(b, nin, nout))
    x = rng.normal(size=(b, nin))
    yield ("grouped_linear", "289x(2->256)", (w, x))

    gy = rng.normal(size=(b, nout))
    yield ("grouped_linear_backward", "289x(2->256)", (w, x, gy))

    yield ("huber_mean_grad", "resid 4096",
           (rng.normal(size=4096) * 3.0, 1.0))

    y = rng.uniform(0.1, 2.0, size=(33, 33))
    yield ("laplacian_neumann", "33x33", (y, 256.0))

    v1f = rng.normal(size=(33, 34))
    v1f[:, 0] = v1f[:, -1] = 0.0
    v2f = rng.normal(size=(34, 33))
    v2f[0] = v2f[-1] = 0.0
    yield ("advect_upwind", "33x33", (y, v1f, v2f, 0.01))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'shape':16s} {'numpy':>10s} {'cython':>10s} "
          f"{'speedup':>8s}")
    for name, shape, call_args in cases(rng):
        f_np = getattr(numpy_backend, name)
        f_cy = getattr(_core, name)
        _check(f_np(*call_args), f_cy(*call_args))
        t_np = _timeit(f_np, call_args, args.repeat)
        t_cy = _timeit(f_cy, call_args, args.repeat)
        print(f"{name:28s} {shape:16s} {t_np * 1e6:9.1f}u {t_cy * 1e6:9.1f}u "
              f"{t_np / t_cy:7.2f}x")


if __name__ == "__main__":
    main()
