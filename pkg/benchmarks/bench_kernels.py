"""Compare the compiled kernels with their pure-Python twins.

Run with ``python3 benchmarks/bench_kernels.py``. Each kernel is timed on the
same inputs with both backends (best of ``--repeat`` runs) and the outputs
are checked to agree before the timings are reported.
"""
import argparse
import math
import time

import numpy as np

from seolock._backend import compiled_kernels, python_kernels


def cases(scale: float):
    ks = np.array([1, 2, 3], dtype=np.int64)
    amp = np.array([0.02, 0.01, 0.004])
    off = np.array([0.3, 1.1, -0.4])
    n_alpha = max(2, int(200 * scale))
    alphas = np.linspace(0.05, 0.95, n_alpha)
    n_env = max(10, int(200_000 * scale))
    n_full = max(10, int(100_000 * scale))
    dt_full = 2 * math.pi / 400
    p_half = 0.01 * (1 + 0.1 * np.sin(0.5 * dt_full * np.arange(2 * n_full + 1)))
    return {
        "iterate_lift (1e5 iterations)": (
            "iterate_lift", (0.1, int(1e5 * scale), 0.31, ks, amp, off)),
        f"winding_batch ({n_alpha} alphas x 11000)": (
            "winding_batch", (0.0, alphas, ks, np.tile(amp, (n_alpha, 1)),
                              np.tile(off, (n_alpha, 1)), 1000, 10_000)),
        f"envelope_em ({n_env} steps, noisy)": (
            "envelope_em", (1.0 + 0j, 0, 2 * math.pi / 200, n_env, 10, -0.2, 0.2, 0.0, 0.0,
                            1.0, np.array([0.03]), np.array([2 / 3]), np.array([0.0]),
                            np.random.default_rng(0).standard_normal((n_env, 2)) * 1e-3, 1e6)),
        f"full_rk4 ({n_full} steps)": (
            "full_rk4", (0.05, 0.0, 0.01, dt_full, n_full, 10, 0.01, 1.0, 0.1, 0.3, 1.0, 0.1,
                         2.0, 2 * math.pi / 1.5, 0.0, 0.04, p_half, 1e3)),
    }


def best_time(fn, args, repeat):
    best, out = math.inf, None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, out


def first_array(result):
    return np.asarray(result[0] if isinstance(result, tuple) else result)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0,
                    help="multiply all problem sizes (the Python loops are slow)")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if compiled_kernels is None:
        raise SystemExit("compiled extension not available; build with "
                         "pip install -e . --no-build-isolation")
    print(f"{'kernel':<42}{'compiled':>12}{'python':>12}{'speed-up':>10}")
    for label, (name, call_args) in cases(args.scale).items():
        tc, rc = best_time(getattr(compiled_kernels, name), call_args, args.repeat)
        tp, rp = best_time(getattr(python_kernels, name), call_args, 1)
        np.testing.assert_allclose(first_array(rc), first_array(rp), rtol=0, atol=1e-9)
        print(f"{label:<42}{tc * 1e3:>10.2f}ms{tp * 1e3:>10.1f}ms{tp / tc:>9.0f}x")


if __name__ == "__main__":
    main()
