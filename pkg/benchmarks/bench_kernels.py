"""Compare the compiled kernels with the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--points 2000] [--repeat 5]

Times ``transform_eval`` on the level-2 transform of sqrt(2) and the batched
Gamma function, and reports the largest difference between the backends.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from hyperop import _fallback, differintegral
from hyperop.tower import TowerConfig, build_level

try:
    from hyperop import _kernels
except ImportError:  # extension not built
    _kernels = None


def _best(fn, repeat: int) -> float:
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _transform_args(t: differintegral.MellinTransform, z: np.ndarray) -> tuple:
    kappa, loglam, shift, sign = differintegral._singular_arrays(t.singular)
    return (
        z,
        t.series_coeffs[:, 0],
        t.log_split,
        t.log_nodes,
        np.exp(1j * t.angle) * t.weights * t.theta_hi[:, 0],
        t.tail_amp[:, 0],
        t.tail_power[:, 0],
        math.log(t.y_end),
        kappa,
        loglam,
        shift,
        sign,
        t.pole_tol,
    )


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--points", type=int, default=2000, help="evaluation points per call")
    p.add_argument("--repeat", type=int, default=5, help="timing repetitions (best is reported)")
    p.add_argument("--alpha", type=float, default=math.sqrt(2.0), help="base of the level-2 transform")
    args = p.parse_args(argv)
    if _kernels is None:
        print("compiled kernels are not built; nothing to compare")
        return 1

    rng = np.random.default_rng(0)
    z = rng.uniform(0.25, 5.0, args.points) + 1j * rng.uniform(-3.0, 3.0, args.points)
    ctx = build_level(TowerConfig(), args.alpha, 2)
    targs = _transform_args(ctx.transform, z)
    gz = rng.uniform(-9.5, 9.5, args.points) + 1j * rng.uniform(-9.5, 9.5, args.points)

    cases = [
        ("transform_eval", lambda m: m.transform_eval(*targs)),
        ("gamma_array", lambda m: m.gamma_array(gz)),
        ("recip_gamma_array", lambda m: m.recip_gamma_array(gz)),
    ]
    print(f"{'kernel':20s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s} {'max rel diff':>13s}")
    for name, call in cases:
        t_py = _best(lambda: call(_fallback), args.repeat) * 1e3
        t_cy = _best(lambda: call(_kernels), args.repeat) * 1e3
        a, b = call(_fallback), call(_kernels)
        diff = float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300)))
        print(f"{name:20s} {t_py:10.3f} {t_cy:10.3f} {t_py / t_cy:8.2f} {diff:13.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
