"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported side by side, so no environment juggling is
needed; outputs are checked for agreement before timing.
"""

import argparse
import timeit

import numpy as np

from cascade_lab import _fallback
from cascade_lab.normal_form import NormalForm, default_support

try:
    from cascade_lab import _kernels
except ImportError:
    _kernels = None


def cases():
    rng = np.random.default_rng(0)
    b = rng.normal(size=64) + 1j * rng.normal(size=64)
    yield "toy_rhs (64 modes)", lambda k: k.toy_rhs(b), 2000

    nf = NormalForm(default_support())  # 154770 terms on 70 modes
    y = rng.normal(size=nf.size) + 1j * rng.normal(size=nf.size)
    w = np.ones(len(nf.rows), dtype=np.complex128)
    f = rng.integers(-50, 50, size=len(nf.rows)).astype(np.float64)
    yield "cubic_sum, no phases", lambda k: k.cubic_sum(y, nf.rows, w, f, 0.0, nf.size), 20
    yield "cubic_sum, with phases", lambda k: k.cubic_sum(y, nf.rows, w, f, 0.3, nf.size), 20

    pts = np.array([(0, 0), (3, 1), (1, 4), (4, 5), (6, 2), (2, 7)], dtype=np.int64)
    radius = 30
    shift = 4 * (radius + 8) + 1
    keys = np.sort(pts[:, 0] * shift + pts[:, 1]).astype(np.int64)
    yield "spreading box scan (r=30)", lambda k: k.spreading_partners(pts, keys, shift, -radius, radius, 2), 2


def same(a, b):
    if isinstance(a, np.ndarray):
        return np.allclose(a, b, rtol=1e-12, atol=1e-12)
    norm = lambda rows: sorted((int(x), int(y), sorted(map(tuple, ps))) for x, y, ps in rows)
    return norm(a) == norm(b)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled kernels not built; only the fallback is available")
    print(f"{'kernel':32s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, call, number in cases():
        t_py = min(timeit.repeat(lambda: call(_fallback), number=number, repeat=args.repeat)) / number
        if _kernels is None:
            print(f"{name:32s} {1e3 * t_py:12.4f}")
            continue
        if not same(call(_fallback), call(_kernels)):
            raise SystemExit(f"{name}: backends disagree")
        t_cy = min(timeit.repeat(lambda: call(_kernels), number=number, repeat=args.repeat)) / number
        print(f"{name:32s} {1e3 * t_py:12.4f} {1e3 * t_cy:12.4f} {t_py / t_cy:8.1f}")


if __name__ == "__main__":
    main()
