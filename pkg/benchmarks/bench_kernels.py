"""Time the numba kernels against their pure-numpy twins.

    python benchmarks/bench_kernels.py [--size 96] [--repeat 3] [--threads N]

Each kernel runs once untimed per backend so JIT compilation is excluded.
Both backends are checked for identical results before timing.
"""
import argparse
import time

import numpy as np

from nlhd import _accel, kernels
from nlhd.decompose import decompose_pass
from nlhd.grouping import ILLUMINATION, REFLECTANCE, block_pixel_index, reference_positions

BACKENDS = ("numba", "numpy")


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def build_cases(img, params):
    h, w, _ = img.shape
    planes = np.ascontiguousarray(img.transpose(2, 0, 1))
    flat = planes.reshape(3, -1)
    pos = reference_positions(h, w, params)
    p, n2, n3 = params.patch_side, params.num_blocks, params.num_rows
    _, origins = kernels.match_blocks(planes, pos, p, n2, params.search_radius)
    bp = block_pixel_index(origins, p, w)
    mb = flat[:, bp].transpose(1, 0, 2, 3).reshape(-1, *bp.shape[1:])
    rows, _ = kernels.match_rows(mb, n3)
    rows = rows.reshape(len(pos), 3, p * p, n3)
    lum = img.max(axis=2)
    sub = lum[::4, ::4].ravel()[:2000]
    return {
        "match_blocks": lambda b: kernels.match_blocks(planes, pos, p, n2, params.search_radius, backend=b),
        "match_rows": lambda b: kernels.match_rows(mb, n3, backend=b),
        "filter_groups/low": lambda b: kernels.filter_groups(flat, bp, rows, kernels.MODE_LOW, backend=b),
        "filter_groups/threshold": lambda b: kernels.filter_groups(
            flat, bp, rows, kernels.MODE_THRESHOLD, thr=0.05, backend=b),
        "group_means": lambda b: kernels.group_means(flat, bp, rows, backend=b),
        "order_mismatch_count": lambda b: kernels.order_mismatch_count(sub, np.sqrt(sub) + 0.01 * sub[::-1],
                                                                      backend=b),
        "decompose_pass/low": lambda b: decompose_pass(img, params, "low", backend=b),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=0, atol=1e-10)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=96, help="side of the square test image")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args(argv)
    if args.threads:
        _accel.set_threads(args.threads)

    img = np.random.default_rng(0).random((args.size, args.size, 3)) * 0.3
    print(f"image {args.size}x{args.size}, numba threads: {_accel.get_threads()}")
    print(f"{'preset':<13}{'kernel':<26}{'numba s':>10}{'numpy s':>10}{'speedup':>9}")
    for label, params in (("illumination", ILLUMINATION), ("reflectance", REFLECTANCE)):
        for name, fn in build_cases(img, params).items():
            if not same(fn("numba"), fn("numpy")):
                raise SystemExit(f"{name}: backends disagree")
            t = {b: best_of(lambda: fn(b), args.repeat) for b in BACKENDS}
            print(f"{label:<13}{name:<26}{t['numba']:>10.4f}{t['numpy']:>10.4f}"
                  f"{t['numpy'] / t['numba']:>8.1f}x")


if __name__ == "__main__":
    main()
