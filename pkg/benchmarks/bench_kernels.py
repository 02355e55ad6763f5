"""Benchmark the numba kernels against the pure-numpy fallback.

Each arm runs in a child process so the GEOSMOOTH_NO_NUMBA switch is
exercised exactly the way a user would flip it; the parent merges the
timings into one table.

    python3 benchmarks/bench_kernels.py [--repeats N] [--size S] [--json F]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

CHILD_ENV = "GEOSMOOTH_BENCH_CHILD"


def build_workloads(size: int):
    from geosmooth.datasets import synthetic_glyphs
    from geosmooth.geometry import ParamBox
    from geosmooth.imageops import (
        Image,
        apply_transform,
        apply_transform_interval,
        gaussian_blur,
        quantize,
    )
    from geosmooth.inverse import invert_image

    rng = np.random.default_rng(0)
    img = Image(rng.random((1, size, size)))
    glyph = synthetic_glyphs(1, seed=0, size=size).get(0)
    box = ParamBox.symmetric(30.0, 1)
    small_box = ParamBox.symmetric(10.0, 1)
    batch = rng.random((64, 1, size, size))
    warped = quantize(apply_transform(glyph, "rotation", np.array([6.0])))

    def bench_transform():
        apply_transform(img, "rotation", np.array([17.0]))

    def bench_interval():
        apply_transform_interval(img, "rotation", box)

    def bench_blur_batch():
        for px in batch:
            gaussian_blur(Image(px), 2.0, 5)

    def bench_invert():
        invert_image(warped, "rotation", small_box, refinements=2,
                     value_slack=1.0 / 510.0)

    return [
        ("apply_transform (1 image)", bench_transform),
        ("apply_transform_interval (+/-30 deg)", bench_interval),
        ("gaussian_blur 5x5 (64 images)", bench_blur_batch),
        ("invert_image (2 refinements)", bench_invert),
    ]


def run_child(repeats: int, size: int) -> int:
    from geosmooth import backend_name

    results = {"backend": backend_name(), "timings_ms": {}}
    for name, fn in build_workloads(size):
        fn()
        fn()  # warm up twice so jit compilation never lands in the timing
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        per_call = (time.perf_counter() - t0) / repeats * 1000.0
        results["timings_ms"][name] = per_call
    json.dump(results, sys.stdout)
    return 0


def run_arm(disable_numba: bool, repeats: int, size: int) -> dict:
    env = dict(os.environ)
    env[CHILD_ENV] = "1"
    if disable_numba:
        env["GEOSMOOTH_NO_NUMBA"] = "1"
    else:
        env.pop("GEOSMOOTH_NO_NUMBA", None)
    out = subprocess.run(
        [sys.executable, os.path.abspath(__file__),
         "--repeats", str(repeats), "--size", str(size)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(out.stdout)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=50)
    parser.add_argument("--size", type=int, default=28)
    parser.add_argument("--json", help="also write the raw timings here")
    args = parser.parse_args(argv)

    if os.environ.get(CHILD_ENV):
        return run_child(args.repeats, args.size)

    numba_arm = run_arm(False, args.repeats, args.size)
    numpy_arm = run_arm(True, args.repeats, args.size)
    if numba_arm["backend"] != "numba":
        print("warning: numba unavailable; both arms ran the numpy kernels")

    width = max(len(n) for n in numba_arm["timings_ms"])
    print(f"image size {args.size}x{args.size}, {args.repeats} repeats\n")
    print(f"{'workload':<{width}}  {'numba ms':>10}  {'numpy ms':>10}  {'speedup':>8}")
    for name, t_nb in numba_arm["timings_ms"].items():
        t_np = numpy_arm["timings_ms"][name]
        print(f"{name:<{width}}  {t_nb:>10.3f}  {t_np:>10.3f}  {t_np / t_nb:>7.1f}x")

    if args.json:
        with open(args.json, "w") as f:
            json.dump({"numba": numba_arm, "numpy": numpy_arm}, f, indent=2)
        print(f"\nraw timings written to {args.json}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
