"""Built-in oracle checks behind ``geosmooth selftest``.

Small, fast versions of the soundness arguments the package rests on.
Each check compares an implementation against an independent route
(brute force, bisection, or a closed form) and counts violations.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import beta as beta_dist

from ._stats import clopper_pearson_lower, norm_ppf
from .errorbound import epsilon_concrete
from .geometry import ParamBox
from .imageops import (
    Image,
    IntervalImage,
    apply_transform,
    apply_transform_interval,
    quantize_widen,
)
from .inverse import invert_image
from .smoothing import radius_l2


def _check_interval_transform(rng) -> int:
    """Sampled warps must land inside the interval warp."""
    bad = 0
    for _ in range(40):
        px = rng.random((1, 12, 12))
        img = Image(px)
        kind = rng.choice(["rotation", "translation"])
        dim = 1 if kind == "rotation" else 2
        center = rng.uniform(-20, 20, size=dim)
        half = rng.uniform(0.0, 4.0, size=dim)
        box = ParamBox(tuple(center - half), tuple(center + half))
        bounds = apply_transform_interval(img, kind, box)
        for g in box.sample_uniform(rng, 5):
            if not bounds.contains(apply_transform(img, kind, g)):
                bad += 1
    return bad


def _check_inverse(rng) -> int:
    """T_gamma(x) inverted over a box around gamma must contain x."""
    bad = 0
    for _ in range(6):
        x = Image(rng.random((1, 12, 12)))
        gamma = rng.uniform(-15, 15, size=1)
        box = ParamBox((gamma[0] - 1.0,), (gamma[0] + 1.0,))
        xp = apply_transform(x, "rotation", gamma)
        res = invert_image(xp, "rotation", box, refinements=3)
        if not res.feasible or not res.image.contains(x, tol=1e-9):
            bad += 1
    return bad


def _check_quantize_widen(rng) -> int:
    bad = 0
    for _ in range(20):
        px = rng.random((1, 8, 8))
        slack = rng.uniform(0.0, 0.01, size=(1, 8, 8))
        bounds = IntervalImage(np.clip(px - slack, 0, 1), np.clip(px + slack, 0, 1))
        widened = quantize_widen(bounds)
        q = np.rint(px * 255.0) / 255.0
        if not (np.all(widened.lo <= q + 1e-15) and np.all(q <= widened.hi + 1e-15)):
            bad += 1
    return bad


def _check_clopper_pearson(rng) -> int:
    """Closed forms at the edges, bisection of the beta CDF in between."""
    bad = 0
    if abs(clopper_pearson_lower(500, 500, 0.05) - 0.05 ** (1 / 500)) > 1e-9:
        bad += 1
    if clopper_pearson_lower(0, 500, 0.05) != 0.0:
        bad += 1
    for _ in range(10):
        n = int(rng.integers(10, 400))
        k = int(rng.integers(1, n))
        alpha = float(rng.uniform(0.001, 0.2))
        got = clopper_pearson_lower(k, n, alpha)
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if beta_dist.cdf(alpha, k, n - k + 1) >= 0 and beta_dist.cdf(mid, k, n - k + 1) < alpha:
                lo = mid
            else:
                hi = mid
        if abs(got - 0.5 * (lo + hi)) > 1e-8:
            bad += 1
    return bad


def _check_radius(rng) -> int:
    bad = 0
    want = 0.5 * 0.3 * (norm_ppf(0.99) - norm_ppf(0.01))
    if abs(radius_l2(0.99, 0.01, 0.3) - want) > 1e-12:
        bad += 1
    if radius_l2(0.6, 0.6, 1.0) != 0.0:
        bad += 1
    for _ in range(10):
        pa = float(rng.uniform(0.5, 1.0))
        pb = float(rng.uniform(0.0, pa))
        s = float(rng.uniform(0.1, 2.0))
        if radius_l2(pa, pb, s) < 0:
            bad += 1
    return bad


def _check_epsilon_zero(rng) -> int:
    """With gamma=0 the composition error collapses to near zero."""
    bad = 0
    x = Image(rng.random((1, 12, 12)))
    for _ in range(5):
        beta = rng.uniform(-10, 10, size=1)
        e = epsilon_concrete(x, beta, np.zeros(1), "rotation")
        if e > 1e-9:
            bad += 1
    return bad


CHECKS = (
    ("interval transform soundness", _check_interval_transform),
    ("inverse bound soundness", _check_inverse),
    ("quantize widening", _check_quantize_widen),
    ("binomial lower confidence", _check_clopper_pearson),
    ("certified radius formula", _check_radius),
    ("zero-parameter composition error", _check_epsilon_zero),
)


def run_all(seed: int = 0, verbose: bool = False) -> int:
    failures = 0
    for index, (name, fn) in enumerate(CHECKS):
        rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
        bad = fn(rng)
        failures += bad
        if verbose:
            status = "ok" if bad == 0 else f"FAIL ({bad})"
            print(f"  {name:<36s} {status}")
    return failures
