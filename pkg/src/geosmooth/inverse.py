"""Sound over-approximation of transform pre-images.

Given an observed image ``x'`` and a parameter box, ``invert_image`` bounds
every image ``x`` that some parameter in the box could have transformed into
``x'``.  Each observed pixel constrains the original pixels its read
coordinates can touch: solving the bilinear form for one unknown corner value
(with [0, 1] for the other three) yields an interval constraint per
interpolation region, instantiated at the region corner furthest from the
constrained pixel, which is where the solved-for weight is smallest and the
bound loosest.  Constraints intersect across observed pixels; an empty
intersection proves no pre-image exists for any parameter in the box.

Refinement passes replace the [0, 1] neighbor placeholders with the bounds
from the previous pass and evaluate all four region corners, tightening the
result monotonically while preserving soundness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import WEIGHT_FLOOR, invert_pass
from .errors import DomainError
from .geometry import ParamBox, inverse_coord_map, read_bounds
from .imageops import Image, IntervalImage
from .interval import Interval

Q_GUARD = 1e-9  # outward widening of every constraint endpoint


@dataclass(frozen=True)
class InverseResult:
    """Bounds on the pre-image set, or a proof that it is empty.

    ``feasible`` is False iff some pixel constraint became empty, in which
    case ``offending_pixel`` names the first such (channel, row, col).
    """

    image: IntervalImage
    feasible: bool
    refinements_applied: int
    offending_pixel: tuple | None = None


def _first_empty(lo: np.ndarray, hi: np.ndarray):
    bad = np.argwhere(lo > hi)
    if bad.shape[0] == 0:
        return None
    return tuple(int(v) for v in bad[0])


def _sanitize(lo: np.ndarray, hi: np.ndarray) -> IntervalImage:
    l = np.clip(np.minimum(lo, hi), 0.0, 1.0)
    h = np.clip(np.maximum(lo, hi), 0.0, 1.0)
    return IntervalImage(l, h)


def _cboxes(xp: Image, kind: str, box: ParamBox):
    gx, gy = xp.geometry.coord_grids()
    return read_bounds(kind, box, gx, gy)


def _run_pass(xp, cbox, prev, use_prev, value_slack, res_lo, res_hi):
    invert_pass(
        xp.pixels,
        cbox,
        prev,
        use_prev,
        float(value_slack),
        Q_GUARD,
        res_lo,
        res_hi,
    )


def invert_image(
    xp: Image,
    kind: str,
    box: ParamBox,
    refinements: int = 0,
    value_slack: float = 0.0,
) -> InverseResult:
    """Bound every original image that the box could map onto ``xp``.

    ``value_slack`` widens observed pixel values by +/- that amount before
    solving, which keeps the result sound when ``xp`` was stored with
    rounding (pass 1/510 for 8-bit sources).
    """
    if refinements < 0:
        raise DomainError("refinements must be >= 0")
    if value_slack < 0:
        raise DomainError("value_slack must be >= 0")
    cbox = _cboxes(xp, kind, box)
    shape = xp.pixels.shape
    res_lo = np.zeros(shape)
    res_hi = np.ones(shape)
    dummy = (np.zeros(shape), np.ones(shape))
    _run_pass(xp, cbox, dummy, False, value_slack, res_lo, res_hi)
    bad = _first_empty(res_lo, res_hi)
    if bad is not None:
        return InverseResult(_sanitize(res_lo, res_hi), False, 0, bad)
    for r in range(refinements):
        prev = (res_lo.copy(), res_hi.copy())
        _run_pass(xp, cbox, prev, True, value_slack, res_lo, res_hi)
        bad = _first_empty(res_lo, res_hi)
        if bad is not None:
            return InverseResult(_sanitize(res_lo, res_hi), False, r + 1, bad)
    return InverseResult(IntervalImage(res_lo, res_hi), True, refinements)


def refine_once(
    prev: InverseResult,
    xp: Image,
    kind: str,
    box: ParamBox,
    value_slack: float = 0.0,
) -> InverseResult:
    """One more refinement pass on an existing feasible result."""
    if not prev.feasible:
        raise DomainError("cannot refine an infeasible result")
    cbox = _cboxes(xp, kind, box)
    res_lo = prev.image.lo.copy()
    res_hi = prev.image.hi.copy()
    _run_pass(xp, cbox, (prev.image.lo, prev.image.hi), True, value_slack, res_lo, res_hi)
    bad = _first_empty(res_lo, res_hi)
    n = prev.refinements_applied + 1
    if bad is not None:
        return InverseResult(_sanitize(res_lo, res_hi), False, n, bad)
    return InverseResult(IntervalImage(res_lo, res_hi), True, n)


# ---------------------------------------------------------------------------
# scalar constraint derivation, kept in plain Python for inspection and as an
# independent check on the batched kernel


def pixel_constraint_regions(
    pixel,
    candidate_cbox,
    p_value: float,
    value_slack: float = 0.0,
):
    """First-pass constraints one observed value places on one grid pixel.

    ``pixel`` is the constrained pixel as odd grid coordinates (px, py);
    ``candidate_cbox`` is the (Interval, Interval) read-coordinate box of the
    observed pixel; ``p_value`` is the observed value.  Returns a dict keyed
    by interpolation-cell lower corner (v, w) mapping to the solved interval,
    or None where the furthest-corner weight fell below the drop threshold.
    Cells the box does not reach are absent.
    """
    px, py = float(pixel[0]), float(pixel[1])
    cx, cy = candidate_cbox
    out = {}
    for dx in (0, 1):
        for dy in (0, 1):
            v = px - 2.0 * dx
            w = py - 2.0 * dy
            rx = cx.intersect(Interval(v, v + 2.0))
            ry = cy.intersect(Interval(w, w + 2.0))
            if rx.empty or ry.empty:
                continue
            fx = rx.hi if dx == 0 else rx.lo
            fy = ry.hi if dy == 0 else ry.lo
            wxl = (2.0 + v - fx) * 0.5
            wxr = (fx - v) * 0.5
            wyl = (2.0 + w - fy) * 0.5
            wyu = (fy - w) * 0.5
            weights = (wxl * wyl, wxl * wyu, wxr * wyl, wxr * wyu)
            pidx = 2 * dx + dy
            wp = weights[pidx]
            key = (v, w)
            if wp < WEIGHT_FLOOR:
                out[key] = None
                continue
            s = 0.0
            for k in range(4):
                if k != pidx:
                    s += weights[k]
            out[key] = Interval(
                (p_value - value_slack - s) / wp,
                (p_value + value_slack) / wp,
            )
    return out


def candidate_constraint(
    pixel,
    kind: str,
    box: ParamBox,
    candidate,
    p_value: float,
    value_slack: float = 0.0,
):
    """Joined first-pass constraint from one observed pixel, before the
    intersection with other candidates and with [0, 1].  Returns None when
    every region was dropped or out of reach."""
    cbox = inverse_coord_map(kind, box, candidate)
    regions = pixel_constraint_regions(pixel, cbox, p_value, value_slack)
    if any(q is None for q in regions.values()):
        return None
    joined = None
    for q in regions.values():
        joined = q if joined is None else joined.join(q)
    return joined
