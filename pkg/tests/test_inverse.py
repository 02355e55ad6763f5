"""Pre-image over-approximation: soundness, refinement, infeasibility.

Two independent routes compute the first constraint pass: the compiled
kernel inside ``invert_image`` and the pure-Python
``pixel_constraint_regions`` oracle.  They must agree, and both must be
sound against brute-force sampling of the bilinear form.
"""

import numpy as np
import pytest

from geosmooth.geometry import GridGeometry, ParamBox, inverse_coord_map
from geosmooth.imageops import Image, apply_transform, quantize
from geosmooth.interval import Interval
from geosmooth.inverse import (
    Q_GUARD,
    candidate_constraint,
    invert_image,
    pixel_constraint_regions,
    refine_once,
)

QUANT_SLACK = 1.0 / 510.0


def warped_pair(rng, kind="rotation", size=10, gamma_span=12.0, box_half=1.5):
    x = Image(rng.random((1, size, size)))
    dim = 1 if kind == "rotation" else 2
    gamma = rng.uniform(-gamma_span, gamma_span, size=dim)
    box = ParamBox(tuple(gamma - box_half), tuple(gamma + box_half))
    xp = apply_transform(x, kind, gamma)
    return x, xp, box


class TestSoundness:
    @pytest.mark.parametrize("kind", ["rotation", "translation"])
    def test_original_contained(self, kind):
        rng = np.random.default_rng(0)
        for _ in range(15):
            x, xp, box = warped_pair(rng, kind)
            res = invert_image(xp, kind, box, refinements=3)
            assert res.feasible
            assert res.image.contains(x, tol=1e-9)

    def test_quantized_observation_with_slack(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            x, xp, box = warped_pair(rng)
            res = invert_image(quantize(xp), "rotation", box,
                               refinements=3, value_slack=QUANT_SLACK)
            assert res.feasible
            assert res.image.contains(x, tol=1e-9)

    def test_quantized_without_slack_can_overtighten(self):
        # documents why the slack exists: 8-bit storage shifts values by up
        # to 1/510, so slack-free inversion of a quantized image is allowed
        # to (and in practice does) lose the original
        rng = np.random.default_rng(2)
        lost = 0
        for _ in range(10):
            x, xp, box = warped_pair(rng)
            res = invert_image(quantize(xp), "rotation", box, refinements=3)
            if not (res.feasible and res.image.contains(x, tol=1e-9)):
                lost += 1
        assert lost > 0


class TestRefinement:
    def test_widths_monotone_and_sound(self):
        rng = np.random.default_rng(3)
        for _ in range(8):
            x, xp, box = warped_pair(rng)
            cur = invert_image(xp, "rotation", box, refinements=0)
            assert cur.feasible
            widths = cur.image.widths()
            for _ in range(6):
                cur = refine_once(cur, xp, "rotation", box)
                new = cur.image.widths()
                assert np.all(new <= widths + 1e-15)
                assert cur.image.contains(x, tol=1e-9)
                widths = new

    def test_refinements_argument_matches_chain(self):
        rng = np.random.default_rng(4)
        x, xp, box = warped_pair(rng)
        direct = invert_image(xp, "rotation", box, refinements=4)
        chained = invert_image(xp, "rotation", box, refinements=0)
        for _ in range(4):
            chained = refine_once(chained, xp, "rotation", box)
        np.testing.assert_array_equal(direct.image.lo, chained.image.lo)
        np.testing.assert_array_equal(direct.image.hi, chained.image.hi)
        assert direct.refinements_applied == 4
        assert chained.refinements_applied == 4

    def test_point_box_is_tight(self):
        rng = np.random.default_rng(5)
        x = Image(rng.random((1, 8, 8)))
        box = ParamBox.point(np.zeros(1))
        res = invert_image(x, "rotation", box, refinements=2)
        assert res.feasible
        assert res.image.contains(x)
        assert res.image.widths().max() <= 4 * Q_GUARD


class TestInfeasibility:
    def checkerboard(self, size=12):
        px = np.indices((size, size)).sum(axis=0) % 2
        return Image(px[None].astype(np.float64))

    def test_excluded_parameter_proven_impossible(self):
        x = self.checkerboard()
        xp = quantize(apply_transform(x, "rotation", np.zeros(1)))
        res = invert_image(xp, "rotation", ParamBox((3.0,), (4.0,)),
                           refinements=0, value_slack=QUANT_SLACK)
        assert not res.feasible
        assert res.offending_pixel is not None
        assert len(res.offending_pixel) == 3

    def test_control_box_remains_feasible(self):
        x = self.checkerboard()
        xp = quantize(apply_transform(x, "rotation", np.zeros(1)))
        res = invert_image(xp, "rotation", ParamBox((-0.5,), (0.5,)),
                           refinements=2, value_slack=QUANT_SLACK)
        assert res.feasible
        assert res.image.contains(x, tol=1e-9)

    def test_infeasible_image_is_sanitized(self):
        x = self.checkerboard()
        xp = quantize(apply_transform(x, "rotation", np.zeros(1)))
        res = invert_image(xp, "rotation", ParamBox((3.0,), (4.0,)),
                           refinements=0, value_slack=QUANT_SLACK)
        assert np.all(res.image.lo <= res.image.hi)
        assert np.all(res.image.lo >= 0.0) and np.all(res.image.hi <= 1.0)


class TestConstraintOracle:
    """pixel_constraint_regions against brute force, and against the kernel."""

    def test_regions_sound_by_sampling(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            px, py = rng.choice([-3, -1, 1, 3], size=2).astype(float)
            cx = Interval(px - rng.uniform(0, 2), px + rng.uniform(0, 2))
            cy = Interval(py - rng.uniform(0, 2), py + rng.uniform(0, 2))
            p_obs = float(rng.uniform(0.1, 0.9))
            slack = 0.002
            regions = pixel_constraint_regions((px, py), (cx, cy), p_obs, slack)
            for (v, w), q in regions.items():
                if q is None:
                    continue
                rx = cx.intersect(Interval(v, v + 2.0))
                ry = cy.intersect(Interval(w, w + 2.0))
                for _ in range(60):
                    xs = rng.uniform(rx.lo, rx.hi)
                    ys = rng.uniform(ry.lo, ry.hi)
                    wxl, wxr = (2 + v - xs) / 2, (xs - v) / 2
                    wyl, wyu = (2 + w - ys) / 2, (ys - w) / 2
                    weights = {
                        (0, 0): wxl * wyl, (0, 1): wxl * wyu,
                        (1, 0): wxr * wyl, (1, 1): wxr * wyu,
                    }
                    dx, dy = int((px - v) // 2), int((py - w) // 2)
                    wp = weights[(dx, dy)]
                    others = sum(val for k, val in weights.items() if k != (dx, dy))
                    t = float(rng.uniform(0, 1))
                    # neighbors chosen adversarially inside [0,1]
                    for nsum in (0.0, others):
                        val = wp * t + nsum
                        if abs(val - p_obs) <= slack:
                            assert q.contains(t), (
                                f"value {t} satisfies the bilinear form but "
                                f"was excluded by region ({v},{w})"
                            )

    def test_kernel_matches_python_pass0(self):
        rng = np.random.default_rng(7)
        size = 8
        geom = GridGeometry(size, size, 1)
        gx, gy = geom.coord_grids()
        for kind in ("rotation", "translation"):
            x, xp, box = warped_pair(rng, kind, size=size)
            res = invert_image(xp, kind, box, refinements=0)
            lo = np.zeros((size, size))
            hi = np.ones((size, size))
            for b in range(size):
                for a in range(size):
                    cur = Interval(0.0, 1.0)
                    for j in range(size):
                        for i in range(size):
                            q = candidate_constraint(
                                (gx[b, a], gy[b, a]), kind, box,
                                (gx[j, i], gy[j, i]),
                                float(xp.pixels[0, j, i]),
                            )
                            if q is None:
                                continue
                            widened = Interval(q.lo - Q_GUARD, q.hi + Q_GUARD)
                            nxt = cur.intersect(widened)
                            if nxt.empty:
                                cur = None
                                break
                            cur = nxt
                        if cur is None:
                            break
                    if cur is None:
                        continue
                    lo[b, a], hi[b, a] = max(cur.lo, 0.0), min(cur.hi, 1.0)
            assert res.feasible
            np.testing.assert_allclose(res.image.lo[0], lo, atol=1e-9)
            np.testing.assert_allclose(res.image.hi[0], hi, atol=1e-9)

    def test_dropped_region_returns_none(self):
        # read box pinned to a cell edge: the furthest-corner weight of the
        # adjacent cell vanishes, so that region must be dropped
        q = pixel_constraint_regions(
            (1.0, 3.0), (Interval(3.0, 3.0), Interval(3.0, 3.0)), 0.5
        )
        assert any(v is None for v in q.values())

    def test_unreachable_cells_absent(self):
        q = pixel_constraint_regions(
            (1.0, 1.0), (Interval(20.0, 21.0), Interval(20.0, 21.0)), 0.5
        )
        assert q == {}
