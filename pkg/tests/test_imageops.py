"""Image containers, warps, preprocessing: validation plus soundness.

The central property: every concrete operation lands inside its interval
counterpart, including after blur and 8-bit widening.
"""

import numpy as np
import pytest
from scipy.ndimage import rotate as ndi_rotate

from geosmooth.errors import DomainError, FormatError
from geosmooth.geometry import ParamBox
from geosmooth.imageops import (
    Image,
    IntervalImage,
    PreprocessConfig,
    apply_preprocess,
    apply_transform,
    apply_transform_interval,
    apply_vignette,
    bilinear_interpolate,
    gaussian_blur,
    gaussian_kernel,
    quantize,
    quantize_widen,
    read_png,
    vignette_mask,
    volume_scale,
    write_png,
)


def rand_image(rng, h=8, w=8, c=1):
    return Image(rng.random((c, h, w)))


class TestImage:
    def test_clips_rounding_noise(self):
        px = np.full((1, 2, 2), 1.0 + 5e-10)
        px[0, 0, 0] = -5e-10
        img = Image(px)
        assert img.pixels.max() <= 1.0 and img.pixels.min() >= 0.0

    def test_rejects_out_of_range(self):
        with pytest.raises(DomainError):
            Image(np.full((1, 2, 2), 1.5))

    def test_accepts_hw_and_chw(self):
        a = Image(np.zeros((4, 4)))
        assert a.pixels.shape == (1, 4, 4)

    def test_odd_size_rejected(self):
        with pytest.raises(DomainError):
            Image(np.zeros((1, 5, 4)))


class TestIntervalImage:
    def test_ordering(self):
        with pytest.raises(DomainError):
            IntervalImage(np.ones((1, 2, 2)), np.zeros((1, 2, 2)))

    def test_degenerate_contains_self(self):
        rng = np.random.default_rng(0)
        img = rand_image(rng)
        assert IntervalImage.degenerate(img).contains(img)

    def test_contains_tolerance(self):
        img = Image(np.full((1, 2, 2), 0.5))
        box = IntervalImage(np.full((1, 2, 2), 0.500001), np.full((1, 2, 2), 0.6))
        assert not box.contains(img)
        assert box.contains(img, tol=1e-5)

    def test_encloses(self):
        lo, hi = np.zeros((1, 2, 2)), np.ones((1, 2, 2))
        outer = IntervalImage(lo, hi)
        inner = IntervalImage(lo + 0.1, hi - 0.1)
        assert outer.encloses(inner)
        assert not inner.encloses(outer)


class TestBilinear:
    def test_grid_points_exact(self):
        rng = np.random.default_rng(1)
        img = rand_image(rng, 6, 6)
        # odd-integer coordinates address pixels directly
        assert bilinear_interpolate(img, -5.0, -5.0) == pytest.approx(
            float(img.pixels[0, 0, 0])
        )
        assert bilinear_interpolate(img, 3.0, 1.0) == pytest.approx(
            float(img.pixels[0, 3, 4])
        )

    def test_midpoint_average(self):
        px = np.zeros((1, 2, 2))
        px[0, 0, 0], px[0, 0, 1] = 0.2, 0.8
        img = Image(px)
        # halfway between the two top pixels along x
        assert bilinear_interpolate(img, 0.0, -1.0) == pytest.approx(0.5)


class TestApplyTransform:
    def test_zero_rotation_identity(self):
        rng = np.random.default_rng(2)
        img = rand_image(rng, 10, 10)
        out = apply_transform(img, "rotation", np.zeros(1))
        np.testing.assert_allclose(out.pixels, img.pixels, atol=1e-12)

    def test_zero_translation_identity(self):
        rng = np.random.default_rng(3)
        img = rand_image(rng, 6, 8)
        out = apply_transform(img, "translation", np.zeros(2))
        np.testing.assert_allclose(out.pixels, img.pixels, atol=1e-12)

    def test_full_pixel_translation_shifts(self):
        rng = np.random.default_rng(4)
        img = rand_image(rng, 6, 6)
        out = apply_transform(img, "translation", np.array([1.0, 0.0]))
        np.testing.assert_allclose(
            out.pixels[:, :, 1:], img.pixels[:, :, :-1], atol=1e-12
        )
        assert np.allclose(out.pixels[:, :, 0], 0.0)

    def test_rotation_against_scipy(self):
        rng = np.random.default_rng(5)
        img = rand_image(rng, 16, 16)
        deg = 20.0
        ours = apply_transform(img, "rotation", np.array([deg])).pixels[0]
        # scipy rotates about the same even-size center with order-1
        # interpolation; interior pixels must agree to rounding error
        ref = ndi_rotate(img.pixels[0], deg, reshape=False, order=1, cval=0.0)
        assert np.abs(ours[4:12, 4:12] - ref[4:12, 4:12]).max() < 1e-12

    def test_volume_scale_rejected_as_spatial(self):
        rng = np.random.default_rng(6)
        with pytest.raises(DomainError):
            apply_transform(rand_image(rng), "volume_scale", np.zeros(1))

    def test_param_dim_checked(self):
        rng = np.random.default_rng(7)
        with pytest.raises(DomainError):
            apply_transform(rand_image(rng), "rotation", np.zeros(2))


class TestApplyTransformInterval:
    @pytest.mark.parametrize("kind,dim", [("rotation", 1), ("translation", 2)])
    def test_concrete_inside(self, kind, dim):
        rng = np.random.default_rng(8)
        for _ in range(15):
            img = rand_image(rng, 8, 8)
            center = rng.uniform(-20, 20, size=dim)
            half = rng.uniform(0, 3, size=dim)
            box = ParamBox(tuple(center - half), tuple(center + half))
            bounds = apply_transform_interval(img, kind, box)
            for gamma in box.sample_uniform(rng, 10):
                assert bounds.contains(apply_transform(img, kind, gamma))

    def test_interval_input_monotone(self):
        # widening the input must widen (or keep) the output
        rng = np.random.default_rng(9)
        img = rand_image(rng, 8, 8)
        narrow = IntervalImage.degenerate(img)
        wide = IntervalImage(
            np.clip(img.pixels - 0.05, 0, 1), np.clip(img.pixels + 0.05, 0, 1)
        )
        box = ParamBox((-5.0,), (5.0,))
        out_n = apply_transform_interval(narrow, "rotation", box)
        out_w = apply_transform_interval(wide, "rotation", box)
        assert out_w.encloses(out_n, tol=1e-12)


class TestVolumeScale:
    def test_zero_db_identity(self):
        sig = np.array([0.1, -0.5, 0.9])
        np.testing.assert_allclose(volume_scale(sig, 0.0), sig)

    def test_twenty_db_is_factor_ten(self):
        sig = np.array([0.05])
        np.testing.assert_allclose(volume_scale(sig, 20.0), np.array([0.5]))

    def test_composes_exactly(self):
        # unlike spatial warps, volume scaling composes with no residual
        rng = np.random.default_rng(10)
        sig = rng.uniform(-1, 1, size=64)
        a = volume_scale(volume_scale(sig, 3.7), -1.2)
        b = volume_scale(sig, 2.5)
        np.testing.assert_allclose(a, b, rtol=1e-12)


class TestVignette:
    def test_circular_kills_corners_keeps_center(self):
        from geosmooth.geometry import GridGeometry

        g = GridGeometry(28, 28, 1)
        m = vignette_mask(g, "circular")
        assert m[0, 0] == 0.0 and m[0, -1] == 0.0
        assert m[14, 14] == 1.0

    def test_idempotent(self):
        rng = np.random.default_rng(11)
        img = rand_image(rng, 16, 16)
        once = apply_vignette(img, "circular")
        twice = apply_vignette(once, "circular")
        np.testing.assert_array_equal(once.pixels, twice.pixels)

    def test_rotation_interior_stable(self):
        # away from the mask edge (one interpolation cell, 2*sqrt(2) in
        # coordinates), rotating a masked image equals rotating and
        # re-masking; interpolation can only bleed across the edge ring
        from geosmooth.geometry import GridGeometry

        rng = np.random.default_rng(11)
        img = rand_image(rng, 16, 16)
        masked = apply_vignette(img, "circular")
        rot = apply_transform(masked, "rotation", np.array([30.0]))
        remasked = apply_vignette(rot, "circular")
        g = GridGeometry(16, 16, 1)
        gx, gy = g.coord_grids()
        interior = np.sqrt(gx * gx + gy * gy) <= 15.0 - 2.9
        diff = np.abs(rot.pixels - remasked.pixels)[0]
        assert diff[interior].max() < 1e-12

    def test_rectangular_margin(self):
        from geosmooth.geometry import GridGeometry

        g = GridGeometry(8, 8, 1)
        m = vignette_mask(g, "rectangular", margin_px=2.0)
        assert m[0, 0] == 0.0 and m[1, 1] == 0.0
        assert m[2, 2] == 1.0 and m[4, 4] == 1.0

    def test_unknown_mode(self):
        from geosmooth.geometry import GridGeometry

        with pytest.raises(DomainError):
            vignette_mask(GridGeometry(4, 4, 1), "diamond")


class TestGaussianBlur:
    def test_kernel_normalized_symmetric(self):
        k = gaussian_kernel(2.0, 5)
        assert k.shape == (5, 5)
        assert k.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(k, k[::-1, ::-1])

    def test_even_size_rejected(self):
        with pytest.raises(DomainError):
            gaussian_kernel(1.0, 4)

    def test_blur_preserves_constant(self):
        img = Image(np.full((1, 8, 8), 0.5))
        out = gaussian_blur(img, 2.0, 5)
        # zero padding darkens edges; interior stays at the constant
        assert out.pixels[0, 4, 4] == pytest.approx(0.5, abs=1e-9)

    def test_interval_blur_contains_concrete(self):
        rng = np.random.default_rng(12)
        lo = rng.random((1, 8, 8)) * 0.5
        hi = np.minimum(lo + 0.3, 1.0)
        bounds = gaussian_blur(IntervalImage(lo, hi), 2.0, 5)
        for _ in range(10):
            img = Image(rng.uniform(lo, hi))
            assert bounds.contains(gaussian_blur(img, 2.0, 5), tol=1e-12)


class TestQuantize:
    def test_byte_grid(self):
        rng = np.random.default_rng(13)
        img = rand_image(rng)
        q = quantize(img)
        np.testing.assert_allclose(q.pixels * 255.0, np.rint(q.pixels * 255.0), atol=1e-9)
        assert np.abs(q.pixels - img.pixels).max() <= 0.5 / 255.0 + 1e-12

    def test_widen_contains_quantization(self):
        rng = np.random.default_rng(14)
        for _ in range(10):
            img = rand_image(rng)
            widened = quantize_widen(IntervalImage.degenerate(img))
            assert widened.contains(quantize(img), tol=0.0)

    def test_widen_stays_in_unit_range(self):
        img = Image(np.ones((1, 4, 4)))
        w = quantize_widen(IntervalImage.degenerate(img))
        assert np.all(w.hi <= 1.0) and np.all(w.lo >= 0.0)


class TestPreprocess:
    def test_pipeline_order_and_types(self):
        rng = np.random.default_rng(15)
        img = rand_image(rng, 8, 8)
        cfg = PreprocessConfig(vignette="circular", blur_sigma=1.0, blur_size=3)
        out = apply_preprocess(img, cfg)
        assert isinstance(out, Image)
        manual = gaussian_blur(apply_vignette(img, "circular"), 1.0, 3)
        np.testing.assert_allclose(out.pixels, manual.pixels, atol=1e-12)

    def test_interval_input(self):
        rng = np.random.default_rng(16)
        img = rand_image(rng, 8, 8)
        cfg = PreprocessConfig(vignette="circular", blur_sigma=1.0, blur_size=3)
        iv = apply_preprocess(IntervalImage.degenerate(img), cfg)
        assert iv.contains(apply_preprocess(img, cfg), tol=1e-12)

    def test_noop_config(self):
        rng = np.random.default_rng(17)
        img = rand_image(rng)
        out = apply_preprocess(img, PreprocessConfig())
        np.testing.assert_array_equal(out.pixels, img.pixels)

    def test_describe_round_trips_json(self):
        import json

        cfg = PreprocessConfig(vignette="circular", blur_sigma=2.0, quantize=True)
        assert json.loads(json.dumps(cfg.describe())) == cfg.describe()


class TestPng:
    def test_round_trip_gray(self, tmp_path):
        rng = np.random.default_rng(18)
        img = quantize(rand_image(rng, 8, 8))
        p = tmp_path / "x.png"
        write_png(p, img)
        back = read_png(p)
        np.testing.assert_allclose(back.pixels, img.pixels, atol=1e-9)

    def test_round_trip_rgb(self, tmp_path):
        rng = np.random.default_rng(19)
        img = quantize(rand_image(rng, 8, 8, c=3))
        p = tmp_path / "x.png"
        write_png(p, img)
        back = read_png(p)
        np.testing.assert_allclose(back.pixels, img.pixels, atol=1e-9)

    def test_odd_dims_rejected(self, tmp_path):
        from PIL import Image as PILImage

        p = tmp_path / "odd.png"
        PILImage.new("L", (5, 4)).save(p)
        with pytest.raises(FormatError):
            read_png(p)
