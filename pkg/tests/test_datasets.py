"""Synthetic corpus tests: determinism, value grid, container invariants."""

import numpy as np
import pytest

from geosmooth.datasets import Dataset, synthetic_glyph, synthetic_glyphs
from geosmooth.errors import DomainError
from geosmooth.imageops import Image


class TestSyntheticGlyphs:
    def test_sample_independent_of_corpus_size(self):
        small = synthetic_glyphs(4, seed=0, size=16)
        large = synthetic_glyphs(12, seed=0, size=16)
        np.testing.assert_array_equal(small.images, large.images[:4])
        np.testing.assert_array_equal(small.labels, large.labels[:4])

    def test_deterministic_per_seed(self):
        a, la = synthetic_glyph(7, seed=3, size=16)
        b, lb = synthetic_glyph(7, seed=3, size=16)
        c, _ = synthetic_glyph(7, seed=4, size=16)
        np.testing.assert_array_equal(a, b)
        assert la == lb
        assert np.abs(a - c).max() > 0.0

    def test_labels_cycle(self):
        ds = synthetic_glyphs(10, seed=0, size=16)
        assert ds.labels.tolist() == [i % 4 for i in range(10)]

    def test_values_on_8bit_grid(self):
        ds = synthetic_glyphs(6, seed=0, size=16)
        assert ds.images.min() >= 0.0 and ds.images.max() <= 1.0
        steps = ds.images * 255.0
        np.testing.assert_allclose(steps, np.rint(steps), atol=1e-9)

    def test_shapes(self):
        ds = synthetic_glyphs(3, seed=0, size=20)
        assert ds.images.shape == (3, 1, 20, 20)
        assert ds.labels.shape == (3,)

    def test_classes_are_distinct(self):
        ds = synthetic_glyphs(4, seed=0, size=16)
        flat = ds.images.reshape(4, -1)
        for i in range(4):
            for j in range(i + 1, 4):
                assert np.linalg.norm(flat[i] - flat[j]) > 0.5

    def test_negative_size_rejected(self):
        with pytest.raises(DomainError):
            synthetic_glyphs(-1)


class TestDatasetContainer:
    def test_get_returns_image(self):
        ds = synthetic_glyphs(2, seed=0, size=16)
        img = ds.get(1)
        assert isinstance(img, Image)
        np.testing.assert_array_equal(img.pixels, ds.images[1])

    def test_subset(self):
        ds = synthetic_glyphs(6, seed=0, size=16)
        sub = ds.subset([4, 1])
        assert len(sub) == 2
        np.testing.assert_array_equal(sub.images[0], ds.images[4])
        assert sub.labels.tolist() == [ds.labels[4], ds.labels[1]]

    def test_num_classes(self):
        ds = synthetic_glyphs(6, seed=0, size=16)
        assert ds.num_classes == 4
        empty = Dataset(np.zeros((0, 1, 4, 4)), np.zeros(0, dtype=np.int64))
        assert empty.num_classes == 0

    def test_validation(self):
        with pytest.raises(DomainError):
            Dataset(np.zeros((2, 4, 4)), np.zeros(2, dtype=np.int64))
        with pytest.raises(DomainError):
            Dataset(np.zeros((2, 1, 4, 4)), np.zeros(3, dtype=np.int64))
