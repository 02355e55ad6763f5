"""Dataset container and a deterministic synthetic glyph corpus.

The synthetic corpus renders four stroke-glyph classes (plus, ring, slash,
tee) as 28x28 grayscale rasters with per-sample jitter in pose, stroke width,
and intensity, then stores them at 8-bit depth.  Statistics are chosen to
resemble handwritten-digit data: dark background and corners, bright strokes
about two pixels wide with short anti-aliasing ramps.  Sample ``i`` under
seed ``s`` is identical regardless of how many samples are requested, so
subsets drawn anywhere in the codebase agree.

Real IDX data can be substituted everywhere a dataset name is accepted; see
``classifier.load_mnist_idx`` and the CLI's ``--dataset`` option.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .imageops import Image

GLYPH_CLASSES = ("plus", "ring", "slash", "tee")

# skeleton primitives in a 28x28 design frame centered at 13.5
_PRIMS = {
    0: [("seg", 13.5, 6.0, 13.5, 21.0), ("seg", 6.0, 13.5, 21.0, 13.5)],
    1: [("circ", 13.5, 13.5, 6.2)],
    2: [("seg", 7.0, 20.0, 20.0, 7.0)],
    3: [("seg", 7.0, 7.5, 20.0, 7.5), ("seg", 13.5, 7.5, 13.5, 20.5)],
}

# edge ramp length in pixels; the main knob for interpolation-error scale
DEFAULT_EDGE = 0.55


@dataclass(frozen=True)
class Dataset:
    """Images (N, C, H, W) in [0, 1] with integer labels (N,)."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        imgs = np.asarray(self.images, dtype=np.float64)
        labs = np.asarray(self.labels, dtype=np.int64)
        if imgs.ndim != 4:
            raise DomainError(f"expected (N, C, H, W) images, got {imgs.shape}")
        if labs.shape != (imgs.shape[0],):
            raise DomainError("label count does not match image count")
        object.__setattr__(self, "images", imgs)
        object.__setattr__(self, "labels", labs)

    def __len__(self) -> int:
        return self.images.shape[0]

    def get(self, i: int) -> Image:
        return Image(self.images[i])

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.images[idx], self.labels[idx])

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self) else 0


def _seg_dist(px, py, x1, y1, x2, y2):
    vx, vy = x2 - x1, y2 - y1
    L2 = vx * vx + vy * vy
    t = np.clip(((px - x1) * vx + (py - y1) * vy) / L2, 0.0, 1.0)
    dx = px - (x1 + t * vx)
    dy = py - (y1 + t * vy)
    return np.hypot(dx, dy)


def _render(prims, theta, shift, scale, half_w, edge, intensity, size):
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    c = (size - 1) / 2.0
    ct, st = math.cos(theta), math.sin(theta)
    # primitives live in the 28x28 design frame; map them onto this canvas
    k = size / 28.0 * scale
    cref = 13.5

    def place(x, y):
        dx, dy = (x - cref) * k, (y - cref) * k
        return (c + ct * dx - st * dy + shift[0], c + st * dx + ct * dy + shift[1])

    dist = np.full((size, size), np.inf)
    for prim in prims:
        if prim[0] == "seg":
            (x1, y1) = place(prim[1], prim[2])
            (x2, y2) = place(prim[3], prim[4])
            d = _seg_dist(xs, ys, x1, y1, x2, y2)
        else:
            (cx, cy) = place(prim[1], prim[2])
            d = np.abs(np.hypot(xs - cx, ys - cy) - prim[3] * k)
        dist = np.minimum(dist, d)
    val = np.clip((half_w + edge - dist) / edge, 0.0, 1.0) * intensity
    return np.rint(val * 255.0) / 255.0


def synthetic_glyph(index: int, seed: int = 0, size: int = 28,
                    edge: float = DEFAULT_EDGE):
    """Render sample ``index`` of the corpus; returns (pixels (1,H,W), label)."""
    label = index % len(GLYPH_CLASSES)
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    theta = rng.uniform(-0.17, 0.17)
    shift = rng.uniform(-1.4, 1.4, size=2)
    scale = rng.uniform(0.9, 1.1)
    half_w = rng.uniform(0.85, 1.2)
    intensity = rng.uniform(0.85, 1.0)
    px = _render(_PRIMS[label], theta, shift, scale, half_w, edge, intensity, size)
    return px[None, :, :], label


def synthetic_glyphs(n: int, seed: int = 0, size: int = 28,
                     edge: float = DEFAULT_EDGE) -> Dataset:
    if n < 0:
        raise DomainError("dataset size must be nonnegative")
    images = np.zeros((n, 1, size, size))
    labels = np.zeros(n, dtype=np.int64)
    for i in range(n):
        images[i], labels[i] = synthetic_glyph(i, seed=seed, size=size, edge=edge)
    return Dataset(images, labels)
