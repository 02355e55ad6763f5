"""Images, interval images, geometric transforms, and preprocessing.

Concrete images hold float64 pixels in [0, 1] laid out channel-first
``(C, H, W)``.  Interval images hold per-pixel lower/upper bounds with the
same layout and represent the set of concrete images between the bounds.

``apply_transform`` resamples an image under a rotation, translation, or
(on 1-D signals) volume change; ``apply_transform_interval`` is its sound
set-valued counterpart over a whole parameter box: each output pixel joins a
standard interval evaluation of the bilinear form over every interpolation
cell the read-coordinate range can touch.  Positions outside the raster read
zero in both variants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError, FormatError
from .geometry import GridGeometry, ParamBox, read_bounds, read_coords

QUANT_STEP = 1.0 / 510.0  # half an 8-bit quantization bin

_VALUE_TOL = 1e-9


def _as_chw(pixels) -> np.ndarray:
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3:
        raise DomainError(f"expected 2-D or 3-D pixel array, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


@dataclass(frozen=True)
class Image:
    """Concrete raster image; pixels are float64 in [0, 1], layout (C, H, W)."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = _as_chw(self.pixels)
        if not np.all(np.isfinite(arr)):
            raise DomainError("image pixels must be finite")
        if arr.min() < -_VALUE_TOL or arr.max() > 1.0 + _VALUE_TOL:
            raise DomainError("image pixels must lie in [0, 1]")
        arr = np.clip(arr, 0.0, 1.0)
        GridGeometry(arr.shape[2], arr.shape[1], arr.shape[0])
        object.__setattr__(self, "pixels", arr)

    @property
    def geometry(self) -> GridGeometry:
        c, h, w = self.pixels.shape
        return GridGeometry(w, h, c)

    def __eq__(self, other):
        return isinstance(other, Image) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True)
class IntervalImage:
    """Per-pixel bounds on an unknown image; lo <= hi, both within [0, 1]."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _as_chw(self.lo)
        hi = _as_chw(self.hi)
        if lo.shape != hi.shape:
            raise DomainError("bound arrays must share a shape")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise DomainError("bounds must be finite")
        if np.any(lo > hi + _VALUE_TOL):
            raise DomainError("lower bound exceeds upper bound")
        GridGeometry(lo.shape[2], lo.shape[1], lo.shape[0])
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", np.maximum(hi, lo))

    @classmethod
    def degenerate(cls, img: Image) -> "IntervalImage":
        return cls(img.pixels.copy(), img.pixels.copy())

    @property
    def geometry(self) -> GridGeometry:
        c, h, w = self.lo.shape
        return GridGeometry(w, h, c)

    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, img: Image, tol: float = 0.0) -> bool:
        return bool(
            np.all(self.lo - tol <= img.pixels) and np.all(img.pixels <= self.hi + tol)
        )

    def encloses(self, other: "IntervalImage", tol: float = 0.0) -> bool:
        return bool(
            np.all(self.lo - tol <= other.lo) and np.all(other.hi <= self.hi + tol)
        )

    def midpoint(self) -> Image:
        return Image(0.5 * (self.lo + self.hi))


# ---------------------------------------------------------------------------
# interpolation and spatial transforms


def bilinear_interpolate(img: Image, x: float, y: float):
    """Bilinear read of one position; zero outside the raster.

    Returns a scalar for single-channel images, else a (C,) array.
    """
    xs = np.array([[float(x)]])
    ys = np.array([[float(y)]])
    vals = _kernels.warp_concrete(img.pixels, xs, ys)[:, 0, 0]
    return float(vals[0]) if vals.shape[0] == 1 else vals


def _check_spatial(kind, dim_have):
    if kind not in ("rotation", "translation"):
        raise DomainError(f"{kind!r} is not a spatial transform")
    from .geometry import PARAM_DIM

    if dim_have != PARAM_DIM[kind]:
        raise DomainError(
            f"{kind} expects {PARAM_DIM[kind]} parameter(s), got {dim_have}"
        )


def apply_transform(img: Image, kind: str, gamma) -> Image:
    """Resample ``img`` under the transform with concrete parameters."""
    g = np.atleast_1d(np.asarray(gamma, dtype=np.float64))
    _check_spatial(kind, g.shape[0])
    gx, gy = img.geometry.coord_grids()
    xs, ys = read_coords(kind, g, gx, gy)
    return Image(_kernels.warp_concrete(img.pixels, xs, ys))


def apply_transform_interval(img, kind: str, box: ParamBox) -> IntervalImage:
    """Sound enclosure of ``apply_transform`` over every parameter in ``box``.

    Accepts a concrete or an interval image; for an interval input the result
    encloses the transform of every member.
    """
    _check_spatial(kind, box.dim)
    if isinstance(img, Image):
        in_lo = img.pixels
        in_hi = img.pixels
        geom = img.geometry
    else:
        in_lo = img.lo
        in_hi = img.hi
        geom = img.geometry
    gx, gy = geom.coord_grids()
    xlo, xhi, ylo, yhi = read_bounds(kind, box, gx, gy)
    out_lo, out_hi = _kernels.warp_interval(in_lo, in_hi, xlo, xhi, ylo, yhi)
    return IntervalImage(out_lo, out_hi)


# ---------------------------------------------------------------------------
# volume transform on 1-D signals (composes additively in dB)


def volume_scale(signal, beta_db: float) -> np.ndarray:
    """Scale a waveform by ``beta_db`` decibels: x -> 10**(beta/20) * x."""
    sig = np.asarray(signal, dtype=np.float64)
    return (10.0 ** (float(beta_db) / 20.0)) * sig


# ---------------------------------------------------------------------------
# preprocessing: vignettes, blur, quantization


def vignette_mask(geom: GridGeometry, mode: str, margin_px: float = 0.0) -> np.ndarray:
    """Boolean keep-mask.  ``circular`` keeps the inscribed disk of radius
    ``min(W, H) - 1`` grid units; ``rectangular`` drops ``margin_px`` pixels
    from every border (rounded outward)."""
    gx, gy = geom.coord_grids()
    if mode == "circular":
        r = min(geom.width, geom.height) - 1
        return gx * gx + gy * gy <= float(r * r)
    if mode == "rectangular":
        m = int(math.ceil(margin_px - 1e-12))
        if m < 0:
            raise DomainError("vignette margin must be nonnegative")
        keep = np.zeros((geom.height, geom.width), dtype=bool)
        if 2 * m < geom.width and 2 * m < geom.height:
            keep[m : geom.height - m, m : geom.width - m] = True
        return keep
    raise DomainError(f"unknown vignette mode {mode!r}")


def apply_vignette(img, mode: str, margin_px: float = 0.0):
    mask = vignette_mask(img.geometry, mode, margin_px)
    if isinstance(img, Image):
        return Image(img.pixels * mask[None, :, :])
    return IntervalImage(img.lo * mask[None, :, :], img.hi * mask[None, :, :])


def gaussian_kernel(sigma: float, size: int) -> np.ndarray:
    """Gaussian filter sampled at entry centers and normalized to sum 1."""
    if size < 1 or size % 2 == 0:
        raise DomainError("blur size must be a positive odd integer")
    if sigma <= 0:
        raise DomainError("blur sigma must be positive")
    d = np.arange(size, dtype=np.float64) - size // 2
    g = np.exp(-(d * d) / (2.0 * sigma * sigma))
    kern = np.outer(g, g)
    return kern / kern.sum()


def gaussian_blur(img, sigma: float, size: int):
    """Zero-padded Gaussian blur; bounds of an interval image blur
    independently (all filter weights are nonnegative)."""
    kern = gaussian_kernel(sigma, size)
    if isinstance(img, Image):
        return Image(np.clip(_kernels.conv2d(img.pixels, kern), 0.0, 1.0))
    lo = np.clip(_kernels.conv2d(img.lo, kern), 0.0, 1.0)
    hi = np.clip(_kernels.conv2d(img.hi, kern), 0.0, 1.0)
    return IntervalImage(lo, hi)


def quantize(img: Image) -> Image:
    """Round to the nearest 8-bit level (the storage error is < 1/510)."""
    return Image(np.clip(np.rint(img.pixels * 255.0) / 255.0, 0.0, 1.0))


def quantize_widen(img: IntervalImage) -> IntervalImage:
    """Widen bounds by the worst-case 8-bit rounding error and clamp."""
    return IntervalImage(
        np.clip(img.lo - QUANT_STEP, 0.0, 1.0),
        np.clip(img.hi + QUANT_STEP, 0.0, 1.0),
    )


@dataclass(frozen=True)
class PreprocessConfig:
    """Classifier-side preprocessing: vignette first, then blur.

    ``quantize`` describes the attacker-side 8-bit storage of transformed
    images; it is consumed by the error-bound and inverse machinery, not
    applied here.
    """

    vignette: str | None = None  # None | "circular" | "rectangular"
    vignette_margin: float = 0.0
    blur_sigma: float | None = None
    blur_size: int = 5
    quantize: bool = False

    def describe(self) -> dict:
        return {
            "vignette": self.vignette,
            "vignette_margin": self.vignette_margin,
            "blur_sigma": self.blur_sigma,
            "blur_size": self.blur_size,
            "quantize": self.quantize,
        }


def apply_preprocess(img, cfg: PreprocessConfig):
    """Apply the configured vignette and blur to a concrete or interval image."""
    out = img
    if cfg.vignette is not None:
        out = apply_vignette(out, cfg.vignette, cfg.vignette_margin)
    if cfg.blur_sigma is not None:
        out = gaussian_blur(out, cfg.blur_sigma, cfg.blur_size)
    return out


# ---------------------------------------------------------------------------
# PNG I/O (8-bit grayscale or RGB)


def write_png(path, img: Image):
    from PIL import Image as PILImage

    arr = np.rint(img.pixels * 255.0).astype(np.uint8)
    if arr.shape[0] == 1:
        pil = PILImage.fromarray(arr[0], mode="L")
    elif arr.shape[0] == 3:
        pil = PILImage.fromarray(np.moveaxis(arr, 0, 2), mode="RGB")
    else:
        raise DomainError("PNG export supports 1 or 3 channels")
    pil.save(path, format="PNG")


def read_png(path) -> Image:
    from PIL import Image as PILImage

    with PILImage.open(path) as pil:
        if pil.mode not in ("L", "RGB"):
            pil = pil.convert("RGB" if pil.mode in ("RGBA", "P") else "L")
        arr = np.asarray(pil, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        chw = arr[None, :, :]
    else:
        chw = np.moveaxis(arr, 2, 0)
    if chw.shape[1] % 2 or chw.shape[2] % 2:
        raise FormatError(f"raster must have even dimensions, got {chw.shape}", path)
    return Image(chw)
