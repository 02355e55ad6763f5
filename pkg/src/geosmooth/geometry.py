"""Raster geometry, transform descriptors, and coordinate-range math.

Pixels of a ``width x height`` raster live on the odd integer grid: array
column ``a`` has x-coordinate ``2a - (width-1)`` and array row ``b`` has
y-coordinate ``2b - (height-1)``, so neighboring pixels are 2 grid units
apart and the raster is centered on the origin.  Interpolation cells are the
2x2-unit squares between adjacent grid points.

Transforms are described by where an *output* position reads from in the
*input*: rotation by an angle g (degrees) reads position
``(x cos g - y sin g, x sin g + y cos g)``, and translation by ``(g1, g2)``
pixels reads ``(x - 2 g1, y - 2 g2)``.  The interval variants below return
coordinate ranges that are exact at the parameter endpoints (they evaluate
the same floating point expression as the pointwise map) and include the
trigonometric extrema whenever the angle range sweeps past them, so the
enclosure stays sound for arbitrarily wide angle ranges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .interval import Interval

TWO_PI = 2.0 * math.pi

KINDS = ("rotation", "translation", "volume_scale")
PARAM_DIM = {"rotation": 1, "translation": 2, "volume_scale": 1}

# Absolute slack added when testing whether an angle range reaches a
# sin/cos extremum, and when inflating the amplitude bound there.  Triggering
# the extremum branch too eagerly only widens the enclosure.
_ANGLE_MARGIN = 1e-9
_AMP_REL = 1e-13
_AMP_ABS = 1e-12


@dataclass(frozen=True, slots=True)
class TransformSpec:
    """A transform family; ``kind`` fixes the parameter dimension."""

    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown transform kind {self.kind!r}")

    @property
    def param_dim(self) -> int:
        return PARAM_DIM[self.kind]


@dataclass(frozen=True)
class ParamBox:
    """Axis-aligned box of transform parameters (degenerate boxes allowed).

    ``lo`` and ``hi`` are tuples of per-dimension endpoints.  Rotation
    parameters are degrees, translation parameters are pixels, volume
    parameters are decibels.
    """

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise DomainError("parameter box endpoints must share a nonzero length")
        for a, b in zip(lo, hi):
            if not (math.isfinite(a) and math.isfinite(b)) or a > b:
                raise DomainError(f"invalid parameter range [{a}, {b}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def symmetric(cls, half_width, dim=1) -> "ParamBox":
        h = float(half_width)
        if h < 0:
            raise DomainError("half width must be nonnegative")
        return cls((-h,) * dim, (h,) * dim)

    @classmethod
    def point(cls, values) -> "ParamBox":
        vals = tuple(float(v) for v in np.atleast_1d(values))
        return cls(vals, vals)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def widths(self) -> tuple:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    def contains(self, gamma) -> bool:
        g = np.atleast_1d(gamma)
        return len(g) == self.dim and all(
            a <= v <= b for v, a, b in zip(g, self.lo, self.hi)
        )

    def encloses(self, other: "ParamBox") -> bool:
        return other.dim == self.dim and all(
            a <= c and d <= b
            for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def circumradius(self) -> float:
        """Largest Euclidean norm over the box (attained at a corner)."""
        return math.sqrt(
            sum(max(a * a, b * b) for a, b in zip(self.lo, self.hi))
        )

    def shift(self, offset) -> "ParamBox":
        off = tuple(float(v) for v in np.atleast_1d(offset))
        if len(off) != self.dim:
            raise DomainError("offset dimension mismatch")
        return ParamBox(
            tuple(a + o for a, o in zip(self.lo, off)),
            tuple(b + o for b, o in zip(self.hi, off)),
        )

    def sample_uniform(self, rng, n=None):
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        if n is None:
            return rng.uniform(lo, hi)
        return rng.uniform(lo, hi, size=(n, self.dim))

    def split(self, n_per_dim: int):
        """Partition into ``n_per_dim**dim`` equal axis-aligned sub-boxes."""
        if n_per_dim < 1:
            raise DomainError("n_per_dim must be >= 1")
        edges = [
            np.linspace(a, b, n_per_dim + 1) for a, b in zip(self.lo, self.hi)
        ]
        out = []
        idx = np.ndindex(*([n_per_dim] * self.dim))
        for multi in idx:
            lo = tuple(edges[d][k] for d, k in enumerate(multi))
            hi = tuple(edges[d][k + 1] for d, k in enumerate(multi))
            out.append(ParamBox(lo, hi))
        return out


@dataclass(frozen=True, slots=True)
class GridGeometry:
    """Raster dimensions; width and height must be positive and even."""

    width: int
    height: int
    channels: int = 1

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.channels <= 0:
            raise DomainError("raster dimensions must be positive")
        if self.width % 2 or self.height % 2:
            raise DomainError("raster width and height must be even")

    def coords_x(self) -> np.ndarray:
        return 2.0 * np.arange(self.width) - (self.width - 1)

    def coords_y(self) -> np.ndarray:
        return 2.0 * np.arange(self.height) - (self.height - 1)

    def coord_grids(self):
        gx, gy = np.meshgrid(self.coords_x(), self.coords_y())
        return gx, gy


# ---------------------------------------------------------------------------
# pointwise coordinate maps (radians for rotation internals)


def rotation_read_coords(gx, gy, angle_rad):
    c = math.cos(angle_rad)
    s = math.sin(angle_rad)
    return gx * c - gy * s, gx * s + gy * c


def translation_read_coords(gx, gy, t1, t2):
    return gx - 2.0 * t1, gy - 2.0 * t2


# ---------------------------------------------------------------------------
# interval coordinate maps


def _contains_angle(u, v, target):
    """Elementwise: does [u - m, v + m] contain target modulo 2*pi?"""
    k = np.ceil((u - _ANGLE_MARGIN - target) / TWO_PI)
    return target + TWO_PI * k <= v + _ANGLE_MARGIN


def rotation_read_bounds(gx, gy, ang_lo_rad, ang_hi_rad):
    """Coordinate ranges of the rotation read map over an angle range.

    Endpoint values reuse the pointwise expression bit-for-bit, so a
    degenerate range reproduces ``rotation_read_coords`` exactly.  When the
    range sweeps a trig extremum the corresponding bound is replaced by the
    (slightly inflated) amplitude.
    """
    gx = np.asarray(gx, dtype=np.float64)
    gy = np.asarray(gy, dtype=np.float64)
    ca, sa = math.cos(ang_lo_rad), math.sin(ang_lo_rad)
    cb, sb = math.cos(ang_hi_rad), math.sin(ang_hi_rad)
    x_a = gx * ca - gy * sa
    x_b = gx * cb - gy * sb
    y_a = gx * sa + gy * ca
    y_b = gx * sb + gy * cb
    xlo = np.minimum(x_a, x_b)
    xhi = np.maximum(x_a, x_b)
    ylo = np.minimum(y_a, y_b)
    yhi = np.maximum(y_a, y_b)

    amp = np.hypot(gx, gy) * (1.0 + _AMP_REL) + _AMP_ABS
    phi = np.arctan2(gy, gx)
    u = ang_lo_rad + phi
    v = ang_hi_rad + phi
    # x(t) = |p| cos(t + phi), y(t) = |p| sin(t + phi)
    xhi = np.where(_contains_angle(u, v, 0.0), amp, xhi)
    xlo = np.where(_contains_angle(u, v, math.pi), -amp, xlo)
    yhi = np.where(_contains_angle(u, v, 0.5 * math.pi), amp, yhi)
    ylo = np.where(_contains_angle(u, v, -0.5 * math.pi), -amp, ylo)
    return xlo, xhi, ylo, yhi


def translation_read_bounds(gx, gy, t1_lo, t1_hi, t2_lo, t2_hi):
    gx = np.asarray(gx, dtype=np.float64)
    gy = np.asarray(gy, dtype=np.float64)
    return (
        gx - 2.0 * t1_hi,
        gx - 2.0 * t1_lo,
        gy - 2.0 * t2_hi,
        gy - 2.0 * t2_lo,
    )


def read_bounds(kind, box: ParamBox, gx, gy):
    """Dispatch to the interval read map of a spatial transform kind."""
    if kind == "rotation":
        return rotation_read_bounds(
            gx, gy, math.radians(box.lo[0]), math.radians(box.hi[0])
        )
    if kind == "translation":
        return translation_read_bounds(
            gx, gy, box.lo[0], box.hi[0], box.lo[1], box.hi[1]
        )
    raise DomainError(f"{kind!r} is not a spatial transform")


def read_coords(kind, gamma, gx, gy):
    g = np.atleast_1d(np.asarray(gamma, dtype=np.float64))
    if kind == "rotation":
        return rotation_read_coords(gx, gy, math.radians(g[0]))
    if kind == "translation":
        return translation_read_coords(gx, gy, g[0], g[1])
    raise DomainError(f"{kind!r} is not a spatial transform")


def inverse_coord_map(kind, box: ParamBox, point):
    """Interval enclosure of the read (inverse) map of one output position.

    Returns a pair of ``Interval`` objects, one per coordinate axis.
    """
    gx = np.asarray([float(point[0])])
    gy = np.asarray([float(point[1])])
    xlo, xhi, ylo, yhi = read_bounds(kind, box, gx, gy)
    return Interval(float(xlo[0]), float(xhi[0])), Interval(float(ylo[0]), float(yhi[0]))
