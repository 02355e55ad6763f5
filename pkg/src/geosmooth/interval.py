"""Outward-rounded closed interval arithmetic.

An interval ``[lo, hi]`` with ``lo <= hi`` represents the set of reals between
its endpoints, inclusive.  The empty set is a first-class value, ``EMPTY``,
rather than an encoding such as ``lo > hi``; arithmetic absorbs it and set
operations treat it as the bottom element of the lattice.

Soundness convention: every arithmetic operation evaluates endpoint formulas
in ordinary round-to-nearest floating point and then widens the result
outward by 4 ULPs relative to each endpoint's magnitude.  That over-covers
the worst-case rounding of the endpoint computation itself, so the returned
interval always contains the exact real result of the operation applied to
any members of the operands.  Set operations (join, intersect, containment)
are exact and are not widened.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "Interval",
    "EMPTY",
    "interval_norm2",
]

_WIDEN_STEPS = 4


def _down(x: float) -> float:
    for _ in range(_WIDEN_STEPS):
        x = math.nextafter(x, -math.inf)
    return x


def _up(x: float) -> float:
    for _ in range(_WIDEN_STEPS):
        x = math.nextafter(x, math.inf)
    return x


@dataclass(frozen=True, slots=True)
class Interval:
    """Closed interval with outward-rounded arithmetic.

    Use the module-level ``EMPTY`` singleton for the empty set; constructing
    an interval with ``lo > hi`` raises ``DomainError``.
    """

    lo: float
    hi: float
    empty: bool = False

    def __post_init__(self):
        if self.empty:
            return
        lo = float(self.lo)
        hi = float(self.hi)
        if math.isnan(lo) or math.isnan(hi) or lo > hi:
            from .errors import DomainError

            raise DomainError(f"invalid interval endpoints [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    # -- set queries ----------------------------------------------------

    @property
    def is_empty(self) -> bool:
        return self.empty

    def contains(self, x: float) -> bool:
        """Point membership; False for EMPTY."""
        if self.empty:
            return False
        return self.lo <= x <= self.hi

    def encloses(self, other: "Interval") -> bool:
        """Set inclusion other ⊆ self; EMPTY is enclosed by everything."""
        if other.empty:
            return True
        if self.empty:
            return False
        return self.lo <= other.lo and other.hi <= self.hi

    @property
    def width(self) -> float:
        return 0.0 if self.empty else self.hi - self.lo

    def midpoint(self) -> float:
        if self.empty:
            from .errors import DomainError

            raise DomainError("midpoint of EMPTY")
        return 0.5 * (self.lo + self.hi)

    # -- lattice operations (exact, no widening) -------------------------

    def join(self, other: "Interval") -> "Interval":
        """Smallest interval containing both operands."""
        if self.empty:
            return other
        if other.empty:
            return self
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def intersect(self, other: "Interval") -> "Interval":
        if self.empty or other.empty:
            return EMPTY
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return EMPTY
        return Interval(lo, hi)

    # -- arithmetic (outward rounded, EMPTY absorbs) ----------------------

    def __neg__(self) -> "Interval":
        if self.empty:
            return EMPTY
        return Interval(-self.hi, -self.lo)

    def __add__(self, other: "Interval") -> "Interval":
        if self.empty or other.empty:
            return EMPTY
        return Interval(_down(self.lo + other.lo), _up(self.hi + other.hi))

    def __sub__(self, other: "Interval") -> "Interval":
        if self.empty or other.empty:
            return EMPTY
        return Interval(_down(self.lo - other.hi), _up(self.hi - other.lo))

    def __mul__(self, other: "Interval") -> "Interval":
        if self.empty or other.empty:
            return EMPTY
        products = (
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        )
        return Interval(_down(min(products)), _up(max(products)))

    def __truediv__(self, other: "Interval") -> "Interval":
        if self.empty or other.empty:
            return EMPTY
        if other.lo <= 0.0 <= other.hi:
            from .errors import DomainError

            raise DomainError(f"division by interval containing zero: {other}")
        quotients = (
            self.lo / other.lo,
            self.lo / other.hi,
            self.hi / other.lo,
            self.hi / other.hi,
        )
        return Interval(_down(min(quotients)), _up(max(quotients)))

    def scale(self, c: float) -> "Interval":
        """Multiplication by a scalar (exact sign handling, widened)."""
        if self.empty:
            return EMPTY
        a, b = c * self.lo, c * self.hi
        if a > b:
            a, b = b, a
        return Interval(_down(a), _up(b))

    def square(self) -> "Interval":
        """Tight image of x^2 over the interval (0 lower bound when 0 ∈ [lo,hi])."""
        if self.empty:
            return EMPTY
        lo2, hi2 = self.lo * self.lo, self.hi * self.hi
        if self.lo <= 0.0 <= self.hi:
            return Interval(0.0, _up(max(lo2, hi2)))
        # squares are nonnegative even when rounding-down underflows
        return Interval(max(0.0, _down(min(lo2, hi2))), _up(max(lo2, hi2)))

    def __repr__(self):
        if self.empty:
            return "Interval.EMPTY"
        return f"[{self.lo!r}, {self.hi!r}]"


EMPTY = Interval(math.inf, -math.inf, empty=True)


def interval_norm2(components) -> Interval:
    """Enclosure of the Euclidean norm of a vector of intervals.

    The lower endpoint of each square is 0 whenever the component straddles
    zero, so e.g. four copies of [0, 1] give [0, 2].  Any EMPTY component
    makes the result EMPTY.
    """
    total_lo = 0.0
    total_hi = 0.0
    for c in components:
        if c.empty:
            return EMPTY
        sq = c.square()
        total_lo += sq.lo
        total_hi += sq.hi
    # norms are nonnegative, so clamping the rounded-down endpoint is sound
    return Interval(max(0.0, _down(math.sqrt(total_lo))), _up(math.sqrt(total_hi)))
