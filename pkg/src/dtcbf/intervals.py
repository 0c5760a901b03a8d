"""Closed-interval arithmetic and axis-aligned boxes.

Arithmetic is outward-conservative: the exact image of each implemented
operation over its input intervals is contained in the result.  Rational
operations (+, -, *, /, integer powers) use exact float endpoint arithmetic;
transcendentals are widened by a couple of ulps because libm is not assumed
correctly rounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import DimensionMismatchError, DomainError

_INF = math.inf

_TWO_PI = 2.0 * math.pi
_HALF_PI = 0.5 * math.pi


def _down(x: float) -> float:
    """One step toward -inf (two ulps for safety on transcendental results)."""
    return math.nextafter(math.nextafter(x, -_INF), -_INF)


def _up(x: float) -> float:
    return math.nextafter(math.nextafter(x, _INF), _INF)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise DomainError("interval endpoint is NaN")
        if self.lo > self.hi:
            raise DomainError(f"interval has lo > hi: [{self.lo}, {self.hi}]")

    @staticmethod
    def point(x: float) -> "Interval":
        return Interval(x, x)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= x <= self.hi + slack

    def encloses(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __add__(self, other: "Interval") -> "Interval":
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def __sub__(self, other: "Interval") -> "Interval":
        return Interval(self.lo - other.hi, self.hi - other.lo)

    def __mul__(self, other: "Interval") -> "Interval":
        products = (
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        )
        return Interval(min(products), max(products))

    def __truediv__(self, other: "Interval") -> "Interval":
        if other.lo <= 0.0 <= other.hi:
            raise DomainError(
                f"division by interval containing zero: [{other.lo}, {other.hi}]"
            )
        quotients = (
            self.lo / other.lo,
            self.lo / other.hi,
            self.hi / other.lo,
            self.hi / other.hi,
        )
        return Interval(min(quotients), max(quotients))

    def pow_int(self, n: int) -> "Interval":
        if n == 0:
            return Interval(1.0, 1.0)
        if n < 0:
            return Interval(1.0, 1.0) / self.pow_int(-n)
        if n % 2 == 1:
            return Interval(self.lo**n, self.hi**n)
        # even power: split at zero for the exact monotone-piece image
        lo_p, hi_p = self.lo**n, self.hi**n
        if self.lo <= 0.0 <= self.hi:
            return Interval(0.0, max(lo_p, hi_p))
        return Interval(min(lo_p, hi_p), max(lo_p, hi_p))

    def exp(self) -> "Interval":
        return Interval(_down(math.exp(self.lo)), _up(math.exp(self.hi)))

    def log(self) -> "Interval":
        if self.lo <= 0.0:
            raise DomainError(f"log of interval touching <= 0: [{self.lo}, {self.hi}]")
        return Interval(_down(math.log(self.lo)), _up(math.log(self.hi)))

    def sqrt(self) -> "Interval":
        if self.lo < 0.0:
            raise DomainError(f"sqrt of interval below 0: [{self.lo}, {self.hi}]")
        return Interval(max(0.0, _down(math.sqrt(self.lo))), _up(math.sqrt(self.hi)))

    def sin(self) -> "Interval":
        return _sin_interval(self.lo, self.hi)

    def cos(self) -> "Interval":
        # cos(x) = sin(x + pi/2); shifting in floats would lose the exact
        # endpoint values, so do the monotone-piece analysis directly.
        return _cos_interval(self.lo, self.hi)


def _has_point(lo: float, hi: float, offset: float, period: float) -> bool:
    """Whether offset + k*period lies in [lo, hi] for some integer k."""
    k = math.ceil((lo - offset) / period)
    return offset + k * period <= hi


def _sin_interval(lo: float, hi: float) -> Interval:
    if hi - lo >= _TWO_PI:
        return Interval(-1.0, 1.0)
    vals = [math.sin(lo), math.sin(hi)]
    res_lo, res_hi = min(vals), max(vals)
    if _has_point(lo, hi, _HALF_PI, _TWO_PI):
        res_hi = 1.0
    if _has_point(lo, hi, -_HALF_PI, _TWO_PI):
        res_lo = -1.0
    return Interval(max(-1.0, _down(res_lo)), min(1.0, _up(res_hi)))


def _cos_interval(lo: float, hi: float) -> Interval:
    if hi - lo >= _TWO_PI:
        return Interval(-1.0, 1.0)
    vals = [math.cos(lo), math.cos(hi)]
    res_lo, res_hi = min(vals), max(vals)
    if _has_point(lo, hi, 0.0, _TWO_PI):
        res_hi = 1.0
    if _has_point(lo, hi, math.pi, _TWO_PI):
        res_lo = -1.0
    return Interval(max(-1.0, _down(res_lo)), min(1.0, _up(res_hi)))


class Box:
    """An axis-aligned rectangle [lower, upper] in R^n."""

    __slots__ = ("lower", "upper")

    def __init__(self, lower: Sequence[float], upper: Sequence[float]):
        lo = np.asarray(lower, dtype=float)
        hi = np.asarray(upper, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise DimensionMismatchError(
                f"box bounds have shapes {lo.shape} and {hi.shape}"
            )
        if np.any(lo > hi):
            bad = int(np.argmax(lo > hi))
            raise DomainError(
                f"box dimension {bad} has lower {lo[bad]} > upper {hi[bad]}"
            )
        self.lower = lo
        self.upper = hi
        self.lower.flags.writeable = False
        self.upper.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def diag_sq(self) -> float:
        w = self.widths
        return float(np.dot(w, w))

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def interval(self, i: int) -> Interval:
        return Interval(float(self.lower[i]), float(self.upper[i]))

    def intervals(self) -> list[Interval]:
        return [self.interval(i) for i in range(self.dim)]

    def contains(self, x: Sequence[float], slack: float = 0.0) -> bool:
        p = np.asarray(x, dtype=float)
        return bool(
            np.all(p >= self.lower - slack) and np.all(p <= self.upper + slack)
        )

    def encloses(self, other: "Box") -> bool:
        return bool(
            np.all(self.lower <= other.lower) and np.all(other.upper <= self.upper)
        )

    def clip(self, x: Sequence[float]) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def split(self, dim: int) -> tuple["Box", "Box"]:
        """Bisect at the midpoint of the given dimension."""
        if not 0 <= dim < self.dim:
            raise DimensionMismatchError(f"split dimension {dim} out of range")
        mid = 0.5 * (self.lower[dim] + self.upper[dim])
        left_hi = self.upper.copy()
        left_hi[dim] = mid
        right_lo = self.lower.copy()
        right_lo[dim] = mid
        return Box(self.lower, left_hi), Box(right_lo, self.upper)

    def faces(self) -> Iterator["Box"]:
        """The 2n faces, each a box with one dimension pinned to a bound."""
        for i in range(self.dim):
            for bound in (self.lower[i], self.upper[i]):
                lo = self.lower.copy()
                hi = self.upper.copy()
                lo[i] = bound
                hi[i] = bound
                yield Box(lo, hi)

    def sample_grid(self, per_axis: int) -> np.ndarray:
        """Regular grid including corners, shape (dim, per_axis**dim)."""
        axes = [
            np.linspace(self.lower[i], self.upper[i], per_axis)
            for i in range(self.dim)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Box)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))

    def __repr__(self) -> str:
        pairs = ", ".join(
            f"[{lo:g}, {hi:g}]" for lo, hi in zip(self.lower, self.upper)
        )
        return f"Box({pairs})"
