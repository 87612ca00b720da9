"""Piecewise-linear comparison functions on ``[0, inf)``.

Breakpoints are stored as exact fractions, so sums and composites of
comparison functions are computed without rounding. Evaluation on numpy
arrays goes through floats.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Tuple, Union, overload

import numpy as np
from typing_extensions import TypeAlias

from ..core import AglensError

__all__ = [
    "ComparisonClass",
    "ComparisonClassError",
    "PLFun",
    "pl_eval",
    "pl_add",
    "pl_sub",
    "pl_scale",
    "pl_compose",
    "classify",
    "id_minus_in_kinf",
    "format_number",
    "print_pl",
    "parse_pl",
    "in_class",
    "require_class",
    "to_fraction",
]


Number: TypeAlias = Union[int, float, str, Fraction]
Point: TypeAlias = Tuple[Fraction, Fraction]


class ComparisonClassError(AglensError, ValueError):
    """Raised when a function is outside the required comparison class."""


def to_fraction(value: Number) -> Fraction:
    """Exact conversion, floats going through their shortest decimal."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float):
        if not np.isfinite(value):
            raise ValueError(f"Non-finite value {value!r}")
        return Fraction(repr(value))
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    return Fraction(value)


@dataclass(frozen=True)
class PLFun:
    """A continuous piecewise-linear function on ``[0, inf)``.

    ``breakpoints`` start at ``r = 0`` with strictly increasing radii,
    and the function continues with ``final_slope`` after the last one.
    Interior breakpoints lying on a straight line are dropped, so equal
    functions have equal representations.
    """

    breakpoints: tuple[Point, ...]
    final_slope: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        points = [(to_fraction(r), to_fraction(v)) for r, v in self.breakpoints]
        slope = to_fraction(self.final_slope)
        if not points:
            raise ValueError(
                "A piecewise-linear function needs at least one breakpoint"
            )
        if points[0][0] != 0:
            raise ValueError("The first breakpoint must be at r = 0")
        for (r0, _), (r1, _) in zip(points, points[1:]):
            if not r1 > r0:
                raise ValueError("Breakpoint radii must be strictly increasing")
        object.__setattr__(self, "breakpoints", _canonical(points, slope))
        object.__setattr__(self, "final_slope", slope)

    @classmethod
    def identity(cls) -> PLFun:
        return cls(((Fraction(0), Fraction(0)),), Fraction(1))

    @classmethod
    def zero(cls) -> PLFun:
        return cls(((Fraction(0), Fraction(0)),), Fraction(0))

    @classmethod
    def linear(cls, slope: Number) -> PLFun:
        return cls(((Fraction(0), Fraction(0)),), to_fraction(slope))

    @classmethod
    def from_points(
        cls, points: Sequence[tuple[Number, Number]], final_slope: Number = 0
    ) -> PLFun:
        return cls(
            tuple((to_fraction(r), to_fraction(v)) for r, v in points),
            to_fraction(final_slope),
        )

    @property
    def radii(self) -> tuple[Fraction, ...]:
        return tuple(r for r, _ in self.breakpoints)

    def segment_slopes(self) -> list[Fraction]:
        """Slopes of the bounded segments, in order."""
        return [
            (v1 - v0) / (r1 - r0)
            for (r0, v0), (r1, v1) in zip(self.breakpoints, self.breakpoints[1:])
        ]

    def slopes(self) -> list[Fraction]:
        """Segment slopes followed by the final slope."""
        return self.segment_slopes() + [self.final_slope]

    def slope_after(self, r: Fraction) -> Fraction:
        """Right derivative at ``r``."""
        for (r0, v0), (r1, v1) in zip(self.breakpoints, self.breakpoints[1:]):
            if r0 <= r < r1:
                return (v1 - v0) / (r1 - r0)
        return self.final_slope

    def exact(self, r: Number) -> Fraction:
        """Exact value at ``r``."""
        r = to_fraction(r)
        if r < 0:
            raise ValueError(f"Comparison functions are defined on r >= 0, got {r}")
        points = self.breakpoints
        for (r0, v0), (r1, v1) in zip(points, points[1:]):
            if r0 <= r <= r1:
                return v0 + (v1 - v0) * (r - r0) / (r1 - r0)
        last_r, last_v = points[-1]
        return last_v + self.final_slope * (r - last_r)

    @overload
    def __call__(self, r: np.ndarray) -> np.ndarray: ...

    @overload
    def __call__(self, r: float) -> float: ...

    def __call__(self, r):  # type: ignore[no-untyped-def]
        """Evaluate with floats, elementwise on arrays."""
        if isinstance(r, np.ndarray):
            return self.evaluate(r)
        return float(self.evaluate(np.asarray(float(r))))

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        if np.any(r < 0):
            raise ValueError("Comparison functions are defined on r >= 0")
        xs = np.array([float(p) for p, _ in self.breakpoints])
        ys = np.array([float(v) for _, v in self.breakpoints])
        inside = np.interp(r, xs, ys)
        beyond = ys[-1] + float(self.final_slope) * (r - xs[-1])
        return np.where(r > xs[-1], beyond, inside)

    def __add__(self, other: PLFun) -> PLFun:
        return pl_add(self, other)

    def __sub__(self, other: PLFun) -> PLFun:
        return pl_sub(self, other)

    def __str__(self) -> str:
        return print_pl(self)


def _canonical(points: list[Point], slope: Fraction) -> tuple[Point, ...]:
    kept = [points[0]]
    for index in range(1, len(points)):
        r1, v1 = points[index]
        if index + 1 < len(points):
            r2, v2 = points[index + 1]
            after = (v2 - v1) / (r2 - r1)
        else:
            after = slope
        r0, v0 = kept[-1]
        before = (v1 - v0) / (r1 - r0)
        if before != after:
            kept.append((r1, v1))
    return tuple(kept)


# Arithmetic


def pl_eval(f: PLFun, r: Number) -> float:
    """Evaluate ``f`` at ``r >= 0``."""
    return float(f.exact(r))


def _merged(f: PLFun, g: PLFun) -> list[Fraction]:
    return sorted(set(f.radii) | set(g.radii))


def pl_add(f: PLFun, g: PLFun) -> PLFun:
    radii = _merged(f, g)
    return PLFun(
        tuple((r, f.exact(r) + g.exact(r)) for r in radii),
        f.final_slope + g.final_slope,
    )


def pl_sub(f: PLFun, g: PLFun) -> PLFun:
    radii = _merged(f, g)
    return PLFun(
        tuple((r, f.exact(r) - g.exact(r)) for r in radii),
        f.final_slope - g.final_slope,
    )


def pl_scale(c: Number, f: PLFun) -> PLFun:
    c = to_fraction(c)
    return PLFun(tuple((r, c * v) for r, v in f.breakpoints), c * f.final_slope)


def pl_compose(f: PLFun, g: PLFun) -> PLFun:
    """Return ``f o g``.

    ``g`` must be nonnegative everywhere, so that ``f`` is only ever
    evaluated on its domain.
    """
    if min(v for _, v in g.breakpoints) < 0 or g.final_slope < 0:
        raise ValueError("The inner function must be nonnegative")
    radii = set(g.radii)
    f_radii = f.radii
    points = g.breakpoints
    for (r0, v0), (r1, v1) in zip(points, points[1:]):
        if v0 == v1:
            continue
        low, high = min(v0, v1), max(v0, v1)
        for b in f_radii:
            if low < b < high:
                radii.add(r0 + (b - v0) * (r1 - r0) / (v1 - v0))
    last_r, last_v = points[-1]
    if g.final_slope > 0:
        for b in f_radii:
            if b > last_v:
                radii.add(last_r + (b - last_v) / g.final_slope)
    ordered = sorted(radii)
    end = ordered[-1]
    if g.final_slope == 0:
        slope = Fraction(0)
    else:
        slope = g.final_slope * f.slope_after(g.exact(end))
    return PLFun(tuple((r, f.exact(g.exact(r))) for r in ordered), slope)


# Classes


class ComparisonClass(enum.Enum):
    """Comparison classes of functions on ``[0, inf)``.

    With finitely many pieces, a strictly increasing function vanishing at
    zero has a positive final slope, so it is unbounded: ``K`` and
    ``KINF`` select the same functions here.
    """

    K = "K"
    KINF = "Kinf"
    KINF0 = "Kinf0"
    NONE = "none"

    def includes(self, other: ComparisonClass) -> bool:
        """Whether every function of class ``other`` belongs to this class."""
        if other is ComparisonClass.NONE:
            return self is ComparisonClass.NONE
        if self is ComparisonClass.KINF0:
            return other is not ComparisonClass.NONE
        if self in (ComparisonClass.K, ComparisonClass.KINF):
            return other in (ComparisonClass.K, ComparisonClass.KINF)
        return self is ComparisonClass.NONE


def _is_zero(f: PLFun) -> bool:
    return f.breakpoints == ((0, 0),) and f.final_slope == 0


def classify(f: PLFun) -> ComparisonClass:
    """Return the most specific class of ``f``."""
    if _is_zero(f):
        return ComparisonClass.KINF0
    if f.breakpoints[0][1] == 0 and all(s > 0 for s in f.slopes()):
        return ComparisonClass.KINF
    return ComparisonClass.NONE


def in_class(f: PLFun, tag: ComparisonClass) -> bool:
    return tag.includes(classify(f))


def require_class(f: PLFun, tag: ComparisonClass, name: str) -> None:
    if not in_class(f, tag):
        raise ComparisonClassError(
            f"{name} must be of class {tag.value}, got {classify(f).value} ({f})"
        )


def id_minus_in_kinf(lam: PLFun) -> bool:
    """Whether ``id - lam`` is of class Kinf."""
    return lam.breakpoints[0][1] == 0 and all(s < 1 for s in lam.slopes())


# Text form


def format_number(value: Fraction) -> str:
    """Exact decimal when there is one, ``p/q`` otherwise."""
    value = Fraction(value)
    denominator = value.denominator
    twos = fives = 0
    while denominator % 2 == 0:
        denominator //= 2
        twos += 1
    while denominator % 5 == 0:
        denominator //= 5
        fives += 1
    if denominator != 1:
        return f"{value.numerator}/{value.denominator}"
    if value.denominator == 1:
        return str(value.numerator)
    digits = max(twos, fives)
    scaled = value * 10**digits
    sign = "-" if scaled < 0 else ""
    text = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    return f"{sign}{text[:-digits]}.{text[-digits:]}"


def print_pl(f: PLFun) -> str:
    """Format as ``pl [(0,0),(1,2)] slope 0.5``."""
    points = ",".join(
        f"({format_number(r)},{format_number(v)})" for r, v in f.breakpoints
    )
    return f"pl [{points}] slope {format_number(f.final_slope)}"


_NUMBER = r"-?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?(?:/\d+)?"
_PL_PATTERN = re.compile(
    rf"\s*pl\s*\[\s*(?P<points>[^\]]*)\]\s*slope\s+(?P<slope>{_NUMBER})\s*"
)
_POINT_PATTERN = re.compile(rf"\(\s*({_NUMBER})\s*,\s*({_NUMBER})\s*\)")


def parse_pl(text: str) -> PLFun:
    """Parse the text form produced by `print_pl`.

    Numbers are read exactly, as decimals or ``p/q`` fractions.
    """
    match = _PL_PATTERN.fullmatch(text)
    if match is None:
        raise ValueError(f"Malformed piecewise-linear function: {text!r}")
    body = match.group("points").strip()
    points = []
    position = 0
    while position < len(body):
        point = _POINT_PATTERN.match(body, position)
        if point is None:
            raise ValueError(f"Malformed breakpoint at offset {position} in {text!r}")
        points.append((Fraction(point.group(1)), Fraction(point.group(2))))
        position = point.end()
        rest = body[position:].lstrip()
        if rest.startswith(","):
            rest = rest[1:].lstrip()
        position = len(body) - len(rest)
    return PLFun(tuple(points), Fraction(match.group("slope")))
