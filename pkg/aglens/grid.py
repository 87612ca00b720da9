"""Boxes, sample plans and the numeric tolerances of grid checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .expr import ExprError
from .verdict import Verdict

__all__ = [
    "grid_verdict",
    "TOL",
    "TOL_DEF",
    "DEFAULT_GRID_STEP",
    "Box",
    "Axis",
    "SamplePlan",
    "anchored_axis",
    "slice_env",
]

TOL = 1e-8
TOL_DEF = 1e-10
DEFAULT_GRID_STEP = 0.01


@dataclass(frozen=True)
class Box:
    """Axis-aligned closed box ``[lo1, hi1] x ... x [lon, hin]``."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        for lo, hi in bounds:
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError("Box bounds must be finite")
            if lo > hi:
                raise ValueError(f"Empty interval [{lo}, {hi}]")
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def cube(cls, dim: int, radius: float) -> Box:
        return cls(tuple((-radius, radius) for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.bounds], dtype=float)

    def contains(self, point: Sequence[float], slack: float = 1e-12) -> bool:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim,):
            return False
        return bool(
            np.all(point >= self.lower - slack) and np.all(point <= self.upper + slack)
        )

    def clip(self, point: Sequence[float]) -> np.ndarray:
        return np.clip(np.asarray(point, dtype=float), self.lower, self.upper)

    def __add__(self, other: Box) -> Box:
        return Box(self.bounds + other.bounds)


def anchored_axis(lo: float, hi: float, step: float, anchor: float = 0.0) -> np.ndarray:
    """Points of ``[lo, hi]`` on the lattice ``anchor + k * step``.

    The anchor is part of the axis whenever it lies in the interval.
    """
    if not step > 0:
        raise ValueError("The grid step must be positive")
    first = math.ceil((lo - anchor) / step - 1e-9)
    last = math.floor((hi - anchor) / step + 1e-9)
    if last < first:
        return np.array([min(max(anchor, lo), hi)])
    points = anchor + np.arange(first, last + 1) * step
    return np.clip(points, lo, hi)


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    step: float
    anchor: float = 0.0

    def points(self) -> np.ndarray:
        return anchored_axis(self.lo, self.hi, self.step, self.anchor)


@dataclass(frozen=True)
class SamplePlan:
    """A tensor grid over named variables.

    Samples are enumerated in C order, the last axis varying fastest.
    """

    axes: tuple[Axis, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "axes", tuple(self.axes))
        names = [axis.name for axis in self.axes]
        if len(set(names)) != len(names):
            raise ValueError("Duplicate variable in sample plan")

    @classmethod
    def over(
        cls,
        box: Box,
        names: Sequence[str],
        step: float,
        anchor: Sequence[float] | None = None,
    ) -> SamplePlan:
        if len(names) != box.dim:
            raise ValueError("One variable name per box dimension is required")
        anchor = [0.0] * box.dim if anchor is None else list(anchor)
        return cls(
            tuple(
                Axis(name, lo, hi, step, float(a))
                for name, (lo, hi), a in zip(names, box.bounds, anchor)
            )
        )

    @classmethod
    def uniform(
        cls, names: Iterable[str], lo: float, hi: float, step: float
    ) -> SamplePlan:
        return cls(tuple(Axis(name, lo, hi, step) for name in names))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(axis.name for axis in self.axes)

    def axis_points(self) -> list[np.ndarray]:
        return [axis.points() for axis in self.axes]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(points) for points in self.axis_points())

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64)) if self.axes else 1

    def points(self) -> dict[str, np.ndarray]:
        """Flat coordinate arrays, one per variable."""
        if not self.axes:
            return {}
        mesh = np.meshgrid(*self.axis_points(), indexing="ij")
        return {axis.name: grid.ravel() for axis, grid in zip(self.axes, mesh)}

    def point(self, index: int) -> dict[str, float]:
        if not self.axes:
            return {}
        axis_points = self.axis_points()
        coords = np.unravel_index(index, tuple(len(p) for p in axis_points))
        return {
            axis.name: float(points[i])
            for axis, points, i in zip(self.axes, axis_points, coords)
        }

    def __add__(self, other: SamplePlan) -> SamplePlan:
        return SamplePlan(self.axes + other.axes)

    def restrict(self, names: Iterable[str]) -> SamplePlan:
        wanted = set(names)
        return SamplePlan(tuple(axis for axis in self.axes if axis.name in wanted))

    def describe(self) -> dict[str, Any]:
        return {
            "axes": {
                axis.name: [axis.lo, axis.hi, axis.step] for axis in self.axes
            },
            "samples": self.size,
        }


def slice_env(points: Mapping[str, np.ndarray], part: slice) -> dict[str, np.ndarray]:
    return {name: values[part] for name, values in points.items()}


def grid_verdict(
    margins: Mapping[str, np.ndarray],
    plan: SamplePlan,
    tolerances: Mapping[str, float],
    tol: float,
    **extra: Any,
) -> Verdict:
    """Verdict of a grid check from the margin arrays of its conditions.

    The property holds iff every margin is at least ``-tol``. The worst
    sample is the smallest margin over all conditions, ties going to the
    first condition and then to the lowest sample index.
    """
    worst_name = None
    worst_index = 0
    worst_value = np.inf
    for name, values in margins.items():
        if values.size == 0:
            continue
        if np.any(np.isnan(values)):
            raise ExprError(f"Undefined {name} margin on the grid")
        index = int(np.argmin(values))
        if values[index] < worst_value:
            worst_name, worst_index, worst_value = name, index, float(values[index])
    details = {
        f"{name}_margin": float(np.min(values))
        for name, values in margins.items()
        if values.size
    }
    details.update(extra.pop("details", {}))
    found = worst_name is not None and np.isfinite(worst_value)
    common: dict[str, Any] = dict(
        worst_margin=worst_value if found else None,
        witness_point=plan.point(worst_index) if found else None,
        grid=plan.describe(),
        tolerances=dict(tolerances),
        details=details,
        **extra,
    )
    if found and worst_value < -tol:
        return Verdict.failure(None, worst_name, **common)
    return Verdict.success(**common)
