"""Rectangular grids, gridded functions and weighted L^p functionals.

A function is stored as a dense value array over the cartesian product of its
axes, C order, axis 1 varying slowest.  Each node owns a cell of the domain
and L^p norms integrate against the normalized cell measure, so every grid
carries total measure one regardless of the interval it spans.

On an equidistant axis every node owns the same measure.  That choice is what
makes sorting node values identical to the measure-theoretic monotone
rearrangement and keeps the error-reduction guarantees of the monotonization
operators exact rather than approximate; the rearrangement module refuses
non-equidistant axes for the same reason.  Non-equidistant axes are still
valid for storage and for L^p computations and use the piecewise-constant
cell rule: interior nodes own the cell between the midpoints of their
neighbouring gaps, boundary nodes own the remaining half-cells.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    GridMismatchError,
    NonFiniteValueError,
    NonIncreasingAxisError,
    OutOfRangeError,
    ShapeMismatchError,
)

#: The package-wide comparison tolerance.  Comparisons of function values are
#: made at absolute tolerance VALUE_RTOL times the diameter of the value
#: range involved (with a floor of VALUE_RTOL itself for degenerate ranges).
VALUE_RTOL = 1e-12

#: Two successive gaps count as equal when they differ by at most this
#: relative amount; an axis is equidistant when all its gaps are equal.
EQUIDISTANT_RTOL = 1e-9

#: L^p index for the supremum norm.
INF = math.inf


def value_tol(*arrays: np.ndarray) -> float:
    """Absolute comparison tolerance for values drawn from ``arrays``."""
    lo = min(float(np.min(a)) for a in arrays)
    hi = max(float(np.max(a)) for a in arrays)
    return VALUE_RTOL * max(1.0, hi - lo)


class Axis:
    """Strictly increasing coordinates along one grid dimension."""

    __slots__ = ("coords", "_equidistant")

    def __init__(self, coords: Iterable[float]):
        c = np.array(coords, dtype=float)
        if c.ndim != 1 or c.size < 1:
            raise NonIncreasingAxisError(
                "axis coordinates must form a non-empty 1-d sequence"
            )
        if not np.all(np.isfinite(c)):
            raise NonFiniteValueError("axis coordinates must be finite")
        if not np.all(np.diff(c) > 0.0):
            raise NonIncreasingAxisError(
                "axis coordinates must be strictly increasing"
            )
        c.setflags(write=False)
        self.coords = c
        gaps = np.diff(c)
        self._equidistant = bool(
            gaps.size == 0
            or np.all(np.abs(gaps - gaps.mean()) <= EQUIDISTANT_RTOL * gaps.mean())
        )

    @property
    def equidistant(self) -> bool:
        return self._equidistant

    def __len__(self) -> int:
        return self.coords.size

    def __eq__(self, other) -> bool:
        return isinstance(other, Axis) and np.array_equal(self.coords, other.coords)

    def __repr__(self) -> str:
        return f"Axis({self.coords.tolist()!r})"

    def node_weights(self) -> np.ndarray:
        """Normalized cell measure owned by each node; sums to one."""
        n = len(self)
        if self._equidistant:
            return np.full(n, 1.0 / n)
        c = self.coords
        w = np.empty(n)
        w[0] = (c[1] - c[0]) / 2.0
        w[-1] = (c[-1] - c[-2]) / 2.0
        w[1:-1] = (c[2:] - c[:-2]) / 2.0
        return w / (c[-1] - c[0])


class GriddedFunction:
    """A scalar function sampled on a rectangular grid.

    values[i1, ..., id] is the value at (axes[0].coords[i1], ...); the array
    is copied on construction and frozen, so instances can be shared across
    threads.
    """

    __slots__ = ("axes", "values")

    def __init__(self, axes: Sequence, values):
        ax = tuple(a if isinstance(a, Axis) else Axis(a) for a in axes)
        if not ax:
            raise ShapeMismatchError("a gridded function needs at least one axis")
        v = np.array(values, dtype=float)
        shape = tuple(len(a) for a in ax)
        if v.shape != shape:
            raise ShapeMismatchError(
                f"values shape {v.shape} does not match the grid shape {shape}"
            )
        if not np.all(np.isfinite(v)):
            raise NonFiniteValueError("function values must be finite")
        v.setflags(write=False)
        self.axes = ax
        self.values = v

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def with_values(self, values) -> "GriddedFunction":
        """A new function on the same grid with different values."""
        return GriddedFunction(self.axes, values)

    def same_grid(self, other: "GriddedFunction") -> bool:
        return self.axes == other.axes

    def value_range(self) -> tuple:
        return float(self.values.min()), float(self.values.max())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GriddedFunction)
            and self.same_grid(other)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"GriddedFunction(shape={self.shape})"


def make_grid_function(axes: Sequence, values) -> GriddedFunction:
    """Validating constructor; ``axes`` may be Axis objects or raw coords."""
    return GriddedFunction(axes, values)


def check_same_grid(f: GriddedFunction, g: GriddedFunction) -> None:
    if not f.same_grid(g):
        raise GridMismatchError("functions do not live on the same grid")


def check_p(p: float) -> float:
    """Validate an L^p index: a real >= 1, or INF."""
    p = float(p)
    if math.isnan(p) or p < 1.0:
        raise OutOfRangeError(f"p must be >= 1 or inf, got {p!r}")
    return p


def lp_distance(f: GriddedFunction, g: GriddedFunction, p: float) -> float:
    """Weighted L^p distance between two functions on a shared grid.

    Finite p integrates |f-g|^p against the product cell measure and takes
    the p-th root; p = INF is the maximum over grid nodes.
    """
    check_same_grid(f, g)
    p = check_p(p)
    diff = np.abs(f.values - g.values)
    if math.isinf(p):
        return float(diff.max())
    acc = diff**p
    for ax in f.axes:
        # contract the leading axis against its node weights
        acc = np.tensordot(ax.node_weights(), acc, axes=(0, 0))
    return float(acc) ** (1.0 / p)


def lp_length(band, p: float) -> float:
    """L^p length of a band: the L^p distance between its end-points."""
    return lp_distance(band.lower, band.upper, p)


def is_monotone(f: GriddedFunction, tol: float | None = None) -> bool:
    """True when the values are weakly increasing along every axis."""
    if tol is None:
        tol = value_tol(f.values)
    for axis in range(f.ndim):
        if f.shape[axis] < 2:
            continue
        if np.any(np.diff(f.values, axis=axis) < -tol):
            return False
    return True
