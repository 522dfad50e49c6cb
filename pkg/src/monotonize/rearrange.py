"""Monotone rearrangement of gridded functions.

The increasing rearrangement of a function sampled on an equal-measure grid
is obtained by sorting its values: the sorted sequence is the quantile
function of the value distribution, read at the grid's own probability
levels.  rearrange_quantile_oracle evaluates that quantile-function
definition literally and independently of any sorting, and exists so tests
can cross-check the fast path against the definition.

Multivariate rearrangement applies the one-dimensional operator along one
axis at a time.  The result depends on the order in which axes are visited,
so the multivariate operators take an explicit ordering (a permutation of the
axis numbers 1..d); averaging the rearrangements over a set of orderings
restores symmetry and never does worse than the average of its members.

Axis numbering follows the wire format: axes are named 1..d with axis 1
varying slowest, matching the x1,...,xd columns of the CSV formats.
"""

from __future__ import annotations

from itertools import permutations
from typing import Sequence

import numpy as np

from .errors import (
    AxisOutOfRangeError,
    EmptyInputError,
    EmptyOrderingSetError,
    InfeasibleConstraintError,
    InvalidOrderingError,
    NonEquidistantAxisError,
    NonFiniteValueError,
    OutOfRangeError,
)
from .grid import GriddedFunction, check_p

#: Largest dimension for which the default ordering set (all d! orderings)
#: is generated implicitly; beyond it the caller must pass orderings.
MAX_IMPLICIT_ORDERING_DIM = 3


def rearrange_1d(values, direction: str = "increasing") -> np.ndarray:
    """Sort a value sequence into its monotone rearrangement."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise EmptyInputError("rearrange_1d needs a non-empty 1-d sequence")
    if not np.all(np.isfinite(v)):
        raise NonFiniteValueError("values must be finite")
    out = np.sort(v, kind="stable")
    if direction == "decreasing":
        out = out[::-1].copy()
    elif direction != "increasing":
        raise OutOfRangeError(f"direction must be increasing or decreasing, got {direction!r}")
    return out


def rearrange_quantile_oracle(values, x: float) -> float:
    """Evaluate the rearrangement at x in (0, 1] straight from its definition.

    Returns the smallest value y such that the fraction of entries <= y is at
    least x.  Slow by construction; the sorting path must agree with this at
    every grid level x = (i+1)/n.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise EmptyInputError("the oracle needs a non-empty 1-d sequence")
    if not (0.0 < x <= 1.0):
        raise OutOfRangeError(f"x must lie in (0, 1], got {x!r}")
    n = v.size
    for y in np.unique(v):  # unique() returns candidate levels sorted
        if np.count_nonzero(v <= y) / n >= x:
            return float(y)
    return float(v.max())  # unreachable: the largest level always qualifies


def check_axis_number(f: GriddedFunction, axis: int) -> int:
    axis = int(axis)
    if not 1 <= axis <= f.ndim:
        raise AxisOutOfRangeError(
            f"axis {axis} is not one of 1..{f.ndim}"
        )
    return axis


def validate_ordering(pi: Sequence[int], ndim: int) -> tuple:
    """Check that pi is a permutation of 1..ndim and return it as a tuple."""
    perm = tuple(int(j) for j in pi)
    for j in perm:
        if not 1 <= j <= ndim:
            raise AxisOutOfRangeError(f"axis {j} is not one of 1..{ndim}")
    if sorted(perm) != list(range(1, ndim + 1)):
        raise InvalidOrderingError(
            f"{perm!r} is not a permutation of axes 1..{ndim}"
        )
    return perm


def all_orderings(ndim: int) -> tuple:
    """All ndim! axis orderings, in lexicographic order."""
    return tuple(permutations(range(1, ndim + 1)))


def resolve_orderings(f: GriddedFunction, orderings=None) -> tuple:
    """Normalize an ordering-set argument.

    None means every ordering of the function's axes, which is only generated
    implicitly for d <= 3; beyond that the caller must choose a set to keep
    the cost explicit.  The set must be non-empty and free of duplicates.
    """
    if orderings is None:
        if f.ndim > MAX_IMPLICIT_ORDERING_DIM:
            raise EmptyOrderingSetError(
                f"for d={f.ndim} > {MAX_IMPLICIT_ORDERING_DIM} an explicit "
                "ordering set is required"
            )
        return all_orderings(f.ndim)
    out = tuple(validate_ordering(pi, f.ndim) for pi in orderings)
    if not out:
        raise EmptyOrderingSetError("the ordering set must not be empty")
    if len(set(out)) != len(out):
        raise InvalidOrderingError("the ordering set contains duplicates")
    return out


def rearrange_axis(f: GriddedFunction, axis: int) -> GriddedFunction:
    """Rearrange every 1-d fiber of f along one axis (numbered from 1).

    Requires equal spacing along that axis so each fiber sits on an
    equal-measure grid and sorting equals the rearrangement exactly.
    """
    axis = check_axis_number(f, axis)
    if not f.axes[axis - 1].equidistant:
        raise NonEquidistantAxisError(
            f"axis {axis} is not equidistant; rearrangement is undefined on it"
        )
    return f.with_values(np.sort(f.values, axis=axis - 1, kind="stable"))


def rearrange_pi(f: GriddedFunction, pi: Sequence[int]) -> GriddedFunction:
    """Rearrangement along the ordering pi = (pi_1, ..., pi_d).

    The innermost operator acts first: axis pi_d, then pi_{d-1}, ending with
    pi_1.
    """
    perm = validate_ordering(pi, f.ndim)
    out = f
    for j in reversed(perm):
        out = rearrange_axis(out, j)
    return out


def rearrange_average(f: GriddedFunction, orderings=None) -> GriddedFunction:
    """Average of the pi-rearrangements over an ordering set.

    With orderings=None all d! orderings are used (d <= 3).  The average is
    monotone in every axis and its error never exceeds the mean error of the
    individual rearrangements.
    """
    pis = resolve_orderings(f, orderings)
    acc = np.zeros_like(f.values)
    for pi in pis:
        acc = acc + rearrange_pi(f, pi).values
    return f.with_values(acc / len(pis))


def eta_p(k_interval, epsilon: float, p: float, resolution: int = 21) -> float:
    """Smallest sorting gain over a lattice of strictly violating pairs.

    Minimizes |v - t'|^p + |v' - t|^p - |v - t|^p - |v' - t'|^p over lattice
    points of k_interval^4 subject to v' >= v + epsilon and t' >= t + epsilon.
    The minimum is positive and lower-bounds the L^p^p improvement that each
    unit of measure of an epsilon-separated violation must yield.

    k_interval is the value interval K, typically taken to be the observed
    [min, max] of the functions involved.  resolution is the number of
    lattice points per side; the exact infimum is approached from above as
    the lattice refines, and is hit exactly whenever epsilon is a multiple of
    the lattice step.
    """
    lo, hi = (float(k_interval[0]), float(k_interval[1]))
    if not (hi > lo):
        raise OutOfRangeError("the interval K must have positive length")
    epsilon = float(epsilon)
    if not epsilon > 0.0:
        raise OutOfRangeError("epsilon must be positive")
    p = check_p(p)
    if np.isinf(p):
        raise OutOfRangeError("eta_p needs a finite p")
    resolution = int(resolution)
    if resolution < 2:
        raise OutOfRangeError("resolution must be at least 2")
    if hi - lo < epsilon:
        raise InfeasibleConstraintError(
            f"no pair in [{lo}, {hi}] is separated by {epsilon}"
        )
    g = np.linspace(lo, hi, resolution)
    a, b = np.meshgrid(g, g, indexing="ij")
    feas = (b - a) >= epsilon * (1.0 - 1e-12)
    v, vp = a[feas], b[feas]  # value pairs with v' >= v + epsilon
    t, tp = v, vp  # the same lattice serves both coordinates
    gain = (
        np.abs(v[:, None] - tp[None, :]) ** p
        + np.abs(vp[:, None] - t[None, :]) ** p
        - np.abs(v[:, None] - t[None, :]) ** p
        - np.abs(vp[:, None] - tp[None, :]) ** p
    )
    return float(gain.min())
