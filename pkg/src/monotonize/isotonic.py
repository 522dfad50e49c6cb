"""Weighted isotonic regression and convex blends with rearrangement.

pava computes the weighted least-squares projection of a sequence onto the
cone of weakly increasing sequences by pooling adjacent violators.  The
projection flattens decreasing stretches into weighted block means; it is the
identity on weakly increasing input because only strict decreases trigger
pooling.  isotonic_maxmin_oracle evaluates the classical max-min
characterization of the same projection in O(n^2) per index; it shares no
code with pava and serves as its independent cross-check.

The multivariate operators mirror the rearrangement module: fibers along one
axis at a time, innermost axis of the ordering first, and an averaging
variant over a set of orderings.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import (
    EmptyInputError,
    IndexOutOfRangeError,
    LambdaOutOfRangeError,
    NonEquidistantAxisError,
    NonFiniteValueError,
    NonPositiveWeightError,
    OutOfRangeError,
    ShapeMismatchError,
)
from .grid import GriddedFunction, check_same_grid
from .rearrange import (
    check_axis_number,
    rearrange_average,
    resolve_orderings,
    validate_ordering,
)


def _check_seq(values, weights):
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise EmptyInputError("a non-empty 1-d sequence is required")
    if not np.all(np.isfinite(v)):
        raise NonFiniteValueError("values must be finite")
    if weights is None:
        w = np.ones(v.size)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != v.shape:
            raise ShapeMismatchError("weights must match the values in shape")
        if not np.all(np.isfinite(w)):
            raise NonFiniteValueError("weights must be finite")
        if not np.all(w > 0.0):
            raise NonPositiveWeightError("weights must be strictly positive")
    return v, w


def pava(values, weights=None) -> np.ndarray:
    """Weighted L2 projection onto weakly increasing sequences.

    Stack-based pool-adjacent-violators, linear time.  Pooling replaces a
    decreasing neighbour pair of blocks by their weighted mean and repeats
    until the block means are weakly increasing, which preserves the total
    weighted mean of the input.
    """
    v, w = _check_seq(values, weights)
    n = v.size
    mean = np.empty(n)
    wsum = np.empty(n)
    count = np.empty(n, dtype=np.intp)
    top = -1
    for i in range(n):
        top += 1
        mean[top] = v[i]
        wsum[top] = w[i]
        count[top] = 1
        while top > 0 and mean[top - 1] > mean[top]:
            total = wsum[top - 1] + wsum[top]
            mean[top - 1] = (mean[top - 1] * wsum[top - 1] + mean[top] * wsum[top]) / total
            wsum[top - 1] = total
            count[top - 1] += count[top]
            top -= 1
    return np.repeat(mean[: top + 1], count[: top + 1])


def isotonic_maxmin_oracle(values, index: int, weights=None) -> float:
    """Max-min characterization of the isotonic projection at one position.

    Returns max over j <= index of the min over k >= index of the weighted
    mean of values[j..k] (0-based, inclusive).  Independent oracle for pava.
    """
    v, w = _check_seq(values, weights)
    n = v.size
    index = int(index)
    if not 0 <= index < n:
        raise IndexOutOfRangeError(f"index {index} outside 0..{n - 1}")
    best = -np.inf
    for j in range(index + 1):
        num = float(np.dot(v[j : index + 1], w[j : index + 1]))
        den = float(np.sum(w[j : index + 1]))
        worst = num / den
        for k in range(index + 1, n):
            num += v[k] * w[k]
            den += w[k]
            worst = min(worst, num / den)
        best = max(best, worst)
    return best


def isotonize_axis(f: GriddedFunction, axis: int) -> GriddedFunction:
    """Apply pava to every 1-d fiber of f along one axis (numbered from 1).

    Requires equal spacing along the axis so all fiber entries carry equal
    weight, matching the measure used by the L^p functionals.
    """
    axis = check_axis_number(f, axis)
    if not f.axes[axis - 1].equidistant:
        raise NonEquidistantAxisError(
            f"axis {axis} is not equidistant; fiber weights would be unequal"
        )
    moved = np.moveaxis(f.values, axis - 1, -1)
    flat = np.ascontiguousarray(moved).reshape(-1, f.shape[axis - 1])
    out = np.empty_like(flat)
    for r in range(flat.shape[0]):
        out[r] = pava(flat[r])
    return f.with_values(np.moveaxis(out.reshape(moved.shape), -1, axis - 1))


def isotonize_pi(f: GriddedFunction, pi: Sequence[int]) -> GriddedFunction:
    """Sequential isotonization along the ordering pi, innermost axis first.

    Mirrors the composition convention of rearrange_pi: axis pi_d first,
    ending with pi_1.
    """
    perm = validate_ordering(pi, f.ndim)
    out = f
    for j in reversed(perm):
        out = isotonize_axis(out, j)
    return out


def isotonize_average(f: GriddedFunction, orderings=None) -> GriddedFunction:
    """Average of the pi-isotonizations over an ordering set."""
    pis = resolve_orderings(f, orderings)
    acc = np.zeros_like(f.values)
    for pi in pis:
        acc = acc + isotonize_pi(f, pi).values
    return f.with_values(acc / len(pis))


def blend(a: GriddedFunction, b: GriddedFunction, lam: float) -> GriddedFunction:
    """Convex combination lam * a + (1 - lam) * b on a shared grid."""
    check_same_grid(a, b)
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise LambdaOutOfRangeError(f"lambda must lie in [0, 1], got {lam!r}")
    return a.with_values(lam * a.values + (1.0 - lam) * b.values)


def monotonize(
    f: GriddedFunction,
    method: str = "rearrange",
    orderings=None,
    lam: float = 0.5,
) -> GriddedFunction:
    """One entry point for the three monotonization operators.

    method is one of "rearrange", "isotonize" or "blend"; blend mixes the
    averaged rearrangement (weight lam) with the averaged isotonization.
    """
    if method == "rearrange":
        return rearrange_average(f, orderings)
    if method == "isotonize":
        return isotonize_average(f, orderings)
    if method == "blend":
        lam = float(lam)
        if not 0.0 <= lam <= 1.0:
            raise LambdaOutOfRangeError(f"lambda must lie in [0, 1], got {lam!r}")
        if lam == 1.0:
            return rearrange_average(f, orderings)
        if lam == 0.0:
            return isotonize_average(f, orderings)
        return blend(
            rearrange_average(f, orderings),
            isotonize_average(f, orderings),
            lam,
        )
    raise OutOfRangeError(
        f"method must be rearrange, isotonize or blend, got {method!r}"
    )
