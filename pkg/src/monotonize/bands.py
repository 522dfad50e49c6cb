"""Simultaneous confidence bands and their monotonization.

A band is a pair of end-point functions on a shared grid with lower <= upper.
Bands of the symmetric max-t type are assembled as center +/- critical *
stderr, with the critical value taken as a conservative empirical quantile of
the bootstrap max-t statistics.

Monotonizing a band applies the same operator independently to both
end-points.  Because the operators preserve pointwise order, any function
the original band covers is still covered after monotonization (after the
function itself is monotonized, which changes nothing when it is already
monotone); because they reduce L^p distances between pairs, the band can only
get shorter in every L^p length.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    AllNodesDegenerateError,
    CrossingBandError,
    NegativeStderrError,
    OutOfRangeError,
    TooFewDrawsError,
)
from .grid import GriddedFunction, check_same_grid, value_tol
from .isotonic import monotonize

#: Nodes whose standard error falls at or below this threshold are excluded
#: from max-t statistics (and reported), since dividing by them is unstable.
DEGENERATE_STDERR = 1e-12


class Band:
    """A pair of end-point functions with lower <= upper pointwise."""

    __slots__ = ("lower", "upper")

    def __init__(self, lower: GriddedFunction, upper: GriddedFunction):
        check_same_grid(lower, upper)
        tol = value_tol(lower.values, upper.values)
        if np.any(lower.values > upper.values + tol):
            raise CrossingBandError("lower end-point exceeds upper end-point")
        self.lower = lower
        self.upper = upper

    @property
    def axes(self):
        return self.lower.axes

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Band)
            and self.lower == other.lower
            and self.upper == other.upper
        )

    def __repr__(self) -> str:
        return f"Band(shape={self.lower.shape})"


@dataclass(frozen=True)
class BandRecipe:
    """Ingredients of a symmetric band: center +/- critical * stderr."""

    center: GriddedFunction
    stderr: GriddedFunction
    critical: float
    alpha: float

    def __post_init__(self):
        check_same_grid(self.center, self.stderr)
        if np.any(self.stderr.values < 0.0):
            raise NegativeStderrError("standard errors must be non-negative")
        if not float(self.critical) >= 0.0:
            raise OutOfRangeError("the critical value must be non-negative")
        if not 0.0 < float(self.alpha) < 1.0:
            raise OutOfRangeError(f"alpha must lie in (0, 1), got {self.alpha!r}")


def assemble_band(recipe: BandRecipe) -> Band:
    """Build the two-sided band described by a recipe."""
    offset = float(recipe.critical) * recipe.stderr.values
    return Band(
        recipe.center.with_values(recipe.center.values - offset),
        recipe.center.with_values(recipe.center.values + offset),
    )


def order_statistic_quantile(values, alpha: float) -> float:
    """Conservative empirical upper quantile of a sample.

    Returns the k-th smallest entry with k = ceil((1 - alpha) * B), the fixed
    rule used for every critical value in the package.  alpha = 0 gives the
    sample maximum.  A small slack guards the ceiling against floating-point
    products landing a hair above an integer.
    """
    arr = np.sort(np.asarray(values, dtype=float))
    b = arr.size
    if b == 0:
        raise TooFewDrawsError("no values to take a quantile of")
    if not 0.0 <= float(alpha) < 1.0:
        raise OutOfRangeError(f"alpha must lie in [0, 1), got {alpha!r}")
    k = math.ceil((1.0 - float(alpha)) * b - 1e-9)
    k = min(max(k, 1), b)
    return float(arr[k - 1])


def critical_value_max_t(
    center: GriddedFunction,
    bootstrap_centers: Sequence[GriddedFunction],
    stderr: GriddedFunction,
    alpha: float,
) -> float:
    """Critical value of the bootstrap max-t statistic.

    For each draw the statistic is the maximum over grid nodes of
    |draw - center| / stderr; the critical value is the conservative
    empirical (1 - alpha) quantile over the draws.  Nodes with near-zero
    stderr are excluded from the maximum and reported via a warning.
    """
    draws = list(bootstrap_centers)
    if len(draws) < 2:
        raise TooFewDrawsError(f"need at least 2 draws, got {len(draws)}")
    check_same_grid(center, stderr)
    for d in draws:
        check_same_grid(center, d)
    s = stderr.values
    valid = s > DEGENERATE_STDERR
    n_bad = int(s.size - np.count_nonzero(valid))
    if n_bad == s.size:
        raise AllNodesDegenerateError(
            "every node has a near-zero standard error; no max-t statistic exists"
        )
    if n_bad:
        warnings.warn(
            f"{n_bad} of {s.size} nodes have near-zero stderr and are "
            "excluded from the max-t statistic",
            RuntimeWarning,
            stacklevel=2,
        )
    sv = s[valid]
    cv = center.values[valid]
    stats = [float(np.max(np.abs(d.values[valid] - cv) / sv)) for d in draws]
    return order_statistic_quantile(stats, alpha)


def monotonize_band(
    band: Band,
    method: str = "rearrange",
    orderings=None,
    lam: float = 0.5,
) -> Band:
    """Monotonize both end-points of a band with the same operator."""
    return Band(
        monotonize(band.lower, method, orderings, lam),
        monotonize(band.upper, method, orderings, lam),
    )


def covers(band: Band, f: GriddedFunction) -> bool:
    """True when f lies inside the band at every node (tolerance-padded)."""
    check_same_grid(band.lower, f)
    tol = value_tol(band.lower.values, band.upper.values, f.values)
    return bool(
        np.all(band.lower.values - tol <= f.values)
        and np.all(f.values <= band.upper.values + tol)
    )
