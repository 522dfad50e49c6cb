import math

import numpy as np
import pytest

from monotonize.errors import (
    GridMismatchError,
    NonFiniteValueError,
    NonIncreasingAxisError,
    OutOfRangeError,
    ShapeMismatchError,
)
from monotonize.grid import (
    INF,
    Axis,
    GriddedFunction,
    check_p,
    is_monotone,
    lp_distance,
    lp_length,
    make_grid_function,
    value_tol,
)


def test_axis_rejects_non_increasing_coords():
    with pytest.raises(NonIncreasingAxisError):
        Axis([0.0, 1.0, 1.0])
    with pytest.raises(NonIncreasingAxisError):
        Axis([0.0, 2.0, 1.0])


def test_axis_rejects_non_finite_coords():
    with pytest.raises(NonFiniteValueError):
        Axis([0.0, np.nan])
    with pytest.raises(NonFiniteValueError):
        Axis([0.0, np.inf])


def test_axis_single_node_is_allowed():
    a = Axis([0.25])
    assert len(a) == 1
    assert a.equidistant
    np.testing.assert_allclose(a.node_weights(), [1.0])


def test_axis_equidistant_detection():
    assert Axis(np.linspace(0, 1, 7)).equidistant
    assert not Axis([0.0, 1.0, 3.0]).equidistant
    # gaps differing only at float noise still count as equidistant
    coords = np.linspace(2, 20, 533)
    assert Axis(coords).equidistant


def test_equidistant_axis_weights_are_equal():
    w = Axis(np.linspace(0, 1, 5)).node_weights()
    np.testing.assert_allclose(w, np.full(5, 0.2))
    assert w.sum() == pytest.approx(1.0)


def test_non_equidistant_axis_weights_are_trapezoid():
    w = Axis([0.0, 1.0, 3.0]).node_weights()
    np.testing.assert_allclose(w, [0.5 / 3, 1.5 / 3, 1.0 / 3])
    assert w.sum() == pytest.approx(1.0)


def test_axis_weights_sum_to_one_random():
    rng = np.random.default_rng(42)
    for _ in range(200):
        n = int(rng.integers(2, 30))
        coords = np.sort(rng.uniform(-5, 5, n))
        if np.any(np.diff(coords) <= 0):
            continue
        w = Axis(coords).node_weights()
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(w > 0)


def test_grid_function_validates_shape_and_values():
    with pytest.raises(ShapeMismatchError):
        GriddedFunction([Axis([0.0, 1.0])], np.zeros((2, 2)))
    with pytest.raises(NonFiniteValueError):
        GriddedFunction([Axis([0.0, 1.0])], [0.0, np.nan])


def test_grid_function_values_are_read_only():
    f = make_grid_function([[0.0, 1.0]], [1.0, 2.0])
    with pytest.raises(ValueError):
        f.values[0] = 5.0


def test_with_values_keeps_grid():
    f = make_grid_function([[0.0, 1.0]], [1.0, 2.0])
    g = f.with_values([3.0, 4.0])
    assert f.same_grid(g)
    assert f != g
    assert g == make_grid_function([[0.0, 1.0]], [3.0, 4.0])


def test_check_p_accepts_one_two_inf():
    for p in (1.0, 1.5, 2.0, INF):
        check_p(p)
    for p in (0.5, 0.0, -1.0, np.nan):
        with pytest.raises(OutOfRangeError):
            check_p(p)


def test_lp_distance_hand_values():
    f = make_grid_function([[0.0, 0.5, 1.0]], [3.0, 1.0, 2.0])
    g = make_grid_function([[0.0, 0.5, 1.0]], [0.0, 1.0, 2.0])
    assert lp_distance(f, g, 1) == pytest.approx(1.0)
    assert lp_distance(f, g, 2) == pytest.approx(math.sqrt(3.0))
    assert lp_distance(f, g, INF) == pytest.approx(3.0)


def test_lp_distance_2d_hand_value():
    axes = [[0.0, 1.0], [0.0, 1.0]]
    f = make_grid_function(axes, [[1.0, 3.0], [2.0, 0.0]])
    g = make_grid_function(axes, [[0.0, 0.0], [0.0, 0.0]])
    assert lp_distance(f, g, 1) == pytest.approx((1 + 3 + 2 + 0) / 4)
    assert lp_distance(f, g, 2) == pytest.approx(math.sqrt((1 + 9 + 4) / 4))
    assert lp_distance(f, g, INF) == pytest.approx(3.0)


def test_lp_distance_requires_same_grid():
    f = make_grid_function([[0.0, 1.0]], [1.0, 2.0])
    g = make_grid_function([[0.0, 2.0]], [1.0, 2.0])
    with pytest.raises(GridMismatchError):
        lp_distance(f, g, 2)


def test_lp_distance_non_equidistant_uses_trapezoid_weights():
    f = make_grid_function([[0.0, 1.0, 3.0]], [1.0, 1.0, 1.0])
    g = make_grid_function([[0.0, 1.0, 3.0]], [0.0, 0.0, 0.0])
    # all deviations are 1, so every p gives 1 under normalized weights
    assert lp_distance(f, g, 1) == pytest.approx(1.0)
    assert lp_distance(f, g, 2) == pytest.approx(1.0)


def test_lp_length_band_fixture():
    class _Pair:
        lower = make_grid_function([[0.0, 1.0]], [1.0, 0.0])
        upper = make_grid_function([[0.0, 1.0]], [2.0, 3.0])

    assert lp_length(_Pair, 1) == pytest.approx(2.0)
    assert lp_length(_Pair, 2) == pytest.approx(math.sqrt(5.0))
    assert lp_length(_Pair, INF) == pytest.approx(3.0)


def test_is_monotone_1d_and_2d():
    assert is_monotone(make_grid_function([[0.0, 1.0, 2.0]], [1.0, 1.0, 2.0]))
    assert not is_monotone(make_grid_function([[0.0, 1.0, 2.0]], [1.0, 0.5, 2.0]))
    axes = [[0.0, 1.0], [0.0, 1.0]]
    assert is_monotone(make_grid_function(axes, [[0.0, 1.0], [2.0, 3.0]]))
    assert not is_monotone(make_grid_function(axes, [[0.0, 2.0], [1.0, 1.5]]))


def test_is_monotone_tolerates_float_noise():
    f = make_grid_function([[0.0, 1.0]], [1.0, 1.0 - 1e-14])
    assert is_monotone(f)


def test_value_tol_scales_with_span():
    assert value_tol(np.array([0.0, 1.0])) == pytest.approx(1e-12)
    assert value_tol(np.array([0.0, 1e6])) == pytest.approx(1e-6)
