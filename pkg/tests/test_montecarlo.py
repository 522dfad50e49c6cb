import numpy as np
import pytest
from scipy.stats import norm

from monotonize.errors import (
    OutOfRangeError,
    ShapeMismatchError,
)
from monotonize.estimators import MEAN_LOSS, EstimatorSpec
from monotonize.grid import Axis
from monotonize.montecarlo import (
    AGE_RANGE,
    DEFAULT_KNOTS,
    BENCHMARK_BETA,
    BENCHMARK_BOOTSTRAP_B,
    BENCHMARK_N,
    BENCHMARK_REPS,
    McConfig,
    config_from_dict,
    default_estimators,
    design_vector,
    desk_tau_net,
    full_tau_net,
    run_experiment,
    simulate_rep,
    true_cef,
    true_cqf,
)


def _small_axis(grid=20):
    return Axis(np.linspace(AGE_RANGE[0], AGE_RANGE[1], grid))


def _kernel_only(grid=20, bandwidth=1.5):
    return (
        EstimatorSpec("kernel", MEAN_LOSS, _small_axis(grid), bandwidth=bandwidth),
    )


def test_benchmark_constants():
    assert BENCHMARK_BETA == (71.25, 8.13, -2.72, 1.78, -6.43)
    assert BENCHMARK_N == 533
    assert BENCHMARK_REPS == 1000
    assert BENCHMARK_BOOTSTRAP_B == 200
    assert DEFAULT_KNOTS == (3.0, 5.0, 8.0, 10.0, 11.5, 13.0, 14.5, 16.0, 18.0)
    net = full_tau_net()
    assert net.size == 199
    assert net[0] == pytest.approx(0.005)
    assert net[-1] == pytest.approx(0.995)
    assert desk_tau_net().size == 19


def test_design_vector_hand_values():
    np.testing.assert_allclose(design_vector(2.0), [1, 2, 0, 0, 0])
    np.testing.assert_allclose(design_vector(20.0), [1, 20, 15, 10, 5])
    # hinges are strict: at its own knot a hinge contributes zero
    np.testing.assert_allclose(design_vector(5.0), [1, 5, 0, 0, 0])
    np.testing.assert_allclose(design_vector(12.0), [1, 12, 7, 2, 0])
    assert design_vector(np.array([2.0, 20.0])).shape == (2, 5)


def test_true_cef_values_and_slopes():
    assert true_cef(2.0) == pytest.approx(87.51, abs=1e-9)
    assert true_cef(20.0) == pytest.approx(178.70, abs=1e-9)
    for left, slope in ((3.0, 8.13), (6.0, 5.41), (11.0, 7.19), (16.0, 0.76)):
        assert true_cef(left + 1.0) - true_cef(left) == pytest.approx(slope, abs=1e-9)
    ages = np.linspace(*AGE_RANGE, 200)
    assert np.all(np.diff(true_cef(ages)) > 0)


def test_true_cqf_values_and_monotonicity():
    assert true_cqf(0.5, 7.0) == pytest.approx(true_cef(7.0), abs=1e-12)
    spread = true_cqf(0.95, 7.0) - true_cqf(0.05, 7.0)
    assert spread == pytest.approx(2.0 * 4.0 * norm.ppf(0.95), abs=1e-9)
    us = np.linspace(0.05, 0.95, 10)
    assert np.all(np.diff(true_cqf(us, 7.0)) > 0)
    ages = np.linspace(2, 20, 30)
    assert np.all(np.diff(true_cqf(0.3, ages)) > 0)
    surface = true_cqf(us[:, None], ages[None, :])
    assert surface.shape == (10, 30)
    for u in (0.0, 1.0, -0.2):
        with pytest.raises(OutOfRangeError):
            true_cqf(u, 7.0)


def test_default_estimators_cover_all_methods():
    specs = default_estimators(_small_axis())
    assert [s.method for s in specs] == ["kernel", "loclinear", "bspline", "fourier"]
    assert specs[3].fourier_linear is False
    assert specs[2].knots == DEFAULT_KNOTS


def test_config_validation():
    McConfig(n=50, reps=2, estimators=_kernel_only())
    with pytest.raises(ShapeMismatchError):
        McConfig(beta=(1.0, 2.0))
    with pytest.raises(OutOfRangeError):
        McConfig(sigma=-1.0)
    with pytest.raises(OutOfRangeError):
        McConfig(n=0)
    with pytest.raises(ShapeMismatchError):
        McConfig(n=5, x_design=[2.0, 3.0])
    with pytest.raises(OutOfRangeError):
        McConfig(n=2, x_design=[2.0, 25.0])
    with pytest.raises(OutOfRangeError):
        McConfig(reps=0)
    with pytest.raises(OutOfRangeError):
        McConfig(estimators=("kernel",))
    with pytest.raises(OutOfRangeError):
        McConfig(taus=[0.5, 0.4])
    with pytest.raises(OutOfRangeError):
        McConfig(taus=[0.5, 1.0])
    with pytest.raises(OutOfRangeError):
        McConfig(alpha=1.0)
    with pytest.raises(OutOfRangeError):
        McConfig(bootstrap_B=1)
    with pytest.raises(OutOfRangeError):
        McConfig(lambda_grid=(1.5,))
    with pytest.raises(OutOfRangeError):
        McConfig(lambda_grid=())


def test_config_defaults():
    cfg = McConfig()
    assert cfg.n == BENCHMARK_N
    np.testing.assert_allclose(cfg.x_design, np.linspace(2.0, 20.0, BENCHMARK_N))
    assert len(cfg.estimators) == 4
    assert len(cfg.estimators[0].eval_axis) == 100
    assert cfg.taus.size == 19
    assert cfg.lambda_grid == (0.5,)


def test_simulate_rep_determinism():
    cfg = McConfig(n=40, reps=3, estimators=_kernel_only())
    a = simulate_rep(cfg, 0)
    b = simulate_rep(cfg, 0)
    np.testing.assert_array_equal(a.y, b.y)
    c = simulate_rep(cfg, 1)
    assert not np.array_equal(a.y, c.y)
    with pytest.raises(OutOfRangeError):
        simulate_rep(cfg, -1)


def test_simulate_rep_zero_noise_hits_the_truth():
    cfg = McConfig(n=25, sigma=0.0, reps=1, estimators=_kernel_only())
    data = simulate_rep(cfg, 0)
    np.testing.assert_allclose(data.y, true_cef(cfg.x_design), rtol=1e-12)


def test_simulate_rep_noise_is_centered():
    cfg = McConfig(n=10000, sigma=2.0, reps=1, seed=5, estimators=_kernel_only())
    data = simulate_rep(cfg, 0)
    resid = data.y - true_cef(cfg.x_design)
    assert abs(resid.mean()) <= 4.0 * 2.0 / 100.0


def test_run_experiment_validation():
    cfg = McConfig(n=30, reps=1, estimators=_kernel_only())
    with pytest.raises(OutOfRangeError):
        run_experiment(cfg, table=4)
    with pytest.raises(OutOfRangeError):
        run_experiment(cfg, table=1, threads=0)


def test_errors_table_shape_and_ratios():
    cfg = McConfig(
        n=80,
        reps=3,
        seed=2,
        estimators=(
            EstimatorSpec("kernel", MEAN_LOSS, _small_axis(), bandwidth=1.5),
            EstimatorSpec("fourier", MEAN_LOSS, _small_axis(), n_terms=2),
        ),
    )
    report = run_experiment(cfg, table=1, threads=1)
    assert report.table == 1
    assert len(report.rows) == 2 * 3
    assert report.columns[:3] == ["method", "p", "error_original"]
    for row in report.rows:
        assert row["error_original"] > 0
        for lab in ("rearranged", "isotonized", "blend_0.5"):
            assert 0.0 <= row["ratio_" + lab] <= 1.0 + 1e-9
    errors = report.per_rep["errors"]
    assert errors.shape == (3, 2, 4, 3)
    orig = errors[:, :, :1, :]
    assert np.all(errors[:, :, 1:, :] <= orig * (1 + 1e-10) + 1e-14)


def test_errors_table_is_thread_invariant():
    cfg = McConfig(n=60, reps=4, seed=7, estimators=_kernel_only())
    t1 = run_experiment(cfg, table=1, threads=1).to_csv_text()
    t3 = run_experiment(cfg, table=1, threads=3).to_csv_text()
    assert t1 == t3


def test_errors_table_degenerate_noise_reports_unit_ratios():
    # zero noise and a constant truth make every fit exact: original errors
    # are 0 and the 0/0 ratios are reported as 1
    cfg = McConfig(
        beta=(5.0, 0.0, 0.0, 0.0, 0.0),
        sigma=0.0,
        n=30,
        reps=2,
        estimators=_kernel_only(),
    )
    report = run_experiment(cfg, table=1, threads=1)
    for row in report.rows:
        assert row["error_original"] == 0.0
        assert row["ratio_rearranged"] == 1.0
        assert row["ratio_isotonized"] == 1.0


def test_quantile_table_runs_and_improves():
    cfg = McConfig(
        n=120,
        reps=2,
        seed=3,
        taus=np.linspace(0.2, 0.8, 5),
        estimators=_kernel_only(grid=12, bandwidth=2.0),
    )
    report = run_experiment(cfg, table=2, threads=1)
    assert report.table == 2
    errors = report.per_rep["errors"]
    assert errors.shape == (2, 1, 4, 3)
    orig = errors[:, :, :1, :]
    assert np.all(errors[:, :, 1:, :] <= orig * (1 + 1e-10) + 1e-14)
    for row in report.rows:
        assert row["p"] in ("1", "2", "inf")


def test_bands_table_reports_coverage_and_lengths():
    cfg = McConfig(
        n=80,
        reps=8,
        seed=4,
        bootstrap_B=16,
        estimators=_kernel_only(grid=15),
    )
    report = run_experiment(cfg, table=3, threads=1)
    assert report.table == 3
    assert len(report.rows) == 3
    for row in report.rows:
        assert 0.0 <= row["coverage_original"] <= 1.0
        assert row["length_original"] > 0
        for lab in ("rearranged", "isotonized", "blend_0.5"):
            assert row["coverage_" + lab] >= row["coverage_original"] - 1e-12
            assert row["length_ratio_" + lab] <= 1.0 + 1e-9
    assert np.all(report.per_rep["criticals"] > 0)
    lengths = report.per_rep["lengths"]
    assert np.all(lengths[:, :, 1:, :] <= lengths[:, :, :1, :] * (1 + 1e-10) + 1e-14)


def test_bands_table_is_thread_invariant():
    cfg = McConfig(
        n=60, reps=4, seed=8, bootstrap_B=12, estimators=_kernel_only(grid=10)
    )
    t1 = run_experiment(cfg, table=3, threads=1).to_csv_text()
    t2 = run_experiment(cfg, table=3, threads=2).to_csv_text()
    assert t1 == t2


def test_report_csv_text_format():
    cfg = McConfig(n=50, reps=2, seed=6, estimators=_kernel_only())
    text = run_experiment(cfg, table=1, threads=1).to_csv_text()
    lines = text.splitlines()
    assert lines[0].startswith("method,p,error_original,ratio_")
    assert len(lines) == 1 + 3
    assert text.endswith("\n")
    # every non-string cell parses back as a float
    for line in lines[1:]:
        cells = line.split(",")
        assert cells[0] == "kernel"
        assert cells[1] in ("1", "2", "inf")
        [float(c) for c in cells[2:]]


def test_config_from_dict_defaults_and_conversions():
    cfg = config_from_dict({})
    assert cfg.n == BENCHMARK_N
    cfg = config_from_dict(
        {"n": 40, "reps": 2, "grid": 12, "taus": {"lo": 0.25, "hi": 0.75, "step": 0.25}}
    )
    assert cfg.n == 40
    np.testing.assert_allclose(cfg.taus, [0.25, 0.5, 0.75])
    assert all(len(s.eval_axis) == 12 for s in cfg.estimators)
    cfg = config_from_dict(
        {
            "n": 40,
            "estimators": [
                {"method": "kernel", "bandwidth": 1.5},
                {"method": "fourier", "n_terms": 2},
            ],
        }
    )
    assert len(cfg.estimators) == 2
    assert cfg.estimators[0].bandwidth == 1.5
    assert cfg.estimators[1].fourier_linear is True


def test_config_from_dict_rejects_unknown_keys():
    with pytest.raises(OutOfRangeError):
        config_from_dict({"reps": 2, "replications": 5})
    with pytest.raises(OutOfRangeError):
        config_from_dict({"estimators": [{"bandwidth": 1.0}]})
    with pytest.raises(OutOfRangeError):
        config_from_dict({"estimators": [{"method": "kernel", "bandwidth": 1, "h": 2}]})
    with pytest.raises(OutOfRangeError):
        config_from_dict({"grid": 1})
