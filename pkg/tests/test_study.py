"""Richardson extrapolation, report round-trips and small study runs."""

import numpy as np
import pytest

from fmmbem import study


def test_observed_order_exact_power_law():
    f = [1.0 + 4.0 ** -k for k in range(1, 4)]
    assert np.isclose(study.observed_order(*f, c=4.0), 1.0, atol=1e-12)


def test_observed_order_equal_differences_is_zero():
    assert study.observed_order(1.0, 2.0, 3.0, c=4.0) == 0.0


def test_observed_order_rejects_non_monotone():
    with pytest.raises(ValueError):
        study.observed_order(1.0, 2.0, 1.5)
    with pytest.raises(ValueError):
        study.observed_order(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        study.observed_order(1.0, 2.0, 3.0, c=1.0)


def test_richardson_recovers_geometric_limit():
    limit, amp, ratio = 3.7, 0.9, 0.25
    f = [limit + amp * ratio ** k for k in range(3)]
    assert np.isclose(study.richardson(*f), limit, atol=1e-12)


def test_richardson_rejects_constant_sequence():
    with pytest.raises(ValueError):
        study.richardson(2.0, 2.0, 2.0)


def test_measured_drag_triple():
    """Three-level drag readings extrapolate near -0.085 at order ~0.45."""
    f = (-0.057, -0.070, -0.077)
    assert np.isclose(study.richardson(*f), -0.08517, atol=5e-4)
    order = study.observed_order(*f, c=4.0)
    assert 0.40 <= order <= 0.60


def test_report_roundtrip(tmp_path):
    rep = study.StudyReport(
        "convergence",
        params=dict(problem="laplace1", tol=1e-6),
        records=[dict(N=128, error=0.04, iterations=5),
                 dict(N=512, error=0.017, iterations=7)],
        derived=dict(order=0.66),
    )
    path = tmp_path / "report.txt"
    rep.write(path)
    back = study.StudyReport.read(path)
    assert back.kind == rep.kind
    assert back.params == rep.params
    assert back.records == rep.records
    assert back.derived == rep.derived


def test_report_csv(tmp_path):
    rep = study.StudyReport("scaling", records=[dict(N=10, time=0.1),
                                                dict(N=20, time=0.2, extra=1)])
    path = tmp_path / "r.csv"
    rep.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "N,time,extra"
    assert len(lines) == 3


def test_run_scaling_trivial_and_small():
    rep = study.run_scaling([1], p=3)
    assert rep.records[0]["time"] > 0.0
    rep = study.run_scaling([200, 800, 3200], p=3, seed=1)
    assert "slope" in rep.derived
    assert all(r["time"] > 0.0 for r in rep.records)


def test_run_convergence_small():
    rep = study.run_convergence("laplace2", [2, 3, 4], p=10, tol=1e-6)
    errs = [r["error"] for r in rep.records]
    assert errs[0] > errs[1] > errs[2]
    assert all(r["converged"] for r in rep.records)
    assert np.isfinite(rep.derived["order"])


def test_run_convergence_needs_three_levels():
    with pytest.raises(ValueError):
        study.run_convergence("laplace1", [2, 3])


def test_run_relaxation_comparison_small():
    rep = study.run_relaxation_comparison("laplace1", level=2, tol=1e-6,
                                          p_initial=10, repeats=1)
    assert rep.derived["solution_difference"] < 1e-5
    assert rep.derived["iterations_relaxed"] >= 1
    assert len(rep.records) == 2
