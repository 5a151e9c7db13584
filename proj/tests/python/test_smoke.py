"""Smoke tests of the Python extension module."""
import csv
import math
import os

import pytest

import meta_risk_lab as mrl


def block(**extra):
    b = {"d": 3, "T": 40, "n1": 20, "n2": 5, "m": 15, "beta_tr": 0.0, "beta_te": 0.2,
         "noise_sigma": 0.7,
         "data_spectrum": {"kind": "values", "values": [1.0, 0.5, 0.25]},
         "task_spectrum": {"kind": "values", "values": [0.1, 0.2, 0.3]},
         "theta_star": [1.0, -0.5, 0.25], "omega0": "zero"}
    b.update(extra)
    return b


def test_version():
    assert mrl.__version__


def test_spectra_and_meta_covariance():
    lam = mrl.log_decay_spectrum(3, 2.0)
    assert lam[0] == pytest.approx(2.0813689810056078, rel=1e-14)
    assert mrl.meta_covariance([1.0], 1, 0.5) == [pytest.approx(0.75)]
    assert mrl.meta_covariance(lam, 7, 0.0) == lam
    assert mrl.c_rate([1.0], 0.5) == pytest.approx(3 + 60 * math.sqrt(420), rel=1e-14)
    assert mrl.bayes_error([1.0], [1.0], 1, 0.5, 1.0) == pytest.approx(1.0)


def test_bounds_match_reference():
    b = mrl.evaluate_bounds(block())
    assert b["upper"] == pytest.approx(0.85483542051917989, rel=1e-12)
    assert b["lower"] == pytest.approx(0.0011203884447160809, rel=1e-12)
    cfg = mrl.resolve_config(block())
    assert cfg["derived"]["alpha"] == pytest.approx(0.095238095238095238, rel=1e-14)


def test_errors_are_typed():
    with pytest.raises(mrl.ParameterDomainError, match="1/λ1"):
        mrl.meta_covariance([1.0], 3, 1.5)
    with pytest.raises(mrl.ConfigError, match="unknown field"):
        mrl.resolve_config(block(bogus=1))
    with pytest.raises(mrl.PreconditionError):
        mrl.evaluate_bounds(block(alpha=10.0))
    assert issubclass(mrl.ConfigError, mrl.Error)


def test_oracles():
    results = mrl.run_oracles(block(), seed=3, mc_reps=5000, pairs=5, tasks=2000)
    assert [r["name"] for r in results] == ["meta_covariance", "gradient_finite_difference",
                                            "gradient_dense", "risk_mc", "bayes_error"]
    assert all(r["passed"] for r in results), results


def test_run_plan(tmp_path):
    plan = {"schema": 1, "kind": "single_vs_meta", "seed": 1, "replications": 2,
            "config": block(), "sweep": {"T": [20, 40]}}
    manifest = mrl.run_plan(plan, tmp_path / "out")
    assert manifest["status"] == "ok"
    with open(tmp_path / "out" / "curves.csv") as f:
        rows = list(csv.DictReader(f))
    assert {r["tag"] for r in rows} == {"maml", "single_task"}
    again = mrl.run_plan(plan, tmp_path / "again", jobs=2)
    assert again["outputs"] == manifest["outputs"]


def test_load_shipped_plan():
    plans = os.environ.get("META_RISK_LAB_PLANS")
    if not plans:
        pytest.skip("plan directory not given")
    p = mrl.load_plan(os.path.join(plans, "rate_check.json"), ["replications=3"])
    assert p["kind"] == "rate_check"
    assert p["replications"] == 3
