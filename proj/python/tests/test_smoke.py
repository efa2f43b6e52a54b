import numpy as np
import pytest

import dmlcqr


def test_generate_shapes_and_censoring():
    data = dmlcqr.generate(n=200, p=20, seed=3)
    assert data["z"].shape == (200, 19)
    assert abs(1.0 - data["t"].mean() - 0.3) < 0.01
    again = dmlcqr.generate(n=200, p=20, seed=3)
    assert np.array_equal(data["y"], again["y"])


def test_estimate_round_trip():
    data = dmlcqr.generate(n=800, p=20, seed=5)
    out = dmlcqr.estimate(data["y"], data["d"], data["z"], data["censor"], tau=0.5, K=2, seed=1)
    assert out["ci"][0] < out["theta"] < out["ci"][1]
    assert abs(out["theta"] - 1.0) < 0.5
    assert out["per_fold_theta"] == []
    dml1 = dmlcqr.estimate(data["y"], data["d"], data["z"], data["censor"], K=2, mode="dml1", seed=1)
    assert dml1["theta"] == pytest.approx(np.mean(dml1["per_fold_theta"]), abs=1e-12)
    twice = dmlcqr.estimate(data["y"], data["d"], data["z"], data["censor"], tau=0.5, K=2, seed=1, threads=2)
    assert twice["theta"] == out["theta"]


def test_errors_are_raised():
    data = dmlcqr.generate(n=200, p=20, seed=5)
    with pytest.raises(dmlcqr.Error):
        dmlcqr.estimate(data["y"], data["d"], data["z"], data["censor"], tau=1.5)
    with pytest.raises(dmlcqr.Error):
        dmlcqr.simulate(n=200, p=20, estimators=["lasso"], reps=1)


def test_solvers():
    rng = np.random.default_rng(0)
    x = np.column_stack([np.ones(101), rng.normal(size=(101, 2))])
    y = rng.normal(size=101)
    ones = np.ones((101, 1))
    assert dmlcqr.lasso_qr(ones, y, 0.5, 0.0)[0] == np.median(y)
    b = dmlcqr.lasso_ls(x, y, 0.0)
    assert np.allclose(b, np.linalg.lstsq(x, y, rcond=None)[0], atol=1e-8)
    t = (y + x[:, 1] > 0).astype(float)
    assert dmlcqr.lasso_logit(x, t, 1e9)[1] == 0.0


def test_simulate_metrics():
    m = dmlcqr.simulate(n=200, p=20, estimators=["oracle", "naive_ps"], reps=2, seed=1)
    assert set(m) == {"oracle", "naive_ps"}
    assert m["oracle"]["successes"] + m["oracle"]["failures"] == 2
