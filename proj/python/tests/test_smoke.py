import math
import os
import pathlib

import numpy as np
import pytest

import cpmiss


def test_quantiles():
    assert cpmiss.conformal_quantile([float(i) for i in range(1, 10)], 0.1) == 9.0
    assert math.isinf(cpmiss.conformal_quantile([1.0, 2.0], 0.1))
    assert cpmiss.weighted_quantile([1.0, 2.0, 3.0], [1.0, 1.0, 1.0], 0.0, 0.5) == 2.0


def test_heom():
    assert cpmiss.heom_distance(np.array([0.0, 0.0]), np.array([0.5, 0.5]), [1.0, 1.0]) == pytest.approx(0.70711, abs=1e-5)
    assert cpmiss.heom_distance(np.array([np.nan, 0.0]), np.array([0.0, 0.0]), [1.0, 1.0]) == pytest.approx(1.0)


def test_example1():
    assert cpmiss.example1_conditional_variance("00", 0.0, noise_sd=2.0) == 4.0
    assert cpmiss.example1_conditional_variance("10", 0.3) >= 1.0


def _data(n, rng):
    X = rng.normal(size=(n, 3))
    y = X @ np.array([1.0, 2.0, -1.0]) + rng.normal(size=n)
    X[rng.random(size=X.shape) < 0.2] = np.nan
    return X, y


def test_pipeline_and_intervals():
    rng = np.random.default_rng(0)
    Xtr, ytr = _data(300, rng)
    Xca, yca = _data(150, rng)
    Xte, yte = _data(400, rng)
    pipe = cpmiss.fit_pipeline(Xtr, ytr)
    assert math.isfinite(pipe.predict(np.array([0.1, np.nan, 0.2])))
    for method in ["cp", "cqr", "cqr_mda_exact", "nexcp", "lcp"]:
        lo, hi, flags = cpmiss.predict_intervals(method, Xtr, ytr, Xca, yca, Xte)
        assert lo.shape == (400,) and len(flags) == 400
        assert np.all(lo <= hi)
        coverage = np.mean((lo <= yte) & (yte <= hi))
        assert coverage > 0.8


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        cpmiss.fit_pipeline(np.zeros((3, 2)), np.zeros(3), kind="forest")
    with pytest.raises(ValueError):
        cpmiss.run_experiment("[experiment]\nunknown = 1\n")


def test_run_experiment():
    src = pathlib.Path(os.environ.get("CPMISS_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))
    text = (src / "configs" / "minimal.toml").read_text()
    a = cpmiss.run_experiment(text, {"experiment.reps": "1"})
    b = cpmiss.run_experiment(text, {"experiment.reps": "1"})
    assert a == b
    assert a["groups"][0] == "mar"
    assert {c["method"] for c in a["cells"]} == {"cp", "nexcp"}
    assert all(0.0 <= c["coverage"] <= 1.0 for c in a["cells"])
