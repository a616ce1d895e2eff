import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import canned
from damageplast import ConfigurationError, EnergeticVerifier, IncrementalEnergyMinimizer
from damageplast.energetics import CompetitorSpec
from damageplast.estimators import FEATURE_NAMES


def test_params_and_clone():
    sc = canned("tiny_bar")
    est = IncrementalEnergyMinimizer(sc, n_steps=6, stationarity_tol=1e-8)
    p = est.get_params()
    assert p["n_steps"] == 6 and p["scenario"] is sc
    c = clone(est)
    assert c.get_params()["stationarity_tol"] == 1e-8
    assert not hasattr(c, "trajectory_")
    est.set_params(n_steps=4)
    assert est.n_steps == 4


def test_fit_predict_transform():
    sc = canned("tiny_bar")
    est = IncrementalEnergyMinimizer(sc, n_steps=6).fit()
    assert len(est.trajectory_) == 7
    times = np.array([0.0, 0.5, 1.0])
    states = est.predict(times)
    assert len(states) == 3
    assert np.array_equal(states[2].chi, est.trajectory_[-1].fields.chi)
    X = est.transform(times[:, None])
    assert X.shape == (3, len(FEATURE_NAMES))
    assert X[2, 0] == est.trajectory_[-1].energy.total
    assert X[0, 5] == 0.0
    assert list(est.get_feature_names_out()) == list(FEATURE_NAMES)
    # piecewise constant between grid times
    assert np.array_equal(est.transform([0.51]), est.transform([0.5]))


def test_input_checks():
    sc = canned("tiny_bar")
    with pytest.raises(NotFittedError):
        IncrementalEnergyMinimizer(sc).predict([0.1])
    est = IncrementalEnergyMinimizer(sc).fit()
    with pytest.raises(ValueError):
        est.transform([2.0])
    with pytest.raises(ValueError):
        est.transform(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        est.transform([np.nan])
    with pytest.raises(ConfigurationError):
        IncrementalEnergyMinimizer("tiny_bar.cfg").fit()


def test_verifier():
    sc = canned("tiny_bar")
    traj = IncrementalEnergyMinimizer(sc).fit().trajectory_
    specs = [CompetitorSpec("uniform-damage-drop", 20, delta=0.5), CompetitorSpec("elastic-rebalance", 1)]
    ver = EnergeticVerifier(sc, specs=specs).fit(traj)
    assert ver.score() == 1.0
    assert ver.predict([0.0, 1.0]).tolist() == [True, True]
    assert clone(ver).get_params()["specs"] == specs
