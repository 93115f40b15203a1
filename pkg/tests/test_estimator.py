import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from miscible_slip.estimator import SlipFlowSimulator

BASE = {"physics": {"force": "vortex", "force_params": {"amplitude": 5.0}, "C0": "cosine", "d": 0.1},
        "discretization": {"nx": 4, "ny": 4}}


@pytest.fixture(scope="module")
def fitted():
    return SlipFlowSimulator(config=BASE, T=0.02, dt=0.01).fit()


def test_params_round_trip_and_clone():
    est = SlipFlowSimulator(config=BASE, nu0=2.0, law="sawtooth")
    params = est.get_params()
    assert params["nu0"] == 2.0 and params["law"] == "sawtooth" and params["k"] is None
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(nx=8)
    assert est._build_config().nx == 8 and est._build_config().law == "sawtooth"


def test_fit_exposes_run_results(fitted):
    assert fitted.config_.T == 0.02 and fitted.config_.nx == 4
    assert len(fitted.records_) == 2 and fitted.state_.t == pytest.approx(0.02)
    assert fitted.summary_["steps"] == 2


def test_predict_and_transform_agree_with_state(fitted):
    X = np.array([[0.25, 0.5], [0.5, 0.5], [1.0, 1.0]])
    u = fitted.predict(X)
    assert u.shape == (3, 2) and np.allclose(u[2], 0.0)
    Z = fitted.transform(X)
    assert Z.shape == (3, 4)
    assert np.array_equal(Z[:, :2], u)
    S = fitted.spaces_
    assert np.array_equal(Z[:, 3], S.evaluate(fitted.state_.C, X))
    grid = np.column_stack([np.linspace(0, 1, 5), np.full(5, 0.3)])
    assert np.isfinite(fitted.transform(grid)).all()
    assert fitted.score() == -fitted.records_[-1].total


def test_input_validation(fitted):
    with pytest.raises(ValueError, match="outside"):
        fitted.predict(np.array([[1.5, 0.5]]))
    with pytest.raises(ValueError, match="shape"):
        fitted.predict(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        fitted.predict(np.array([[np.nan, 0.5]]))
    with pytest.raises(NotFittedError):
        SlipFlowSimulator().predict(np.zeros((1, 2)))


def test_fit_is_reproducible():
    a = SlipFlowSimulator(config=BASE, T=0.01).fit()
    b = SlipFlowSimulator(config=BASE, T=0.01).fit()
    assert np.array_equal(a.state_.u, b.state_.u)
