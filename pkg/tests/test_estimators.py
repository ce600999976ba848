import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from mtlshare.closed_form import capacity_construction
from mtlshare.estimators import SharedSubspaceRegressor, SVDTaskWeighter
from mtlshare.exceptions import ArgumentError
from mtlshare.weighting import svd_reweight


def data(k=2, m=80, d=5, seed=0):
    rng = np.random.default_rng(seed)
    thetas = [rng.standard_normal(d) for _ in range(k)]
    Xs = [rng.standard_normal((m, d)) for _ in range(k)]
    return Xs, [X @ t for X, t in zip(Xs, thetas)], thetas


def test_exact_fit_predict():
    Xs, ys, thetas = data()
    est = SharedSubspaceRegressor(r=2).fit(Xs, ys)
    np.testing.assert_allclose(est.predict(Xs[1], task=1), ys[1], atol=1e-8)
    assert est.score(Xs[0], ys[0]) == pytest.approx(1.0)
    assert est.shared_.shape == (5, 2) and est.n_tasks_ == 2


def test_sgd_fit():
    Xs, ys, _ = data()
    est = SharedSubspaceRegressor(r=2, solver="sgd", learning_rate=2e-2, epochs=300, restarts=1)
    est.fit(Xs, ys)
    assert est.trace_.final < est.trace_.total[0]
    assert est.score(Xs[0], ys[0], task=0) > 0.9


def test_params_and_clone():
    est = SharedSubspaceRegressor(r=3, solver="sgd", random_state=7)
    assert clone(est).get_params() == est.get_params()
    assert est.set_params(r=1).r == 1


def test_not_fitted():
    with pytest.raises(NotFittedError):
        SharedSubspaceRegressor().predict(np.ones((2, 3)))


def test_invalid():
    Xs, ys, _ = data()
    with pytest.raises(ArgumentError):
        SharedSubspaceRegressor(solver="exact", activation="relu").fit(Xs, ys)
    with pytest.raises(ArgumentError):
        SharedSubspaceRegressor(solver="adam").fit(Xs, ys)
    with pytest.raises(ArgumentError):
        SharedSubspaceRegressor().fit(Xs, ys[:1])


def test_matches_capacity_optimum():
    Xs, ys, thetas = data(k=3, d=6)
    est = SharedSubspaceRegressor(r=3).fit(Xs, ys)
    ref = capacity_construction(thetas, 3)
    for i in range(3):
        np.testing.assert_allclose(est.model_.effective_parameter(i), ref.effective_parameter(i),
                                   atol=1e-6)


def test_weighter():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((30, 4))
    Y = rng.standard_normal((30, 3))
    tw = SVDTaskWeighter(rank=2).fit(X, Y)
    np.testing.assert_allclose(tw.weights_, svd_reweight(X, list(Y.T), 2)[0])
    np.testing.assert_allclose(tw.transform(Y), Y * tw.weights_)
    assert SVDTaskWeighter().fit(X, Y).rank_ >= 1
    with pytest.raises(ArgumentError):
        tw.transform(Y[:, :2])
