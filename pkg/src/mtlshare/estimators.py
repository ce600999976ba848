"""scikit-learn style estimators over the functional API.

Multi-task data is passed as parallel sequences: ``fit(Xs, ys)`` takes one
covariate matrix and one label vector per task, and ``predict(X, task=i)``
evaluates task ``i``'s output.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.metrics import r2_score
from sklearn.utils.validation import check_is_fitted

from ._validation import check_matrix, check_vector
from .closed_form import fit_linear_mtl
from .exceptions import ArgumentError
from .model import LINEAR, forward, init_model
from .trainer import TrainConfig, train_best_of
from .weighting import svd_reweight


def _task_pairs(Xs, ys):
    if len(Xs) != len(ys) or not Xs:
        raise ArgumentError("need one label vector per covariate matrix, at least one task")
    pairs = []
    for i, (X, y) in enumerate(zip(Xs, ys)):
        X = check_matrix(X, f"Xs[{i}]")
        pairs.append((X, check_vector(y, f"ys[{i}]", size=X.shape[0])))
    return pairs


class SharedSubspaceRegressor(RegressorMixin, BaseEstimator):
    """Hard-parameter-sharing model ``g(X_i B) A_i`` over several tasks.

    Parameters
    ----------
    r : int
        Width of the shared module.
    solver : {"exact", "sgd"}
        ``exact`` runs the reduced-objective search (linear only); ``sgd``
        runs mini-batch training with ``restarts`` random initializations.
    activation : {"linear", "relu"}
    weights : array-like, optional
        Task weights; uniform when omitted.
    learning_rate, epochs, batch_size : SGD settings.
    restarts : int
    random_state : int
    """

    def __init__(self, r=1, solver="exact", activation=LINEAR, weights=None, learning_rate=1e-3,
                 epochs=30, batch_size=50, restarts=3, random_state=0):
        self.r = r
        self.solver = solver
        self.activation = activation
        self.weights = weights
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.restarts = restarts
        self.random_state = random_state

    def fit(self, Xs, ys):
        pairs = _task_pairs(Xs, ys)
        if self.solver == "exact":
            if self.activation != LINEAR:
                raise ArgumentError("the exact solver covers the linear model only")
            self.model_ = fit_linear_mtl(pairs, self.weights, r=self.r, restarts=self.restarts,
                                         seed=self.random_state)
            self.trace_ = None
        elif self.solver == "sgd":
            cfg = TrainConfig(learning_rate=self.learning_rate, epochs=self.epochs,
                              batch_size=self.batch_size, seed=self.random_state,
                              weights=self.weights)
            d = pairs[0][0].shape[1]
            self.model_, self.trace_ = train_best_of(
                lambda i: init_model(d, self.r, len(pairs), self.activation,
                                     seed=(self.random_state, i)),
                pairs, cfg, self.restarts)
        else:
            raise ArgumentError(f"unknown solver {self.solver!r}")
        self.n_tasks_ = len(pairs)
        self.n_features_in_ = pairs[0][0].shape[1]
        return self

    @property
    def shared_(self):
        check_is_fitted(self, "model_")
        return self.model_.shared

    def predict(self, X, task=0):
        check_is_fitted(self, "model_")
        return forward(self.model_, check_matrix(X, "X"), task)

    def score(self, X, y, task=0):
        """Coefficient of determination for one task."""
        return r2_score(y, self.predict(X, task))


class SVDTaskWeighter(TransformerMixin, BaseEstimator):
    """Task weights from the principal subspace of per-task directions.

    ``fit(X, Y)`` takes shared covariates and an ``m x k`` label matrix (one
    column per task). ``transform(Y)`` rescales the label columns by the
    fitted weights.

    Parameters
    ----------
    rank : int, optional
        Subspace rank; chosen by the energy rule when omitted.
    least_squares : bool
        Use ``X^+ y_i`` instead of ``X^T y_i`` as the task direction.
    """

    def __init__(self, rank=None, least_squares=False):
        self.rank = rank
        self.least_squares = least_squares

    def fit(self, X, Y):
        X = check_matrix(X, "X")
        Y = check_matrix(np.asarray(Y, dtype=np.float64).reshape(X.shape[0], -1), "Y")
        self.weights_, self.rank_ = svd_reweight(X, list(Y.T), self.rank, self.least_squares)
        return self

    def transform(self, Y):
        check_is_fitted(self, "weights_")
        Y = np.asarray(Y, dtype=np.float64)
        if Y.ndim != 2 or Y.shape[1] != self.weights_.size:
            raise ArgumentError(f"expected {self.weights_.size} label columns")
        return Y * self.weights_
