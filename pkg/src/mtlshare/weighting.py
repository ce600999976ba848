"""Per-task weights: SVD reweighting, learned uncertainty weights, uniform."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_count, check_matrix, check_vector
from .exceptions import ArgumentError, DivergenceError
from .linalg import make_rng, pinv, rank_r_approx, svd
from .model import as_xy, task_gradient, task_losses
from .trainer import JOINT, TrainConfig

#: Squared singular-value energy the default SVD-reweighting rank must capture.
ENERGY_FRACTION = 0.95
#: Lower clamp on the learned noise scale.
SIGMA_FLOOR = 1e-8


def uniform_weights(k):
    return np.ones(check_count(k, "k"))


def task_directions(X, labels, least_squares=False):
    """Stack per-task directions ``X^T y_i`` (or ``X^+ y_i``) as columns."""
    X = check_matrix(X, "X")
    ys = [check_vector(y, f"labels[{i}]", size=X.shape[0]) for i, y in enumerate(labels)]
    if not ys:
        raise ArgumentError("need at least one task")
    proj = pinv(X) if least_squares else X.T
    return np.column_stack([proj @ y for y in ys])


def energy_rank(s, fraction=ENERGY_FRACTION):
    """Smallest ``r`` whose leading squared singular values reach ``fraction`` of the total."""
    energy = np.cumsum(np.asarray(s, dtype=np.float64) ** 2)
    if energy[-1] == 0.0:
        return 1
    return int(np.searchsorted(energy, fraction * energy[-1]) + 1)


def svd_reweight(X, labels, r=None, least_squares=False):
    """Weights ``alpha_i = |U_r^T theta_i|`` from the rank-``r`` span of the task directions.

    Parameters
    ----------
    X : ndarray of shape (m, d)
        Covariates shared by every task.
    labels : list of ndarray of shape (m,)
    r : int, optional
        Rank of the principal subspace, ``1 <= r <= k``. Defaults to the
        smallest rank capturing 95% of the squared singular-value energy.
    least_squares : bool
        Use ``X^+ y_i`` instead of ``X^T y_i`` as the task direction.

    Returns
    -------
    weights : ndarray of shape (k,)
    rank : int
        The rank actually used.
    """
    T = task_directions(X, labels, least_squares)
    k = T.shape[1]
    if r is None:
        r = min(energy_rank(svd(T).s), k) if np.any(T) else 1
    else:
        r = check_count(r, "r")
        if r > k:
            raise ArgumentError(f"r={r} must not exceed the number of tasks k={k}")
    if not np.any(T):
        return np.zeros(k), r
    U = rank_r_approx(T, min(r, min(T.shape))).U
    return np.linalg.norm(U.T @ T, axis=0), r


@dataclass
class UncertaintyResult:
    weights: np.ndarray
    sigmas: np.ndarray
    model: object
    clamped: bool


def uncertainty_weights(tasks, model, cfg=TrainConfig(), fit_model=True, init_log_sigma=0.0):
    """Learn per-task noise scales by SGD on ``sum_i L_i / (2 sigma_i^2) + log sigma_i``.

    ``L_i`` is task ``i``'s batch mean squared error. The model is trained
    jointly unless ``fit_model=False``. Noise scales are parameterized by
    ``log sigma`` and clamped at ``1e-8``; ``clamped`` reports whether the
    clamp was hit. Returned weights are ``1 / sigma_i^2``.
    """
    pairs = [as_xy(t) for t in tasks]
    k = len(pairs)
    if k != model.n_tasks:
        raise ArgumentError(f"model has {model.n_tasks} heads but {k} tasks were given")
    if cfg.batching == JOINT:
        X0 = pairs[0][0]
        if any(X.shape != X0.shape or not np.array_equal(X, X0) for X, _ in pairs[1:]):
            raise ArgumentError("joint batching requires identical covariates across tasks")
    model = model.copy()
    log_sigma = np.full(k, float(init_log_sigma))
    floor = np.log(SIGMA_FLOOR)
    clamped = False
    lr = cfg.learning_rate

    def step(i, X, y):
        nonlocal clamped
        n = X.shape[0]
        prec = np.exp(-2.0 * log_sigma[i])
        loss, dB, dA, dR = task_gradient(model, X, y, i, scale=1.0 / n)
        if fit_model:
            # d/dparam of L/(2 sigma^2)
            model.heads[i] -= lr * 0.5 * prec * dA
            if not cfg.freeze_shared:
                model.shared -= lr * 0.5 * prec * dB
        # d/ds of L e^{-2s}/2 + s
        log_sigma[i] -= lr * (1.0 - loss * prec)
        if log_sigma[i] < floor:
            log_sigma[i] = floor
            clamped = True

    initial = task_losses(model, pairs).sum()
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, cfg.epochs + 1):
            rng = make_rng((cfg.seed, epoch))
            if cfg.batching == JOINT:
                X = pairs[0][0]
                perm = rng.permutation(X.shape[0])
                for s in range(0, X.shape[0], cfg.batch_size):
                    idx = perm[s:s + cfg.batch_size]
                    for i, (_, y) in enumerate(pairs):
                        step(i, X[idx], y[idx])
            else:
                jobs = []
                for i, (X, _) in enumerate(pairs):
                    perm = rng.permutation(X.shape[0])
                    jobs.extend((i, perm[s:s + cfg.batch_size])
                                for s in range(0, X.shape[0], cfg.batch_size))
                for j in rng.permutation(len(jobs)):
                    i, idx = jobs[j]
                    step(i, pairs[i][0][idx], pairs[i][1][idx])
            total = task_losses(model, pairs).sum()
            if not (np.isfinite(total) and np.all(np.isfinite(log_sigma))) or \
                    total > cfg.divergence_factor * max(initial, 1e-300):
                raise DivergenceError(f"uncertainty training diverged at epoch {epoch}", epoch=epoch)
    sigmas = np.exp(log_sigma)
    return UncertaintyResult(1.0 / sigmas**2, sigmas, model, clamped)
