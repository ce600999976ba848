"""Closed-form solvers for the linear shared-module model.

For fixed ``B`` the optimal heads are least-squares fits, so the linear
problem reduces to maximizing the projected label energy

    sum_i w_i * |P_{X_i B} y_i|^2

over ``B``. Two regimes have eigenvector solutions (identical covariances,
identical covariates); the general case is handled by a quasi-Newton
search on the same reduced objective.
"""

import numpy as np
from scipy.optimize import minimize

from ._validation import check_count, check_matrix, check_vector
from .exceptions import ArgumentError, NumericalFailure, PreconditionError
from .linalg import make_rng, numerical_rank, pinv, svd, RANK_RTOL
from .model import LINEAR, MTLModel, as_xy, check_weights

#: Relative Frobenius tolerance for "identical" covariance / covariates.
SAME_TOL = 1e-8


def stl_solve(task):
    """Single-task least squares ``theta = (X^T X)^+ X^T y``, computed as ``X^+ y``."""
    X, y = as_xy(task)
    return pinv(X) @ y


def head_given_shared(task, B):
    """Optimal head ``(B^T X^T X B)^+ B^T X^T y`` for a fixed shared module."""
    X, y = as_xy(task)
    B = check_matrix(B, "B")
    return pinv(X @ B) @ y


def _projected_energy(X, y, B):
    H = X @ B
    fit = H @ (pinv(H) @ y)
    return float(fit @ fit)


def reduced_objective(B, tasks, weights=None):
    """``sum_i w_i <B (B^T X_i^T X_i B)^+ B^T, X_i^T y_i y_i^T X_i>``.

    Equals ``sum_i w_i |y_i|^2`` minus the weighted squared error attained
    with the optimal heads for ``B``.
    """
    B = check_matrix(B, "B")
    if not np.any(B):
        raise ArgumentError("B must be nonzero")
    pairs = [as_xy(t) for t in tasks]
    w = check_weights(weights, len(pairs))
    return float(sum(wi * _projected_energy(X, y, B) for wi, (X, y) in zip(w, pairs)))


def _linear_model(B, pairs, info):
    heads = [pinv(X @ B) @ y for X, y in pairs]
    return MTLModel(B, heads, LINEAR, info=info)


def capacity_construction(thetas, r):
    """Zero-loss model when ``r`` is at least the number of tasks.

    ``B`` is an orthonormal basis whose leading columns span the task
    parameters, so ``B @ A_i == theta_i`` for every task.
    """
    T = np.column_stack([check_vector(t, f"thetas[{i}]") for i, t in enumerate(thetas)])
    d, k = T.shape
    r = check_count(r, "r")
    if r < k:
        raise ArgumentError(f"capacity construction needs r >= k (r={r}, k={k})")
    if r > d:
        raise ArgumentError(f"r={r} exceeds the dimension d={d}")
    Q, R = np.linalg.qr(T, mode="complete")
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    Q[:, :k] *= signs
    R[:k] *= signs[:, None]
    B = Q[:, :r]
    heads = [np.concatenate([R[:min(k, d), i], np.zeros(r - min(k, d))]) for i in range(k)]
    return MTLModel(B, heads, LINEAR, info={"solver": "capacity"})


def _relative_gap(M1, M2):
    scale = max(np.linalg.norm(M1), np.linalg.norm(M2), 1.0)
    return np.linalg.norm(M1 - M2) / scale


def _top_eigvecs(M, r):
    lam, C = np.linalg.eigh((M + M.T) / 2)
    order = np.argsort(lam)[::-1]
    lam, C = lam[order], C[:, order]
    tie = r < lam.size and abs(lam[r - 1] - lam[r]) <= 1e-10 * max(abs(lam[0]), 1.0)
    return lam, C[:, :r], bool(tie)


def solve_equal_covariance(tasks, weights=None, r=1):
    """Global optimum when every task shares the covariance ``X_i^T X_i``.

    Writing ``X_i = U_i D V^T``, the optimal ``B`` is ``V D^-1 C`` where
    ``C`` spans the top-``r`` eigenvectors of ``sum_i w_i U_i^T y_i y_i^T U_i``.
    ``info["tie_at_cut"]`` flags a degenerate eigenvalue at the cutoff (the
    optimum is then not unique).
    """
    pairs = [as_xy(t) for t in tasks]
    w = check_weights(weights, len(pairs))
    r = check_count(r, "r")
    Sigma = pairs[0][0].T @ pairs[0][0]
    for i, (X, _) in enumerate(pairs[1:], start=1):
        if X.shape[1] != Sigma.shape[0]:
            raise ArgumentError(f"task {i} has a different dimension")
        if _relative_gap(X.T @ X, Sigma) > SAME_TOL:
            raise PreconditionError(f"covariances of tasks 0 and {i} differ")
    lam, V = np.linalg.eigh(Sigma)
    order = np.argsort(lam)[::-1]
    lam, V = lam[order], V[:, order]
    keep = lam > RANK_RTOL * max(lam[0], 0.0)
    if not np.any(keep):
        raise PreconditionError("covariates are identically zero")
    V, dx = V[:, keep], np.sqrt(lam[keep])
    p = V.shape[1]
    if r > p:
        raise ArgumentError(f"r={r} exceeds the covariance rank {p}")
    M = np.zeros((p, p))
    for wi, (X, y) in zip(w, pairs):
        u = (y @ X @ V) / dx  # U_i^T y_i with U_i = X_i V D^-1
        M += wi * np.outer(u, u)
    eig, C, tie = _top_eigvecs(M, r)
    B = (V / dx) @ C
    total = float(sum(wi * (y @ y) for wi, (_, y) in zip(w, pairs)))
    info = {
        "solver": "equal_covariance",
        "objective": total - float(np.sum(eig[:r])),
        "eigenvalues": eig.tolist(),
        "tie_at_cut": tie,
    }
    return _linear_model(B, pairs, info)


def solve_same_covariates(X, labels, weights=None, r=1):
    """Global optimum when all tasks share the covariate matrix ``X``.

    The optimal column span is that of ``(X^T X)^-1 V D Q_r`` with
    ``X = U D V^T`` and ``Q_r`` the top-``r`` eigenvectors of
    ``sum_i w_i U^T y_i y_i^T U``. The returned ``B`` is the orthonormal
    basis of that span.
    """
    X = check_matrix(X, "X")
    labels = [check_vector(y, f"labels[{i}]", size=X.shape[0]) for i, y in enumerate(labels)]
    k = len(labels)
    w = check_weights(weights, k)
    r = check_count(r, "r")
    if r > k:
        raise ArgumentError(f"r={r} exceeds the number of tasks k={k}")
    if numerical_rank(X) < X.shape[1]:
        raise PreconditionError("X must have full column rank")
    U, D, V = svd(X)
    M = np.zeros((D.size, D.size))
    for wi, y in zip(w, labels):
        u = U.T @ y
        M += wi * np.outer(u, u)
    eig, Q, tie = _top_eigvecs(M, r)
    # (X^T X)^-1 V D Q = V D^-1 Q; orthonormalize for a canonical representative
    Bq, _ = np.linalg.qr((V / D) @ Q)
    total = float(sum(wi * (y @ y) for wi, y in zip(w, labels)))
    info = {
        "solver": "same_covariates",
        "objective": total - float(np.sum(eig[:r])),
        "eigenvalues": eig.tolist(),
        "tie_at_cut": tie,
    }
    return _linear_model(Bq, [(X, y) for y in labels], info)


def _reduced_value_and_grad(b, pairs, w, d, r):
    B = b.reshape(d, r)
    value = 0.0
    grad = np.zeros((d, r))
    for wi, (X, y) in zip(w, pairs):
        H = X @ B
        a, *_ = np.linalg.lstsq(H, y, rcond=None)
        fit = H @ a
        value += wi * float(fit @ fit)
        # envelope theorem: d/dB of the projected energy is 2 X^T (y - H a) a^T
        grad += (2.0 * wi) * np.outer(X.T @ (y - fit), a)
    return -value, -grad.ravel()


def fit_linear_mtl(tasks, weights=None, r=1, restarts=3, seed=0, init=None, max_iter=2000):
    """Linear shared-module fit by L-BFGS on the reduced objective.

    Runs ``restarts`` random starts (plus optional explicit ``init`` matrices)
    and keeps the one with the lowest training objective. Heads are the
    least-squares fits for the chosen ``B``; ``B`` is returned with
    orthonormal columns.
    """
    pairs = [as_xy(t) for t in tasks]
    w = check_weights(weights, len(pairs))
    r = check_count(r, "r")
    restarts = check_count(restarts, "restarts", minimum=0)
    d = pairs[0][0].shape[1]
    if any(X.shape[1] != d for X, _ in pairs):
        raise ArgumentError("all tasks must share the covariate dimension")
    if r > d:
        raise ArgumentError(f"r={r} exceeds the dimension d={d}")
    rng = make_rng(seed)
    starts = [check_matrix(np.asarray(B0).reshape(d, r), "init") for B0 in (init or [])]
    starts += [rng.standard_normal((d, r)) for _ in range(restarts)]
    if not starts:
        raise ArgumentError("need at least one start")
    total = float(sum(wi * (y @ y) for wi, (_, y) in zip(w, pairs)))
    best = None
    for B0 in starts:
        res = minimize(_reduced_value_and_grad, B0.ravel(), args=(pairs, w, d, r), jac=True,
                       method="L-BFGS-B", options={"maxiter": max_iter, "gtol": 1e-12, "ftol": 1e-15})
        if not np.isfinite(res.fun):
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise NumericalFailure("reduced-objective search produced no finite solution")
    Bq, _ = np.linalg.qr(best.x.reshape(d, r))
    info = {"solver": "lbfgs", "objective": total + float(best.fun), "starts": len(starts)}
    return _linear_model(Bq, pairs, info)


def greedy_error_bound(tasks, weights=None, r=1, restarts=3, seed=0):
    """Upper bound on the optimal rank-``r`` error from greedy deflation.

    Step ``j`` finds one direction ``b_j`` maximizing the rank-one projected
    energy ``lambda_j`` on the current covariates, then projects ``X_i b_j``
    off every column of ``X_i`` (tasks in list order). The model spanned by
    ``b_1..b_r`` attains error ``sum_i w_i |y_i|^2 - sum_{j<=r} lambda_j``,
    which equals ``opt + sum_{j>r} lambda_j`` once all directions are
    exhausted, with ``opt`` the weighted single-task residual.

    Returns
    -------
    dict
        ``lambdas`` (first ``r`` energies), ``opt``, ``bound`` and the
        greedy ``shared`` matrix (``d x r``).
    """
    pairs = [as_xy(t) for t in tasks]
    w = check_weights(weights, len(pairs))
    r = check_count(r, "r")
    d = pairs[0][0].shape[1]
    if r > d:
        raise ArgumentError(f"r={r} exceeds the dimension d={d}")
    total = float(sum(wi * (y @ y) for wi, (_, y) in zip(w, pairs)))
    explained = float(sum(wi * _projected_energy(X, y, np.eye(d)) for wi, (X, y) in zip(w, pairs)))
    current = [(X.copy(), y) for X, y in pairs]
    lambdas, directions = [], []
    for j in range(r):
        b = fit_linear_mtl(current, w, r=1, restarts=restarts, seed=(seed, j)).shared[:, 0]
        lambdas.append(float(sum(wi * _projected_energy(X, y, b[:, None])
                                 for wi, (X, y) in zip(w, current))))
        directions.append(b)
        for X, _ in current:
            u = X @ b
            nu = np.linalg.norm(u)
            if nu > 0:
                u /= nu
                X -= np.outer(u, u @ X)
    return {"lambdas": lambdas, "opt": total - explained, "bound": total - sum(lambdas),
            "shared": np.column_stack(directions)}
