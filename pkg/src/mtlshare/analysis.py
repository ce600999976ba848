"""Diagnostics: covariance similarity, transfer gaps and checks of the error bounds."""

import numpy as np
from scipy.stats import spearmanr

from ._validation import check_matrix, check_vector
from .closed_form import fit_linear_mtl, stl_solve
from .exceptions import ArgumentError
from .linalg import condition_number, cos_sin, subspace_sin, svd
from .model import LINEAR, forward, init_model
from .tasks import CLASSIFICATION
from .trainer import TrainConfig, train

#: Fraction of the covariance spectrum kept by the similarity score.
SCORE_ENERGY = 0.99


def _covariance_factor(X, fraction):
    # X^T X = V diag(s^2) V^T, so U D^{1/2} of the covariance is V * s
    _, s, V = svd(X)
    lam = s**2
    if lam[0] == 0.0:
        raise ArgumentError("covariance of the zero matrix has no principal subspace")
    cum = np.cumsum(lam)
    r = int(np.searchsorted(cum, fraction * cum[-1]) + 1)
    return V[:, :r] * s[:r]


def covariance_similarity_score(X1, X2, fraction=SCORE_ENERGY):
    """Normalized Frobenius alignment of the truncated covariance square roots.

    Each ``X_j^T X_j`` is truncated to the leading eigenvectors holding
    ``fraction`` of its eigenvalue sum; the score is
    ``|F1^T F2|_F / (|F1|_F |F2|_F)`` with ``F_j = U_j D_j^{1/2}``. It lies
    in ``[0, 1]`` and depends on ``X_j`` only through ``X_j^T X_j``.
    """
    X1, X2 = check_matrix(X1, "X1"), check_matrix(X2, "X2")
    if X1.shape[1] != X2.shape[1]:
        raise ArgumentError("score needs matching column dimensions")
    F1, F2 = _covariance_factor(X1, fraction), _covariance_factor(X2, fraction)
    num = np.linalg.norm(F1.T @ F2)
    return float(min(1.0, num / (np.linalg.norm(F1) * np.linalg.norm(F2))))


def angle_to_target(B, theta):
    """Sine of the angle between a one-column shared module and ``theta``."""
    b = np.asarray(B, dtype=np.float64)
    if b.ndim == 2 and b.shape[1] != 1:
        raise ArgumentError("angle_to_target needs a single-column shared module")
    return cos_sin(b.reshape(-1), theta)[1]


# -- transfer ---------------------------------------------------------------

def validation_metric(predictions, y, kind):
    """Accuracy (threshold 0.5) for classification, negative MSE otherwise."""
    if kind == CLASSIFICATION:
        return float(np.mean((predictions >= 0.5) == (y >= 0.5)))
    return -float(np.mean((predictions - y) ** 2))


def _spearman(pred, y):
    if np.ptp(pred) == 0 or np.ptp(y) == 0:
        return 0.0
    return float(spearmanr(pred, y).statistic)


def transfer_report(source, target, r=1, cfg=TrainConfig(), method="sgd", restarts=3,
                    activation=LINEAR, init_scale=None):
    """Compare co-training on ``(target, source)`` with training the target alone.

    Parameters
    ----------
    method : {"sgd", "exact"}
        ``"sgd"`` trains both models with :func:`train` from paired
        initializations (best of ``restarts`` for the multi-task model).
        ``"exact"`` uses the least-squares single-task solution and the
        reduced-objective search for the multi-task model (linear only).

    Returns
    -------
    dict
        ``gap`` (multi-task minus single-task target validation metric),
        both metrics, the Spearman-correlation gap, and ``angle_mtl``
        (sine between the shared direction and the target parameter, when
        defined).
    """
    for name, task in (("source", source), ("target", target)):
        if not task.has_split:
            raise ArgumentError(f"{name} task has no train/validation split")
    if source.d != target.d:
        raise ArgumentError("source and target dimensions differ")
    Xv, yv = target.validation_data()
    tasks = [target, source]
    if method == "exact":
        if activation != LINEAR:
            raise ArgumentError("exact transfer is only available for the linear model")
        mtl = fit_linear_mtl(tasks, r=r, restarts=restarts, seed=cfg.seed)
        stl_pred = Xv @ stl_solve(target)
    elif method == "sgd":
        d = target.d
        best = None
        for i in range(restarts):
            init = init_model(d, r, 2, activation, scale=init_scale, seed=(cfg.seed, i))
            fitted, trace = train(init, tasks, cfg)
            if best is None or trace.final < best[1].final:
                best = (fitted, trace)
        mtl = best[0]
        stl_init = init_model(d, r, 1, activation, scale=init_scale, seed=(cfg.seed, 0))
        stl, _ = train(stl_init, [target], cfg)
        stl_pred = forward(stl, Xv, 0)
    else:
        raise ArgumentError(f"unknown transfer method {method!r}")
    mtl_pred = forward(mtl, Xv, 0)
    mtl_metric = validation_metric(mtl_pred, yv, target.kind)
    stl_metric = validation_metric(stl_pred, yv, target.kind)
    report = {
        "gap": mtl_metric - stl_metric,
        "mtl_metric": mtl_metric,
        "stl_metric": stl_metric,
        "spearman_gap": _spearman(mtl_pred, yv) - _spearman(stl_pred, yv),
    }
    theta = target.theta_true
    if mtl.r == 1 and theta is not None and theta.ndim == 1 and np.any(mtl.shared):
        report["angle_mtl"] = angle_to_target(mtl.shared, theta)
    return report


def transfer_gap(source, target, r=1, cfg=TrainConfig(), **kwargs):
    """Target validation metric under co-training minus under single-task training."""
    return transfer_report(source, target, r, cfg, **kwargs)["gap"]


# -- bound checks -------------------------------------------------------------

def error_bound(c, noise_ratio):
    """``6c + noise_ratio / (1 - 3c)``; finite only for ``c < 1/3``."""
    if c >= 1.0 / 3.0:
        return float("inf")
    return 6.0 * c + noise_ratio / (1.0 - 3.0 * c)


def theorem1_check(source, target, solution, target_head=1, tol=1e-9):
    """Evaluate the rank-one transfer bound for a fitted model.

    With ``c = kappa(X_2) * sin(theta_1, theta_2)`` (source 1, target 2) the
    bound reads ``|B A_2 - theta_2| / |theta_2| <= 6c + |eps_2| / ((1 - 3c) |X_2 theta_2|)``.
    It is only asserted when ``c <= 1/3``; otherwise ``status`` is
    ``"assumption violated"`` and ``satisfied`` is ``None``.
    """
    for name, task in (("source", source), ("target", target)):
        if task.theta_true is None or np.asarray(task.theta_true).ndim != 1:
            raise ArgumentError(f"{name} task lacks a ground-truth parameter vector")
    if solution.r != 1:
        raise ArgumentError("the bound applies to a rank-one shared module")
    X2, y2 = target.train_data()
    th1, th2 = source.theta_true, target.theta_true
    kappa = condition_number(X2)
    sin12 = cos_sin(th1, th2)[1]
    c = kappa * sin12
    eps2 = y2 - X2 @ th2
    noise_ratio = float(np.linalg.norm(eps2) / np.linalg.norm(X2 @ th2))
    lhs = float(np.linalg.norm(solution.effective_parameter(target_head) - th2) / np.linalg.norm(th2))
    report = {
        "kappa": kappa,
        "sin": sin12,
        "c": c,
        "noise_ratio": noise_ratio,
        "lhs": lhs,
        "angle": angle_to_target(solution.shared, th2),
        "angle_bound": sin12 + c / kappa,
    }
    if c > 1.0 / 3.0:
        report.update(assumption=False, rhs=None, satisfied=None, status="assumption violated")
    else:
        rhs = error_bound(c, noise_ratio)
        ok = lhs <= rhs + tol
        report.update(assumption=True, rhs=rhs, satisfied=bool(ok), status="ok" if ok else "violated")
    return report


def sin_contraction_check(X, a, b, slack=1e-12):
    """Check ``|sin(Xa, Xb)| >= sin(a, b) / kappa(X)^2``."""
    X = check_matrix(X, "X")
    a, b = check_vector(a, "a", X.shape[1]), check_vector(b, "b", X.shape[1])
    Xa, Xb = X @ a, X @ b
    if not np.any(Xa) or not np.any(Xb):
        return {"degenerate": True, "lhs": None, "rhs": None, "holds": None}
    kappa = condition_number(X)
    lhs = cos_sin(Xa, Xb)[1]
    rhs = cos_sin(a, b)[1] / kappa**2
    return {"degenerate": False, "kappa": kappa, "lhs": lhs, "rhs": rhs,
            "holds": bool(lhs >= rhs - slack)}


def span_angle(B1, B2):
    """Sine of the largest principal angle between two column spans."""
    return subspace_sin(B1, B2)
