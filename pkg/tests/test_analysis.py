import numpy as np
import pytest
from hypothesis import given, strategies as st

from mtlshare.analysis import (angle_to_target, covariance_similarity_score, error_bound,
                               sin_contraction_check, span_angle, theorem1_check, transfer_gap,
                               transfer_report, validation_metric)
from mtlshare.closed_form import fit_linear_mtl
from mtlshare.exceptions import ArgumentError
from mtlshare.linalg import random_orthonormal
from mtlshare.model import MTLModel
from mtlshare.tasks import TaskDataset, gen_linear_task, split
from mtlshare.trainer import TrainConfig


def eig_score(X1, X2, fraction=0.99):
    """Score computed from full eigendecompositions of the two covariances."""
    factors = []
    for X in (X1, X2):
        lam, U = np.linalg.eigh(X.T @ X)
        lam, U = np.clip(lam[::-1], 0, None), U[:, ::-1]
        keep = int(np.argmax(np.cumsum(lam) >= fraction * lam.sum())) + 1
        factors.append(U[:, :keep] * np.sqrt(lam[:keep]))
    F1, F2 = factors
    return np.linalg.norm(F1.T @ F2) / (np.linalg.norm(F1) * np.linalg.norm(F2))


class TestScore:
    def test_rank_one_identical(self, rng):
        X = np.outer(rng.standard_normal(6), rng.standard_normal(4))
        assert covariance_similarity_score(X, X) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_eigenspaces(self):
        X1 = np.diag([3.0, 2.0, 0.0, 0.0])
        X2 = np.diag([0.0, 0.0, 5.0, 1.0])
        assert covariance_similarity_score(X1, X2) == 0.0

    def test_eigendecomposition_oracle(self, rng):
        X1, X2 = rng.standard_normal((20, 4)), rng.standard_normal((15, 4)) * [3, 1, 1, 0.1]
        assert covariance_similarity_score(X1, X2) == pytest.approx(eig_score(X1, X2), abs=1e-12)

    def test_truncation_drops_small_directions(self):
        X1 = np.diag([10.0, 0.5])
        X2 = np.diag([0.0, 1.0])
        # 0.25 of 100.25 is below the 1% tail, so X1 keeps only its first axis
        assert covariance_similarity_score(X1, X2) == 0.0
        assert covariance_similarity_score(X1, X2, fraction=1.0) > 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ArgumentError):
            covariance_similarity_score(np.ones((3, 2)), np.ones((3, 3)))

    @given(st.integers(0, 100_000))
    def test_invariances(self, seed):
        rng = np.random.default_rng(seed)
        X1 = rng.standard_normal((7, 4)) * rng.uniform(0.1, 5, 4)
        X2 = rng.standard_normal((9, 4)) * rng.uniform(0.1, 5, 4)
        base = covariance_similarity_score(X1, X2)
        assert 0.0 <= base <= 1.0
        P1, P2 = random_orthonormal(7, seed), random_orthonormal(9, seed + 1)
        assert covariance_similarity_score(P1 @ X1, P2 @ X2) == pytest.approx(base, abs=1e-10)
        Q = random_orthonormal(4, seed + 2)
        assert covariance_similarity_score(X1 @ Q, X2 @ Q) == pytest.approx(base, abs=1e-10)


class TestAngles:
    def test_parallel(self):
        assert angle_to_target(np.array([[2.0], [0.0]]), [1.0, 0.0]) == 0.0

    def test_orthogonal(self):
        assert angle_to_target(np.array([[0.0], [3.0]]), [1.0, 0.0]) == 1.0

    def test_zero_and_wide(self):
        with pytest.raises(ArgumentError):
            angle_to_target(np.zeros((2, 1)), [1.0, 0.0])
        with pytest.raises(ArgumentError):
            angle_to_target(np.eye(2), [1.0, 0.0])

    def test_span_angle(self):
        assert span_angle(np.eye(3)[:, :2], np.eye(3)[:, :2] @ [[1, 1], [1, -1]]) < 1e-14


class TestMetrics:
    def test_regression(self):
        assert validation_metric(np.array([1.0, 2.0]), np.array([1.0, 4.0]), "regression") == -2.0

    def test_classification_threshold(self):
        acc = validation_metric(np.array([0.5, 0.49, 0.9]), np.array([1.0, 1.0, 0.0]),
                                "classification")
        assert acc == pytest.approx(1 / 3)


class TestTransfer:
    def copy_pair(self, seed=0):
        theta = np.random.default_rng(seed).standard_normal(5)
        target = split(gen_linear_task(theta, 600, seed=seed), 500, seed=1)
        return target, target

    def test_saturated_exact(self):
        source, target = self.copy_pair()
        assert abs(transfer_gap(source, target, method="exact")) <= 1e-3

    def test_saturated_sgd(self):
        source, target = self.copy_pair(1)
        cfg = TrainConfig(learning_rate=1e-2, epochs=30)
        assert abs(transfer_gap(source, target, cfg=cfg, method="sgd")) <= 1e-3

    def test_report_fields(self):
        source, target = self.copy_pair(2)
        rep = transfer_report(source, target, method="exact")
        assert set(rep) >= {"gap", "mtl_metric", "stl_metric", "spearman_gap", "angle_mtl"}
        assert rep["angle_mtl"] <= 1e-6

    def test_requires_split(self):
        task = gen_linear_task(np.ones(3), 20)
        with pytest.raises(ArgumentError):
            transfer_gap(task, task)


def theorem_pair(theta1, theta2, X2, sigma=0.0, seed=0):
    rng = np.random.default_rng(seed)
    source = gen_linear_task(theta1, 400, seed=seed)
    y2 = X2 @ theta2 + sigma * rng.standard_normal(X2.shape[0])
    target = TaskDataset(X2, y2, theta_true=theta2)
    return source, target


class TestTransferBoundCheck:
    def test_identical_tasks(self, rng):
        theta = rng.standard_normal(4)
        source, target = theorem_pair(theta, theta, rng.standard_normal((30, 4)))
        model = fit_linear_mtl([source, target], r=1, seed=0)
        rep = theorem1_check(source, target, model, tol=1e-6)
        assert rep["c"] == 0.0 and rep["rhs"] == 0.0
        assert rep["lhs"] <= 1e-6 and rep["satisfied"]

    def test_formula(self, rng):
        d = 4
        theta1 = np.eye(d)[0]
        theta2 = np.sqrt(1 - 0.05**2) * theta1 + 0.05 * np.eye(d)[1]
        X2 = np.linalg.qr(rng.standard_normal((30, d)))[0]
        source, target = theorem_pair(theta1, theta2, X2, sigma=0.01, seed=3)
        rep = theorem1_check(source, target, fit_linear_mtl([source, target], r=1))
        assert rep["kappa"] == pytest.approx(1.0)
        assert rep["c"] == pytest.approx(0.05)
        eps = target.y - X2 @ theta2
        noise = np.linalg.norm(eps) / np.linalg.norm(X2 @ theta2)
        assert rep["rhs"] == pytest.approx(0.3 + noise / 0.85)

    def test_violated_assumption_flagged(self, rng):
        theta1 = np.eye(3)[0]
        theta2 = np.sqrt(1 - 0.4**2) * theta1 + 0.4 * np.eye(3)[1]
        X2 = np.linalg.qr(rng.standard_normal((20, 3)))[0]
        source, target = theorem_pair(theta1, theta2, X2)
        rep = theorem1_check(source, target, fit_linear_mtl([source, target], r=1))
        assert rep["status"] == "assumption violated" and rep["satisfied"] is None

    def test_needs_rank_one(self, rng):
        theta = rng.standard_normal(3)
        source, target = theorem_pair(theta, theta, rng.standard_normal((10, 3)))
        with pytest.raises(ArgumentError):
            theorem1_check(source, target, MTLModel(np.eye(3)[:, :2], [np.ones(2)] * 2))

    @given(st.floats(0, 1 / 3 - 1e-6), st.floats(0, 1 / 3 - 1e-6), st.floats(0, 10))
    def test_rhs_monotone(self, c1, c2, noise):
        lo, hi = sorted((c1, c2))
        assert error_bound(lo, noise) <= error_bound(hi, noise)

    def test_rhs_infinite_past_cut(self):
        assert error_bound(1 / 3, 0.0) == np.inf


class TestSinContraction:
    def test_isometry(self, rng):
        X = np.linalg.qr(rng.standard_normal((10, 4)))[0]
        rep = sin_contraction_check(X, rng.standard_normal(4), rng.standard_normal(4))
        assert rep["lhs"] == pytest.approx(rep["rhs"], abs=1e-10)

    def test_parallel(self, rng):
        a = rng.standard_normal(3)
        rep = sin_contraction_check(rng.standard_normal((5, 3)), a, a)
        assert rep["lhs"] <= 1e-15 and rep["rhs"] <= 1e-15 and rep["holds"]

    def test_degenerate(self):
        X = np.array([[1.0, 0.0], [0.0, 0.0]])
        assert sin_contraction_check(X, [0.0, 1.0], [1.0, 0.0])["degenerate"]

    def test_exact_inputs_zero_slack(self):
        X = np.diag([2.0, 1.0])
        rep = sin_contraction_check(X, [1.0, 0.0], [0.0, 1.0], slack=0.0)
        assert rep["holds"] and rep["lhs"] == 1.0 and rep["rhs"] == 0.25

    @given(st.integers(0, 2**31))
    def test_random(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((8, 4)) * rng.uniform(0.05, 5, 4)
        assert sin_contraction_check(X, rng.standard_normal(4), rng.standard_normal(4))["holds"]
