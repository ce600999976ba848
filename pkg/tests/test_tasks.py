import numpy as np
import pytest
from hypothesis import given, strategies as st

from mtlshare.closed_form import stl_solve
from mtlshare.exceptions import ArgumentError
from mtlshare.linalg import cos_sin
from mtlshare.tasks import (CovarianceSpec, TaskDataset, alpha_for_cosine, disjoint_boost_sets,
                            flip_labels, gen_linear_task, gen_logistic_task,
                            gen_multihead_relu_task, gen_relu_task, make_covariance,
                            make_model_pair, pair_cosine, split)


def unit(d, seed):
    v = np.random.default_rng(seed).standard_normal(d)
    return v / np.linalg.norm(v)


class TestLinear:
    def test_noiseless_exact(self):
        theta = unit(5, 0)
        task = gen_linear_task(theta, 40, seed=1)
        np.testing.assert_array_equal(task.y, task.X @ theta)
        resid = task.y - task.X @ stl_solve(task)
        assert np.abs(resid).max() <= 1e-10

    def test_boost_sets_from_recipe(self):
        s1, s2 = disjoint_boost_sets(100, 2, 0.1, seed=0)
        assert len(s1) == len(s2) == 10 and not set(s1) & set(s2)
        assert make_covariance(100, s1, 100.0, seed=0).scales().max() == 100.0

    def test_empirical_covariance(self):
        d = 10
        cov = make_covariance(d, (1, 4), boost=3.0, seed=2)
        X = gen_linear_task(unit(d, 1), 100_000, cov=cov, seed=3).X
        emp = X.T @ X / X.shape[0]
        target = cov.covariance()
        assert np.linalg.norm(emp - target) / np.linalg.norm(target) <= 0.05

    def test_covariances_converge(self):
        d = 6
        cov = make_covariance(d, (0,), boost=2.0, seed=0)

        def err(m):
            errs = []
            for s in range(10):
                X = gen_linear_task(np.ones(d), m, cov=cov, seed=s).X
                errs.append(np.linalg.norm(X.T @ X / m - cov.covariance()))
            return np.mean(errs)

        # 1/sqrt(m) decay: 16x the rows should cut the error by about 4x
        ratio = err(500) / err(8000)
        assert 2.5 <= ratio <= 6.5

    def test_noise_recorded(self):
        task = gen_linear_task(unit(4, 0), 30, sigma=0.5, seed=0)
        assert task.noise_sigma == 0.5
        assert np.std(task.noise()) > 0

    def test_rejects_bad_args(self):
        with pytest.raises(ArgumentError):
            gen_linear_task(np.ones(3), 0)
        with pytest.raises(ArgumentError):
            gen_linear_task(np.ones(3), 5, sigma=-1)
        with pytest.raises(ArgumentError):
            gen_linear_task(np.ones(3), 5, cov=make_covariance(4, (0,), 2.0))

    def test_covariance_spec_validation(self):
        with pytest.raises(ArgumentError):
            CovarianceSpec(np.ones((2, 2)), (0,), 2.0)
        with pytest.raises(ArgumentError):
            CovarianceSpec(np.eye(2), (0,), 0.5)
        spec = make_covariance(4, (1,), 5.0, seed=1)
        back = CovarianceSpec.from_dict(spec.to_dict())
        np.testing.assert_array_equal(back.covariance(), spec.covariance())


class TestRelu:
    def test_dead_activation(self):
        theta = unit(3, 0)
        task = gen_relu_task(theta, 1.0, 200, sigma=0.3, seed=0)
        dead = task.X @ theta < 0
        # label is pure noise wherever the unit is inactive
        np.testing.assert_array_equal(task.y[dead], task.noise()[dead])
        assert dead.any() and np.std(task.y[dead]) > 0

    def test_active_region_matches_linear(self):
        theta = unit(3, 2)
        lin, rel = gen_linear_task(theta, 50, seed=4), gen_relu_task(theta, 1.0, 50, seed=4)
        pos = lin.y > 0
        np.testing.assert_array_equal(rel.y[pos], lin.y[pos])
        np.testing.assert_array_equal(rel.X, lin.X)

    def test_half_gaussian_mean(self):
        theta = 2.0 * unit(8, 5)
        y = gen_relu_task(theta, 1.0, 200_000, seed=6).y
        expected = np.linalg.norm(theta) / np.sqrt(2 * np.pi)
        assert abs(y.mean() - expected) <= 3 * y.std(ddof=1) / np.sqrt(y.size)


class TestLogistic:
    def test_saturated(self):
        task = gen_logistic_task(np.zeros(3), 10, seed=0)
        assert np.all(task.y == 1.0)

    def test_sign_equivalence(self):
        theta = unit(6, 3)
        task = gen_logistic_task(theta, 500, seed=1)
        np.testing.assert_array_equal(task.y, (task.X @ theta >= 0).astype(float))
        assert task.kind == "classification"


class TestMultihead:
    def test_rank_one_reduces_to_relu(self):
        theta = unit(5, 0)
        a = gen_multihead_relu_task(theta.reshape(-1, 1), 30, seed=2)
        b = gen_relu_task(theta, 1.0, 30, seed=2)
        np.testing.assert_array_equal(a.y, b.y)

    def test_appendix_shape(self):
        Theta = np.random.default_rng(0).standard_normal((100, 10))
        task = gen_multihead_relu_task(Theta, 100, seed=0)
        assert task.X.shape == (100, 100)

    @given(st.floats(0.01, 100.0))
    def test_positive_homogeneity(self, c):
        Theta = np.random.default_rng(1).standard_normal((6, 3))
        a = gen_multihead_relu_task(Theta, 25, seed=3)
        b = gen_multihead_relu_task(c * Theta, 25, seed=3)
        np.testing.assert_allclose(b.y, c * a.y, rtol=1e-12, atol=1e-12)


class TestModelPair:
    def test_identical(self):
        t1, t2 = make_model_pair(unit(5, 0), 1.0, seed=0)
        assert cos_sin(t1, t2)[0] == pytest.approx(1.0)

    def test_orthogonal(self):
        t1, t2 = make_model_pair(unit(5, 0), 0.0, seed=0)
        assert abs(cos_sin(t1, t2)[0]) <= 1e-12

    def test_target_cosine(self):
        alpha = alpha_for_cosine(0.96)
        t1, t2 = make_model_pair(unit(100, 1), alpha, seed=3)
        assert cos_sin(t1, t2)[0] == pytest.approx(0.96, abs=1e-10)

    @given(st.floats(0.0, 1.0), st.integers(0, 1000))
    def test_analytic_cosine(self, alpha, seed):
        t1, t2 = make_model_pair(unit(12, seed), alpha, seed=seed)
        assert cos_sin(t1, t2)[0] == pytest.approx(pair_cosine(alpha), abs=1e-10)

    def test_matrix_pair(self):
        T1 = np.linalg.qr(np.random.default_rng(0).standard_normal((10, 3)))[0]
        _, T2 = make_model_pair(T1, 0.0, seed=1)
        assert np.abs(T1.T @ T2).max() <= 1e-12
        np.testing.assert_allclose(np.linalg.norm(T2, axis=0), 1.0)


class TestFlipAndSplit:
    def base(self, m=1000):
        return gen_logistic_task(unit(5, 0), m, seed=0)

    def test_no_flip(self):
        task = self.base()
        np.testing.assert_array_equal(flip_labels(task, 0.0, 0.5, seed=1).y, task.y)

    def test_full_flip(self):
        task = self.base()
        np.testing.assert_array_equal(flip_labels(task, 1.0, 1.0, seed=1).y, 1.0 - task.y)

    def test_flip_rate(self):
        task = self.base(10_000)
        flipped = np.mean(flip_labels(task, 0.2, 0.5, seed=3).y != task.y)
        # binomial(2000, 0.5) over 10000 rows: sd = sqrt(2000 * 0.25) / 10000
        assert abs(flipped - 0.1) <= 4 * np.sqrt(2000 * 0.25) / 10_000

    def test_flip_regression_rejected(self):
        with pytest.raises(ArgumentError):
            flip_labels(gen_linear_task(np.ones(2), 5), 0.2, 0.5)

    def test_split_sizes(self):
        task = split(gen_linear_task(unit(3, 0), 10_000, seed=0), 9000, seed=1)
        assert task.train_data()[0].shape[0] == 9000
        assert task.validation_data()[0].shape[0] == 1000

    def test_singleton_validation(self):
        task = split(gen_linear_task(unit(3, 0), 20), 19, seed=0)
        assert task.val_idx.size == 1

    def test_split_deterministic(self):
        task = gen_linear_task(unit(3, 0), 50)
        a, b = split(task, 30, seed=4), split(task, 30, seed=4)
        np.testing.assert_array_equal(a.train_idx, b.train_idx)
        assert not np.intersect1d(a.train_idx, a.val_idx).size

    def test_split_too_large(self):
        with pytest.raises(ArgumentError):
            split(gen_linear_task(np.ones(2), 5), 5)

    def test_unsplit_has_no_validation(self):
        with pytest.raises(ArgumentError):
            gen_linear_task(np.ones(2), 5).validation_data()


@given(st.integers(0, 2**31), st.sampled_from(["linear", "relu", "logistic", "multihead"]))
def test_generators_deterministic(seed, kind):
    theta = unit(4, 1)
    make = {
        "linear": lambda: gen_linear_task(theta, 20, sigma=0.3, seed=seed),
        "relu": lambda: gen_relu_task(theta, 1.5, 20, sigma=0.3, seed=seed),
        "logistic": lambda: gen_logistic_task(theta, 20, seed=seed),
        "multihead": lambda: gen_multihead_relu_task(np.outer(theta, [1, -1]), 20, 0.3, seed=seed),
    }[kind]
    a, b = make(), make()
    assert a.X.tobytes() == b.X.tobytes() and a.y.tobytes() == b.y.tobytes()


def test_stl_recovers_theta_noiseless():
    theta = unit(8, 3)
    task = gen_linear_task(theta, 8, seed=5)
    assert np.linalg.norm(stl_solve(task) - theta) <= 1e-8 * np.linalg.norm(theta)


def test_dataset_roundtrip(tmp_path):
    cov = make_covariance(4, (2,), 3.0, seed=1)
    task = split(gen_linear_task(unit(4, 0), 25, sigma=0.1, cov=cov, seed=(3, 1)), 20, seed=2)
    task.save(tmp_path / "t.csv")
    back = TaskDataset.load(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.X, task.X)
    np.testing.assert_array_equal(back.y, task.y)
    np.testing.assert_array_equal(back.train_idx, task.train_idx)
    np.testing.assert_array_equal(back.theta_true, task.theta_true)
    assert back.generator["covariance"]["boost"] == 3.0


def test_dataset_rejects_bad_split():
    with pytest.raises(ArgumentError):
        TaskDataset(np.ones((3, 1)), np.ones(3), train_idx=[0, 1], val_idx=[1])
