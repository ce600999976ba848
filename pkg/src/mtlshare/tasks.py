"""Synthetic task families with controlled similarity, covariance and noise.

Every generator is a pure function of its arguments: the same ``seed``
always yields a bit-identical :class:`TaskDataset`.
"""

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from ._validation import check_count, check_fraction, check_matrix, check_vector
from .exceptions import ArgumentError
from .linalg import make_rng, random_orthonormal

REGRESSION = "regression"
CLASSIFICATION = "classification"

DEFAULT_DIM = 100
DEFAULT_SAMPLES = 10_000


@dataclass(frozen=True)
class CovarianceSpec:
    """Shape of a task's covariates: rotation ``Q`` and a boost ``kappa`` on ``boosted``.

    With ``D = diag(kappa on boosted, 1 elsewhere)`` the population
    covariance of the generated rows is ``Q @ D**2 @ Q.T``.
    """

    rotation: np.ndarray
    boosted: tuple
    boost: float = 100.0

    def __post_init__(self):
        Q = check_matrix(self.rotation, "rotation")
        d = Q.shape[0]
        if Q.shape != (d, d):
            raise ArgumentError("rotation must be square")
        if not np.allclose(Q.T @ Q, np.eye(d), atol=1e-8):
            raise ArgumentError("rotation must be orthonormal")
        boosted = tuple(sorted(int(i) for i in self.boosted))
        if any(i < 0 or i >= d for i in boosted) or len(set(boosted)) != len(boosted):
            raise ArgumentError("boosted coordinates must be distinct indices in [0, d)")
        if self.boost < 1.0:
            raise ArgumentError("boost must be >= 1")
        object.__setattr__(self, "rotation", Q)
        object.__setattr__(self, "boosted", boosted)
        object.__setattr__(self, "boost", float(self.boost))

    @property
    def dim(self):
        return self.rotation.shape[0]

    def scales(self):
        D = np.ones(self.dim)
        D[list(self.boosted)] = self.boost
        return D

    def covariance(self):
        Q, D = self.rotation, self.scales()
        return (Q * D**2) @ Q.T

    def to_dict(self):
        return {
            "rotation": self.rotation.tolist(),
            "boosted": list(self.boosted),
            "boost": self.boost,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(np.asarray(doc["rotation"], dtype=np.float64), tuple(doc["boosted"]), doc["boost"])


def disjoint_boost_sets(d, n_sets=2, fraction=0.1, seed=0):
    """Disjoint random coordinate sets, each of size ``fraction * d``."""
    size = int(round(fraction * d))
    if size * n_sets > d:
        raise ArgumentError(f"cannot draw {n_sets} disjoint sets of size {size} from {d}")
    perm = make_rng(seed).permutation(d)
    return [tuple(sorted(perm[i * size:(i + 1) * size].tolist())) for i in range(n_sets)]


def make_covariance(d, boosted, boost=100.0, seed=0):
    return CovarianceSpec(random_orthonormal(d, seed), tuple(boosted), boost)


@dataclass
class TaskDataset:
    """One task: covariates, labels, ground truth and a train/validation split."""

    X: np.ndarray
    y: np.ndarray
    theta_true: Optional[np.ndarray] = None
    a_true: Optional[float] = None
    noise_sigma: float = 0.0
    kind: str = REGRESSION
    train_idx: Optional[np.ndarray] = None
    val_idx: Optional[np.ndarray] = None
    seed: Optional[int] = None
    generator: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = check_matrix(self.X, "X")
        self.y = check_vector(self.y, "y", size=self.X.shape[0])
        if self.kind not in (REGRESSION, CLASSIFICATION):
            raise ArgumentError(f"unknown task kind {self.kind!r}")
        if self.theta_true is not None:
            self.theta_true = np.asarray(self.theta_true, dtype=np.float64)
            if self.theta_true.shape[0] != self.X.shape[1]:
                raise ArgumentError("theta_true dimension must equal the covariate dimension")
        if (self.train_idx is None) != (self.val_idx is None):
            raise ArgumentError("train and validation indices must be given together")
        if self.train_idx is not None:
            self.train_idx = np.asarray(self.train_idx, dtype=np.int64)
            self.val_idx = np.asarray(self.val_idx, dtype=np.int64)
            both = np.concatenate([self.train_idx, self.val_idx])
            if both.size != self.m or not np.array_equal(np.sort(both), np.arange(self.m)):
                raise ArgumentError("split must partition the rows into disjoint sets")

    @property
    def m(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def has_split(self):
        return self.train_idx is not None

    def _require_split(self):
        if not self.has_split:
            raise ArgumentError("task has no train/validation split")

    def train_data(self):
        """``(X, y)`` restricted to training rows (all rows when unsplit)."""
        if not self.has_split:
            return self.X, self.y
        return self.X[self.train_idx], self.y[self.train_idx]

    def validation_data(self):
        self._require_split()
        return self.X[self.val_idx], self.y[self.val_idx]

    def noise(self):
        """Label noise ``y - clean(X)`` for regression tasks with known ground truth."""
        if self.theta_true is None:
            raise ArgumentError("task has no ground-truth parameter")
        return self.y - clean_labels(self)

    # -- serialization -------------------------------------------------

    def save(self, csv_path):
        """Write ``<name>.csv`` (x0..x{d-1},y) and a ``<name>.json`` sidecar."""
        csv_path = Path(csv_path)
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"x{j}" for j in range(self.d)] + ["y"])
            for row, label in zip(self.X, self.y):
                writer.writerow([_fmt(v) for v in row] + [_fmt(label)])
        meta = {
            "theta_true": None if self.theta_true is None else self.theta_true.tolist(),
            "a_true": self.a_true,
            "noise_sigma": self.noise_sigma,
            "kind": self.kind,
            "split": None if not self.has_split else {
                "train": self.train_idx.tolist(),
                "validation": self.val_idx.tolist(),
            },
            "seed": self.seed,
            "generator": self.generator,
        }
        sidecar = csv_path.with_suffix(".json")
        sidecar.write_text(json.dumps(meta, indent=1, sort_keys=True), encoding="utf-8")
        return csv_path, sidecar

    @classmethod
    def load(cls, csv_path):
        csv_path = Path(csv_path)
        with open(csv_path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if not header or header[-1] != "y":
            raise ArgumentError(f"{csv_path}: last column must be 'y'")
        data = np.array([[float(v) for v in r] for r in body], dtype=np.float64)
        data = data.reshape(len(body), len(header))
        sidecar = csv_path.with_suffix(".json")
        meta = json.loads(sidecar.read_text(encoding="utf-8")) if sidecar.exists() else {}
        split = meta.get("split")
        return cls(
            X=data[:, :-1],
            y=data[:, -1],
            theta_true=meta.get("theta_true"),
            a_true=meta.get("a_true"),
            noise_sigma=meta.get("noise_sigma", 0.0),
            kind=meta.get("kind", REGRESSION),
            train_idx=None if split is None else split["train"],
            val_idx=None if split is None else split["validation"],
            seed=meta.get("seed"),
            generator=meta.get("generator", {}),
        )


def _fmt(v):
    return format(float(v), ".17g")


def relu(z):
    return np.maximum(z, 0.0)


def clean_labels(task):
    """Noise-free labels implied by the task's generator and ground truth."""
    X, theta = task.X, task.theta_true
    model = task.generator.get("model", "linear")
    if model == "linear":
        return X @ theta
    if model == "relu":
        return task.a_true * relu(X @ theta)
    if model == "multihead_relu":
        return relu(X @ theta).sum(axis=1)
    raise ArgumentError(f"clean labels undefined for generator model {model!r}")


def _covariates(m, d, cov, rng):
    R = rng.standard_normal((m, d))
    if cov is None:
        return R
    if cov.dim != d:
        raise ArgumentError(f"covariance spec has dimension {cov.dim}, expected {d}")
    # X = R D Q^T  =>  E[X^T X] / m = Q D^2 Q^T
    return (R * cov.scales()) @ cov.rotation.T


def _gen_meta(model, cov, **extra):
    meta = {"model": model, "covariance": None if cov is None else cov.to_dict()}
    meta.update(extra)
    return meta


def gen_linear_task(theta, m=DEFAULT_SAMPLES, sigma=0.0, cov=None, seed=0):
    """``y = X theta + eps`` with Gaussian rows (optionally covariance-shaped)."""
    theta = check_vector(theta, "theta")
    m = check_count(m, "m")
    if sigma < 0:
        raise ArgumentError("sigma must be >= 0")
    rng = make_rng(seed)
    X = _covariates(m, theta.shape[0], cov, rng)
    y = X @ theta
    if sigma > 0:
        y = y + sigma * rng.standard_normal(m)
    return TaskDataset(X, y, theta_true=theta, noise_sigma=float(sigma), seed=seed,
                       generator=_gen_meta("linear", cov, sigma=float(sigma)))


def gen_relu_task(theta, a=1.0, m=DEFAULT_SAMPLES, sigma=0.0, cov=None, seed=0):
    """``y = a * relu(X theta) + eps``."""
    theta = check_vector(theta, "theta")
    m = check_count(m, "m")
    if sigma < 0:
        raise ArgumentError("sigma must be >= 0")
    rng = make_rng(seed)
    X = _covariates(m, theta.shape[0], cov, rng)
    y = a * relu(X @ theta)
    if sigma > 0:
        y = y + sigma * rng.standard_normal(m)
    return TaskDataset(X, y, theta_true=theta, a_true=float(a), noise_sigma=float(sigma),
                       seed=seed, generator=_gen_meta("relu", cov, sigma=float(sigma), a=float(a)))


def gen_logistic_task(theta, m=DEFAULT_SAMPLES, cov=None, seed=0):
    """Binary labels ``1[sigmoid(X theta) >= 0.5]``; a tie at exactly 0.5 maps to 1."""
    theta = check_vector(theta, "theta")
    m = check_count(m, "m")
    X = _covariates(m, theta.shape[0], cov, make_rng(seed))
    y = (expit(X @ theta) >= 0.5).astype(np.float64)
    return TaskDataset(X, y, theta_true=theta, kind=CLASSIFICATION, seed=seed,
                       generator=_gen_meta("logistic", cov))


def gen_multihead_relu_task(Theta, m=DEFAULT_SAMPLES, sigma=0.0, cov=None, seed=0):
    """``y = relu(X Theta) @ ones(r) + eps`` for a ``d x r`` parameter ``Theta``."""
    Theta = check_matrix(Theta, "Theta")
    m = check_count(m, "m")
    rng = make_rng(seed)
    X = _covariates(m, Theta.shape[0], cov, rng)
    y = relu(X @ Theta).sum(axis=1)
    if sigma > 0:
        y = y + sigma * rng.standard_normal(m)
    return TaskDataset(X, y, theta_true=Theta, noise_sigma=float(sigma), seed=seed,
                       generator=_gen_meta("multihead_relu", cov, sigma=float(sigma)))


def pair_cosine(alpha):
    """Cosine between ``theta1`` and ``alpha*theta1 + (1-alpha)*theta'`` for
    equal-norm orthogonal ``theta1``, ``theta'``."""
    alpha = float(alpha)
    return alpha / np.hypot(alpha, 1.0 - alpha)


def alpha_for_cosine(cosine):
    """Interpolation weight whose model pair has the requested cosine."""
    cosine = check_fraction(cosine, "cosine")
    if cosine in (0.0, 1.0):
        return cosine
    return brentq(lambda a: pair_cosine(a) - cosine, 0.0, 1.0, xtol=1e-15, rtol=1e-15)


def make_model_pair(theta1, alpha, seed=0):
    """Return ``(theta1, alpha*theta1 + (1-alpha)*theta')`` with ``theta'`` orthogonal.

    Vectors: ``theta'`` is a random unit direction orthogonal to ``theta1``
    scaled to ``|theta1|``. Matrices (``d x r``): ``theta'`` spans a
    subspace orthogonal to the columns of ``theta1``, column norms matched.
    """
    alpha = check_fraction(alpha, "alpha")
    theta1 = np.asarray(theta1, dtype=np.float64)
    vector = theta1.ndim == 1
    T1 = theta1.reshape(-1, 1) if vector else theta1
    d, r = T1.shape
    if d < 2 * r:
        raise ArgumentError(f"dimension {d} too small for an orthogonal complement of rank {r}")
    G = make_rng(seed).standard_normal((d, r))
    Q1, _ = np.linalg.qr(T1)
    G -= Q1 @ (Q1.T @ G)
    G -= Q1 @ (Q1.T @ G)
    Qp, _ = np.linalg.qr(G)
    Tp = Qp * np.linalg.norm(T1, axis=0)
    T2 = alpha * T1 + (1.0 - alpha) * Tp
    return (theta1, T2.reshape(-1)) if vector else (theta1, T2)


def flip_labels(task, fraction, flip_prob, seed=0):
    """Flip labels on a random ``fraction`` of rows, each with probability ``flip_prob``."""
    if task.kind != CLASSIFICATION:
        raise ArgumentError("label flipping applies to classification tasks only")
    fraction = check_fraction(fraction, "fraction")
    flip_prob = check_fraction(flip_prob, "flip_prob")
    rng = make_rng(seed)
    chosen = rng.choice(task.m, size=int(round(fraction * task.m)), replace=False)
    flips = chosen[rng.random(chosen.size) < flip_prob]
    y = task.y.copy()
    y[flips] = 1.0 - y[flips]
    gen = dict(task.generator)
    gen["label_flips"] = {"fraction": fraction, "flip_prob": flip_prob, "seed": seed,
                          "flipped": int(flips.size)}
    return replace(task, y=y, generator=gen)


def split(task, train_count, seed=0):
    """Random disjoint train/validation split with ``train_count`` training rows."""
    train_count = check_count(train_count, "train_count")
    if train_count >= task.m:
        raise ArgumentError(f"train_count={train_count} must be < m={task.m}")
    perm = make_rng(seed).permutation(task.m)
    return replace(task, train_idx=np.sort(perm[:train_count]), val_idx=np.sort(perm[train_count:]))
