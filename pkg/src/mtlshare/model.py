"""Shared-module multi-task model: a common ``d x r`` map plus one head per task.

Task ``i`` predicts ``g(X_i @ R_i @ B) @ A_i`` where ``g`` is the identity or
ReLU, ``B`` is shared, ``A_i`` is a length-``r`` head and ``R_i`` an optional
``d x d`` alignment matrix (identity when absent). There are no bias terms.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from ._validation import check_count, check_matrix, check_vector
from .exceptions import ArgumentError
from .linalg import make_rng

LINEAR = "linear"
RELU = "relu"
ACTIVATIONS = (LINEAR, RELU)


@dataclass
class MTLModel:
    """Parameters of the shared-module model.

    Parameters
    ----------
    shared : ndarray of shape (d, r)
    heads : list of ndarray of shape (r,)
        One head per task.
    activation : {"linear", "relu"}
    alignments : list of ndarray of shape (d, d), optional
        Per-task alignment matrices.
    info : dict
        Free-form solver metadata (objective value, flags, ...).
    """

    shared: np.ndarray
    heads: List[np.ndarray]
    activation: str = LINEAR
    alignments: Optional[List[np.ndarray]] = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.shared = check_matrix(self.shared, "shared")
        d, r = self.shared.shape
        if self.activation not in ACTIVATIONS:
            raise ArgumentError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if len(self.heads) == 0:
            raise ArgumentError("model needs at least one head")
        self.heads = [check_vector(a, f"heads[{i}]", size=r) for i, a in enumerate(self.heads)]
        if self.alignments is not None:
            if len(self.alignments) != len(self.heads):
                raise ArgumentError("need exactly one alignment matrix per task")
            aligned = []
            for i, R in enumerate(self.alignments):
                R = check_matrix(R, f"alignments[{i}]")
                if R.shape != (d, d):
                    raise ArgumentError(f"alignments[{i}] must be {d}x{d}, got {R.shape}")
                aligned.append(R)
            self.alignments = aligned

    @property
    def d(self):
        return self.shared.shape[0]

    @property
    def r(self):
        return self.shared.shape[1]

    @property
    def n_tasks(self):
        return len(self.heads)

    def copy(self):
        return MTLModel(
            self.shared.copy(),
            [a.copy() for a in self.heads],
            self.activation,
            None if self.alignments is None else [R.copy() for R in self.alignments],
            json.loads(json.dumps(self.info)),
        )

    def with_identity_alignments(self):
        out = self.copy()
        out.alignments = [np.eye(self.d) for _ in range(self.n_tasks)]
        return out

    def effective_parameter(self, task):
        """``R_i @ B @ A_i``: the linear predictor of ``task`` (linear activation only)."""
        if self.activation != LINEAR:
            raise ArgumentError("effective parameter is only defined for the linear model")
        Z = self.shared if self.alignments is None else self.alignments[task] @ self.shared
        return Z @ self.heads[task]

    # -- serialization -------------------------------------------------

    def to_dict(self):
        return {
            "activation": self.activation,
            "shared": self.shared.tolist(),
            "heads": [a.tolist() for a in self.heads],
            "alignments": None if self.alignments is None else [R.tolist() for R in self.alignments],
            "info": self.info,
        }

    @classmethod
    def from_dict(cls, doc):
        unknown = set(doc) - {"activation", "shared", "heads", "alignments", "info"}
        if unknown:
            raise ArgumentError(f"unknown model fields: {sorted(unknown)}")
        shared = np.asarray(doc["shared"], dtype=np.float64)
        if shared.ndim == 1:
            shared = shared.reshape(-1, 1) if shared.size else shared.reshape(0, 0)
        return cls(
            shared=shared,
            heads=[np.asarray(a, dtype=np.float64) for a in doc["heads"]],
            activation=doc.get("activation", LINEAR),
            alignments=None if doc.get("alignments") is None
            else [np.asarray(R, dtype=np.float64) for R in doc["alignments"]],
            info=doc.get("info", {}),
        )

    def save(self, path):
        # json writes floats with repr(), which round-trips float64 exactly
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def init_model(d, r, n_tasks, activation=LINEAR, scale=None, alignments=False, seed=0):
    """Random Gaussian initialization.

    ``B`` entries have standard deviation ``scale`` (default ``1/sqrt(d)``)
    and heads ``1/sqrt(r)``. With ``alignments=True`` every task gets an
    identity alignment matrix.
    """
    d, r, n_tasks = check_count(d, "d"), check_count(r, "r"), check_count(n_tasks, "n_tasks")
    rng = make_rng(seed)
    scale = 1.0 / np.sqrt(d) if scale is None else float(scale)
    B = scale * rng.standard_normal((d, r))
    heads = [rng.standard_normal(r) / np.sqrt(r) for _ in range(n_tasks)]
    model = MTLModel(B, heads, activation)
    return model.with_identity_alignments() if alignments else model


def as_xy(task):
    """Accept a ``TaskDataset`` (training rows) or an ``(X, y)`` pair."""
    if hasattr(task, "train_data"):
        return task.train_data()
    X, y = task
    X = check_matrix(X, "X")
    return X, check_vector(y, "y", size=X.shape[0])


def check_weights(weights, n_tasks):
    """Validate a task-weight vector: finite, nonnegative, one per task, not all zero."""
    if weights is None:
        return np.ones(n_tasks)
    w = check_vector(weights, "weights", size=n_tasks)
    if np.any(w < 0):
        raise ArgumentError("task weights must be nonnegative")
    if not np.any(w > 0):
        raise ArgumentError("at least one task weight must be positive")
    return w


def _check_tasks(model, tasks):
    pairs = [as_xy(t) for t in tasks]
    if len(pairs) != model.n_tasks:
        raise ArgumentError(f"model has {model.n_tasks} heads but {len(pairs)} tasks were given")
    for i, (X, _) in enumerate(pairs):
        if X.shape[1] != model.d:
            raise ArgumentError(f"task {i} has dimension {X.shape[1]}, model expects {model.d}")
    return pairs


def _hidden(model, X, task):
    Z = X if model.alignments is None else X @ model.alignments[task]
    H = Z @ model.shared
    return Z, H


def forward(model, X, task):
    """Predictions of head ``task`` on covariates ``X``."""
    X = check_matrix(X, "X")
    if X.shape[1] != model.d:
        raise ArgumentError(f"X has {X.shape[1]} columns, model expects {model.d}")
    if not 0 <= task < model.n_tasks:
        raise ArgumentError(f"task index {task} out of range")
    _, H = _hidden(model, X, task)
    G = np.maximum(H, 0.0) if model.activation == RELU else H
    return G @ model.heads[task]


def task_losses(model, tasks):
    """Unweighted squared-error sum ``|pred_i - y_i|^2`` for every task."""
    return np.array([np.sum((forward(model, X, i) - y) ** 2)
                     for i, (X, y) in enumerate(_check_tasks(model, tasks))])


def objective(model, tasks, weights=None):
    """Weighted sum of per-task squared errors."""
    w = check_weights(weights, model.n_tasks)
    return float(w @ task_losses(model, tasks))


def task_gradient(model, X, y, task, scale=1.0):
    """Gradient of ``scale * |pred - y|^2`` for one task.

    Returns ``(loss, dB, dA, dR)``; ``dR`` is ``None`` when the model has no
    alignments. The ReLU subgradient at zero is taken as zero.
    """
    Z, H = _hidden(model, X, task)
    A = model.heads[task]
    G = np.maximum(H, 0.0) if model.activation == RELU else H
    res = G @ A - y
    loss = scale * float(res @ res)
    dG = (2.0 * scale) * np.outer(res, A)
    dH = dG * (H > 0) if model.activation == RELU else dG
    dA = (2.0 * scale) * (G.T @ res)
    dB = Z.T @ dH
    dR = None if model.alignments is None else X.T @ (dH @ model.shared.T)
    return loss, dB, dA, dR


BLOCKS = ("shared", "heads", "alignments")


def gradients(model, tasks, weights=None, wrt=("shared", "heads")):
    """Gradient of :func:`objective` with respect to the requested parameter blocks.

    Parameters
    ----------
    wrt : iterable of {"shared", "heads", "alignments"}

    Returns
    -------
    dict
        ``"shared"`` maps to a ``d x r`` array, ``"heads"`` and
        ``"alignments"`` to per-task lists.
    """
    wrt = tuple(wrt)
    unknown = set(wrt) - set(BLOCKS)
    if unknown:
        raise ArgumentError(f"unknown gradient blocks: {sorted(unknown)}")
    if "alignments" in wrt and model.alignments is None:
        raise ArgumentError("alignment gradients requested but the model has no alignments")
    w = check_weights(weights, model.n_tasks)
    pairs = _check_tasks(model, tasks)
    dB = np.zeros_like(model.shared)
    dA, dR = [], []
    for i, (X, y) in enumerate(pairs):
        _, gB, gA, gR = task_gradient(model, X, y, i, scale=w[i])
        dB += gB
        dA.append(gA)
        dR.append(gR)
    full = {"shared": dB, "heads": dA, "alignments": dR}
    return {key: full[key] for key in wrt}
