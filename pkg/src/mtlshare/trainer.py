"""Mini-batch SGD for the shared-module model, including alignment training.

Each step minimizes the batch *mean* of the weighted squared error, so the
learning rate does not depend on the batch size. Randomness is drawn from a
generator seeded with ``(seed, epoch)``, making every run replayable.
"""

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ._validation import check_count
from .exceptions import ArgumentError, DivergenceError
from .linalg import condition_number, make_rng
from .model import as_xy, check_weights, task_gradient, task_losses

JOINT = "joint"
TASK_ALTERNATING = "task_alternating"


@dataclass(frozen=True)
class TrainConfig:
    """SGD hyperparameters.

    Parameters
    ----------
    learning_rate : float
    epochs, batch_size : int
    seed : int
        Drives batch order; model initialization is the caller's job.
    freeze_shared : bool
        Keep ``B`` fixed.
    train_alignments : bool
        Update the per-task alignment matrices.
    batching : {"task_alternating", "joint"}
        ``task_alternating`` shuffles the batches of all tasks together and
        updates only the sampled task's parameters; ``joint`` steps on all
        tasks at once and requires identical covariates.
    weights : array-like, optional
        Task weights (uniform when omitted).
    divergence_factor : float
        Abort once the loss exceeds this multiple of the initial loss.
    """

    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 50
    seed: int = 0
    freeze_shared: bool = False
    train_alignments: bool = False
    batching: str = TASK_ALTERNATING
    weights: Optional[tuple] = None
    divergence_factor: float = 1e6

    def __post_init__(self):
        if not (self.learning_rate > 0 and np.isfinite(self.learning_rate)):
            raise ArgumentError("learning_rate must be a positive finite number")
        check_count(self.epochs, "epochs")
        check_count(self.batch_size, "batch_size")
        if self.batching not in (JOINT, TASK_ALTERNATING):
            raise ArgumentError(f"unknown batching mode {self.batching!r}")
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.divergence_factor > 1:
            raise ArgumentError("divergence_factor must exceed 1")


@dataclass
class LossTrace:
    """Per-epoch weighted training loss; row 0 is the initial model."""

    per_task: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def total(self):
        return self.per_task.sum(axis=1)

    @property
    def final(self):
        return float(self.total[-1])

    def to_csv(self, path):
        k = self.per_task.shape[1]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch"] + [f"task{i}" for i in range(k)] + ["total"])
            for epoch, (row, tot) in enumerate(zip(self.per_task, self.total)):
                writer.writerow([epoch] + [format(v, ".17g") for v in row] + [format(tot, ".17g")])

    @classmethod
    def from_csv(cls, path):
        with open(Path(path), newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))[1:]
        return cls(np.array([[float(v) for v in r[1:-1]] for r in rows], dtype=np.float64))


def _batches(n, size, rng):
    perm = rng.permutation(n)
    return [perm[i:i + size] for i in range(0, n, size)]


def _step(model, X, y, task, scale, cfg, update_heads=True):
    _, dB, dA, dR = task_gradient(model, X, y, task, scale=scale)
    lr = cfg.learning_rate
    if update_heads:
        model.heads[task] -= lr * dA
    if cfg.train_alignments:
        model.alignments[task] -= lr * dR
    if not cfg.freeze_shared:
        model.shared -= lr * dB


def _epoch_alternating(model, pairs, w, cfg, rng):
    jobs = []
    for i, (X, _) in enumerate(pairs):
        jobs.extend((i, b) for b in _batches(X.shape[0], cfg.batch_size, rng))
    for j in rng.permutation(len(jobs)):
        i, idx = jobs[j]
        X, y = pairs[i]
        _step(model, X[idx], y[idx], i, w[i] / idx.size, cfg)


def _epoch_joint(model, pairs, w, cfg, rng):
    X = pairs[0][0]
    for idx in _batches(X.shape[0], cfg.batch_size, rng):
        grads = [task_gradient(model, X[idx], y[idx], i, scale=w[i] / idx.size)
                 for i, (_, y) in enumerate(pairs)]
        lr = cfg.learning_rate
        for i, (_, _, dA, dR) in enumerate(grads):
            model.heads[i] -= lr * dA
            if cfg.train_alignments:
                model.alignments[i] -= lr * dR
        if not cfg.freeze_shared:
            model.shared -= lr * sum(g[1] for g in grads)


def _mean_losses(model, pairs, w):
    return w * task_losses(model, pairs) / np.array([X.shape[0] for X, _ in pairs])


def train(model, tasks, cfg=TrainConfig()):
    """Train a copy of ``model`` on the training rows of ``tasks``.

    Returns
    -------
    model : MTLModel
    trace : LossTrace
        Weighted per-task mean squared training error after every epoch.

    Raises
    ------
    DivergenceError
        If the loss turns non-finite or exceeds ``divergence_factor`` times
        its initial value.
    """
    pairs = [as_xy(t) for t in tasks]
    if len(pairs) != model.n_tasks:
        raise ArgumentError(f"model has {model.n_tasks} heads but {len(pairs)} tasks were given")
    if any(X.shape[1] != model.d for X, _ in pairs):
        raise ArgumentError("task dimension does not match the model")
    if cfg.train_alignments and model.alignments is None:
        raise ArgumentError("train_alignments requires a model with alignment matrices")
    if cfg.batching == JOINT:
        X0 = pairs[0][0]
        if any(X.shape != X0.shape or not np.array_equal(X, X0) for X, _ in pairs[1:]):
            raise ArgumentError("joint batching requires identical covariates across tasks")
    w = check_weights(cfg.weights, len(pairs))
    model = model.copy()
    run_epoch = _epoch_joint if cfg.batching == JOINT else _epoch_alternating

    rows = [_mean_losses(model, pairs, w)]
    initial = rows[0].sum()
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, cfg.epochs + 1):
            run_epoch(model, pairs, w, cfg, make_rng((cfg.seed, epoch)))
            losses = _mean_losses(model, pairs, w)
            total = losses.sum()
            if not np.isfinite(total) or total > cfg.divergence_factor * max(initial, 1e-300):
                raise DivergenceError(f"training diverged at epoch {epoch} (loss {total:.3g})",
                                      epoch=epoch)
            rows.append(losses)

    per_task = np.array(rows)
    totals = per_task.sum(axis=1)
    meta = {"nonincreasing": bool(np.all(np.diff(totals) <= 1e-12 * max(totals[0], 1.0)))}
    if model.alignments is not None:
        meta["alignment_condition"] = [condition_number(R) for R in model.alignments]
    return model, LossTrace(per_task, meta)


def train_aligned(model, tasks, cfg=TrainConfig(), freeze_shared=True):
    """Covariance alignment: train per-task alignment matrices and heads.

    ``B`` stays fixed unless ``freeze_shared=False``. Models without
    alignment matrices are rejected.
    """
    if model.alignments is None:
        raise ArgumentError("alignment training needs a model with alignment matrices")
    return train(model, tasks, replace(cfg, train_alignments=True, freeze_shared=freeze_shared))


def train_best_of(make_model, tasks, cfg=TrainConfig(), restarts=3):
    """Train from ``restarts`` initializations ``make_model(i)``; keep the lowest final loss.

    Diverged restarts are skipped; if all diverge the last error is re-raised.
    """
    best, error = None, None
    for i in range(check_count(restarts, "restarts")):
        try:
            fitted, trace = train(make_model(i), tasks, cfg)
        except DivergenceError as exc:
            error = exc
            continue
        if best is None or trace.final < best[1].final:
            best = (fitted, trace)
    if best is None:
        raise error
    return best
