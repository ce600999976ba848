"""Independent oracles shared by the test modules."""

import numpy as np

from mtlshare.model import gradients, objective


def _flatten(model, blocks):
    parts = []
    if "shared" in blocks:
        parts.append(model.shared.ravel())
    if "heads" in blocks:
        parts.extend(model.heads)
    if "alignments" in blocks:
        parts.extend(R.ravel() for R in model.alignments)
    return np.concatenate(parts)


def _assign(model, blocks, flat):
    m = model.copy()
    pos = 0

    def take(shape):
        nonlocal pos
        n = int(np.prod(shape))
        out = flat[pos:pos + n].reshape(shape)
        pos += n
        return out.copy()

    if "shared" in blocks:
        m.shared = take(m.shared.shape)
    if "heads" in blocks:
        m.heads = [take(a.shape) for a in m.heads]
    if "alignments" in blocks:
        m.alignments = [take(R.shape) for R in m.alignments]
    return m


def finite_difference(model, tasks, weights, blocks, step=1e-6):
    """Central-difference gradient of the objective over the requested blocks."""
    x0 = _flatten(model, blocks)
    g = np.empty_like(x0)
    for j in range(x0.size):
        e = np.zeros_like(x0)
        e[j] = step
        fp = objective(_assign(model, blocks, x0 + e), tasks, weights)
        fm = objective(_assign(model, blocks, x0 - e), tasks, weights)
        g[j] = (fp - fm) / (2 * step)
    return g


def gradient_relative_error(model, tasks, weights=None, blocks=("shared", "heads")):
    analytic = gradients(model, tasks, weights, wrt=blocks)
    flat = np.concatenate([np.ravel(analytic[b]) if b == "shared"
                           else np.concatenate([np.ravel(v) for v in analytic[b]])
                           for b in blocks])
    fd = finite_difference(model, tasks, weights, blocks)
    return np.linalg.norm(flat - fd) / max(np.linalg.norm(fd), np.linalg.norm(flat), 1e-12)


def naive_objective(shared, heads, tasks, weights, activation="linear"):
    """Loop-based evaluation of the weighted squared-error objective."""
    total = 0.0
    for i, (X, y) in enumerate(tasks):
        for row, label in zip(X, y):
            hidden = [sum(row[p] * shared[p][q] for p in range(len(row)))
                      for q in range(len(heads[i]))]
            if activation == "relu":
                hidden = [max(h, 0.0) for h in hidden]
            pred = sum(h * a for h, a in zip(hidden, heads[i]))
            total += weights[i] * (pred - label) ** 2
    return total
