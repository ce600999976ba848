"""Dense linear-algebra kernel.

Thin wrappers over LAPACK (through numpy) that pin down the details the
rest of the package relies on: a deterministic sign convention for
singular vectors, a fixed relative rank tolerance, and explicit seeding.

All randomness uses numpy's ``PCG64`` bit generator seeded with an
explicit integer (or a tuple of integers, hashed by ``SeedSequence``), so
every experiment replays bit-exactly for the same seed.
"""

from typing import NamedTuple

import numpy as np

from ._validation import check_count, check_matrix, check_vector
from .exceptions import ArgumentError, NumericalFailure

#: Relative cutoff below which a singular value is treated as zero.
RANK_RTOL = 1e-12


class SvdResult(NamedTuple):
    """Thin SVD ``M = U @ diag(s) @ V.T``.

    ``U`` and ``V`` hold orthonormal columns; ``s`` is nonincreasing.
    """

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    def reconstruct(self):
        return (self.U * self.s) @ self.V.T


def make_rng(seed):
    """Return a ``numpy.random.Generator`` (PCG64) for an integer or tuple seed."""
    if isinstance(seed, (tuple, list)):
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(s) for s in seed])))
    return np.random.Generator(np.random.PCG64(int(seed)))


def _fix_signs(U, V):
    # first nonzero entry of every left vector made nonnegative
    for j in range(U.shape[1]):
        col = U[:, j]
        nz = np.flatnonzero(np.abs(col) > 0)
        if nz.size and col[nz[0]] < 0:
            U[:, j] = -col
            V[:, j] = -V[:, j]
    return U, V


def svd(M):
    """Thin SVD with singular vectors under a deterministic sign convention."""
    M = check_matrix(M, "M")
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    U, V = _fix_signs(np.array(U), np.array(Vt.T))
    return SvdResult(U, s, V)


def _cutoff(s):
    return RANK_RTOL * s[0] if s.size else 0.0


def pinv(M):
    """Moore-Penrose pseudoinverse; singular values below 1e-12 * max are dropped."""
    M = check_matrix(M, "M")
    U, s, V = svd(M)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((M.shape[1], M.shape[0]))
    keep = s > _cutoff(s)
    return (V[:, keep] / s[keep]) @ U[:, keep].T


def numerical_rank(M):
    s = svd(M).s
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > _cutoff(s)))


def rank_r_approx(M, r):
    """Top-``r`` singular triplets of ``M`` (the best rank-``r`` approximation)."""
    M = check_matrix(M, "M")
    r = check_count(r, "r")
    if r > min(M.shape):
        raise ArgumentError(f"rank r={r} exceeds min(shape)={min(M.shape)}")
    U, s, V = svd(M)
    return SvdResult(U[:, :r], s[:r], V[:, :r])


def condition_number(M):
    """``s_max / s_min`` over the ``min(m, n)`` singular values.

    Returns ``inf`` when the smallest singular value falls under the rank
    tolerance.
    """
    M = check_matrix(M, "M")
    s = svd(M).s
    if s[0] == 0.0:
        raise ArgumentError("condition number of the zero matrix is undefined")
    smin = s[-1]
    if smin <= _cutoff(s):
        return float("inf")
    return float(s[0] / smin)


def cos_sin(u, v):
    """Cosine and (nonnegative) sine of the angle between two vectors."""
    u = check_vector(u, "u")
    v = check_vector(v, "v", size=u.shape[0])
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ArgumentError("cos/sin undefined for a zero vector")
    u, v = u / nu, v / nv
    c = float(np.clip(u @ v, -1.0, 1.0))
    # residual norm keeps full precision near parallel vectors, unlike sqrt(1 - c^2)
    return c, float(min(1.0, np.linalg.norm(u - c * v)))


def random_orthonormal(d, seed):
    """Haar-distributed ``d x d`` orthonormal matrix from a Gaussian via QR."""
    d = check_count(d, "d")
    G = make_rng(seed).standard_normal((d, d))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def orthonormal_basis(M):
    """Orthonormal basis of the column span of ``M`` (numerical rank aware)."""
    U, s, _ = svd(M)
    if s[0] == 0.0:
        raise ArgumentError("column span of the zero matrix is trivial")
    return U[:, s > _cutoff(s)]


def subspace_sin(A, B):
    """Sine of the largest principal angle between span(A) and span(B).

    ``A`` and ``B`` may be vectors or matrices with the same row count. For
    equal-dimensional subspaces this is zero iff the spans coincide.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    A = A.reshape(-1, 1) if A.ndim == 1 else A
    B = B.reshape(-1, 1) if B.ndim == 1 else B
    Qa, Qb = orthonormal_basis(A), orthonormal_basis(B)
    if Qa.shape[1] > Qb.shape[1]:
        Qa, Qb = Qb, Qa
    # residual of the smaller basis after projecting onto the larger one
    resid = Qa - Qb @ (Qb.T @ Qa)
    return float(min(1.0, np.linalg.norm(resid, 2)))
