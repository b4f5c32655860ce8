"""Extremal eigenpairs of large Hermitian operators.

The workhorse is :func:`lowest_k`, a thick-restart Lanczos iteration with
full reorthogonalization.  Operators only need ``shape``, ``dtype`` and a
``matvec`` method, so matrix-free Hamiltonians with ~10^6 basis states can be
diagonalized without ever storing a matrix.  :func:`dense_reference` is the
exact counterpart used as an oracle in tests.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SparseHermitian",
    "EigenResult",
    "EigensolverError",
    "CapacityError",
    "matvec",
    "estimate_norm",
    "lowest_k",
    "dense_reference",
    "save_eigenvectors",
    "load_eigenvectors",
]

CLUSTER_RTOL = 1e-8


class EigensolverError(RuntimeError):
    """Raised when Lanczos fails to converge; carries the best residuals seen."""

    def __init__(self, message, values=None, residuals=None, iterations=0):
        super().__init__(message)
        self.values = values
        self.residuals = residuals
        self.iterations = iterations


class CapacityError(ValueError):
    """Raised when a dense solve is requested above the configured cap."""


class SparseHermitian:
    """Hermitian matrix stored as the upper triangle (row <= col) in CSR form.

    Entries given below the diagonal are mirrored into the upper triangle by
    conjugation, so callers may hand over either triangle.  Duplicate
    ``(row, col)`` pairs are summed during assembly.
    """

    def __init__(self, dim, rows, cols, values):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values)
        if rows.shape != cols.shape or rows.shape != values.shape:
            raise ValueError("rows, cols and values must have the same length")
        if rows.size and (rows.min() < 0 or cols.min() < 0 or max(rows.max(), cols.max()) >= dim):
            raise IndexError("triplet index out of range")
        lower = rows > cols
        r = np.where(lower, cols, rows)
        c = np.where(lower, rows, cols)
        v = np.where(lower, np.conj(values), values)
        self.dim = int(dim)
        self.upper = sp.csr_matrix((v, (r, c)), shape=(dim, dim))
        self.upper.sum_duplicates()
        self.diagonal = self.upper.diagonal()
        self.dtype = np.result_type(self.upper.dtype, np.float64)
        self.shape = (self.dim, self.dim)

    @classmethod
    def from_dense(cls, a, atol=0.0):
        a = np.asarray(a)
        r, c = np.nonzero(np.triu(np.abs(a) > atol))
        return cls(a.shape[0], r, c, a[r, c])

    @property
    def nnz(self):
        return self.upper.nnz

    def triplets(self):
        coo = self.upper.tocoo()
        return coo.row, coo.col, coo.data

    def matvec(self, x):
        x = np.asarray(x)
        if x.shape[0] != self.dim:
            raise ValueError(f"vector length {x.shape[0]} does not match dim {self.dim}")
        y = self.upper @ x
        y = y + self.upper.conj().T @ x
        d = self.diagonal if x.ndim == 1 else self.diagonal[:, None]
        return y - d * x

    def toarray(self):
        u = self.upper.toarray()
        return u + u.conj().T - np.diag(self.diagonal)


def matvec(A, x):
    """Return ``A @ x`` for any operator exposing ``matvec``."""
    x = np.asarray(x)
    if x.shape[0] != A.shape[0]:
        raise ValueError(f"vector length {x.shape[0]} does not match operator dim {A.shape[0]}")
    return A.matvec(x)


@dataclass
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray  # columns are eigenvectors
    residuals: np.ndarray
    iterations: int = 0
    norm_estimate: float = float("nan")
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.values)


def estimate_norm(A, n_iter=12, seed=0):
    """Power-iteration estimate of the spectral norm (a lower bound)."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[0])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(n_iter):
        y = A.matvec(x)
        est = float(np.linalg.norm(y))
        if est == 0.0:
            return 0.0
        x = y / est
    return est


def _as_operator(A):
    if hasattr(A, "matvec") and hasattr(A, "shape"):
        return A
    if sp.issparse(A) or isinstance(A, np.ndarray):
        return _MatrixOperator(A)
    raise TypeError(f"unsupported operator type {type(A)!r}")


class _MatrixOperator:
    def __init__(self, a):
        self.a = a
        self.shape = a.shape
        self.dtype = np.result_type(a.dtype, np.float64)

    def matvec(self, x):
        return self.a @ x


def _orthogonalize(w, basis):
    # classical Gram-Schmidt, two passes
    if basis is None or len(basis) == 0:
        return w, None
    h = basis.conj() @ w
    w = w - h @ basis
    h2 = basis.conj() @ w
    w = w - h2 @ basis
    return w, h + h2


def _lanczos(A, nev, tol, max_matvecs, rng, krylov_dim, v0, locked, anorm):
    n = A.shape[0]
    dtype = np.result_type(A.dtype, np.float64)
    if v0 is not None:
        dtype = np.result_type(dtype, np.asarray(v0).dtype)
    m = min(krylov_dim, n - (0 if locked is None else len(locked)))
    nev = min(nev, m)
    threshold = tol * max(anorm, np.finfo(float).tiny)

    def random_vector():
        x = rng.standard_normal(n)
        if np.issubdtype(dtype, np.complexfloating):
            x = x + 1j * rng.standard_normal(n)
        return x.astype(dtype)

    V = np.zeros((m + 1, n), dtype=dtype)
    start = random_vector() if v0 is None else np.asarray(v0, dtype=dtype).copy()
    start, _ = _orthogonalize(start, locked)
    V[0] = start / np.linalg.norm(start)

    S = np.zeros((m, m))
    p = 0  # number of kept Ritz vectors at the head of V
    j = 0
    n_mv = 0
    best = None
    while True:
        w = A.matvec(V[j])
        n_mv += 1
        w, _ = _orthogonalize(w, locked)
        alpha = np.vdot(V[j], w).real
        w, _ = _orthogonalize(w, V[: j + 1])
        # the Krylov pass cancels most of w; purge locked components again so
        # round-off from the first pass is not amplified by 1/beta
        w, _ = _orthogonalize(w, locked)
        S[j, j] = alpha
        beta = float(np.linalg.norm(w))
        breakdown = beta <= 1e-13 * max(anorm, 1.0)
        if breakdown:
            # invariant subspace: continue from a fresh orthogonal direction
            w = random_vector()
            w, _ = _orthogonalize(w, locked)
            w, _ = _orthogonalize(w, V[: j + 1])
            w /= np.linalg.norm(w)
            coupling = 0.0
        else:
            w /= beta
            coupling = beta

        size = j + 1
        if size >= nev:
            theta, Y = np.linalg.eigh(S[:size, :size])
            res = np.abs(coupling * Y[size - 1, :nev])
            if best is None or res.max() < best[1].max():
                best = (theta[:nev].copy(), res.copy())
            if np.all(res <= threshold) or size == n - (0 if locked is None else len(locked)):
                X = Y[:, :nev].T @ V[:size]
                return theta[:nev], X, res, n_mv

        if n_mv >= max_matvecs:
            vals, res = best if best is not None else (None, None)
            raise EigensolverError(
                f"Lanczos did not converge within {max_matvecs} matrix-vector products",
                values=vals,
                residuals=res,
                iterations=n_mv,
            )

        if size < m:
            V[size] = w
            S[size - 1, size] = S[size, size - 1] = coupling
            j = size
            continue

        # thick restart: keep the lowest Ritz vectors plus the residual direction
        theta, Y = np.linalg.eigh(S)
        p = min(max(nev + (m - nev) // 2, nev + 1), m - 1)
        b = coupling * Y[m - 1, :p]
        V[:p] = Y[:, :p].T @ V[:m]
        V[p] = w
        S[:] = 0.0
        S[np.arange(p), np.arange(p)] = theta[:p]
        S[p, :p] = S[:p, p] = b
        j = p


def lowest_k(
    A,
    k,
    tol=1e-10,
    max_iter=20000,
    seed=0,
    krylov_dim=None,
    v0=None,
    complete_clusters=True,
    cluster_rtol=CLUSTER_RTOL,
):
    """Lowest ``k`` eigenpairs of a Hermitian operator by thick-restart Lanczos.

    Parameters
    ----------
    A : operator with ``shape``, ``dtype`` and ``matvec``, or an array/sparse matrix
    k : int
        Number of eigenpairs.
    tol : float
        Relative residual target: ``||A v - lam v|| <= tol * ||A||_est``.
    max_iter : int
        Cap on matrix-vector products per Lanczos pass.
    seed : int
        Seeds the start vector and the norm estimate.
    v0 : array, optional
        Start vector (e.g. a combination of nearby eigenvectors for warm starts).
    complete_clusters : bool
        After convergence, probe the orthogonal complement for eigenvalues
        missed by the single-vector recursion (exact degeneracies).  Clusters
        touching the k-th value are returned in full.

    Returns
    -------
    EigenResult
    """
    A = _as_operator(A)
    n = A.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    anorm = estimate_norm(A, seed=seed)
    if krylov_dim is None:
        krylov_dim = max(2 * k + 24, 40)
    krylov_dim = min(krylov_dim, n)

    if n <= krylov_dim:
        # the whole space fits in one Krylov basis; dense solve is exact
        ref = dense_reference(A, cap=n)
        return EigenResult(ref.values[:k], ref.vectors[:, :k], ref.residuals[:k], n, anorm)

    theta, X, res, n_mv = _lanczos(A, k, tol, max_iter, rng, krylov_dim, v0, None, anorm)
    total_mv = n_mv
    if complete_clusters:
        while len(theta) < n:
            scale = max(abs(theta[-1]), anorm, 1.0)
            try:
                t2, X2, r2, mv2 = _lanczos(A, 1, tol, max_iter, rng, krylov_dim, None, X, anorm)
            except EigensolverError:
                break
            total_mv += mv2
            if t2[0] > theta[-1] + cluster_rtol * scale:
                break
            theta = np.concatenate([theta, t2])
            X = np.vstack([X, X2])
            res = np.concatenate([res, r2])
            order = np.argsort(theta, kind="stable")
            theta, X, res = theta[order], X[order], res[order]
            if len(theta) > k:
                # drop the top value unless it is degenerate with the k-th
                keep = len(theta)
                while keep > k and theta[keep - 1] > theta[k - 1] + cluster_rtol * scale:
                    keep -= 1
                theta, X, res = theta[:keep], X[:keep], res[:keep]

    vectors = X.T.copy()
    residuals = np.array(
        [np.linalg.norm(A.matvec(vectors[:, i]) - theta[i] * vectors[:, i]) for i in range(len(theta))]
    )
    limit = 100 * tol * max(anorm, 1.0)
    if residuals.max() > limit:
        raise EigensolverError(
            f"explicit residual {residuals.max():.3g} exceeds {limit:.3g}",
            values=np.asarray(theta), residuals=residuals, iterations=total_mv,
        )
    return EigenResult(np.asarray(theta), vectors, residuals, total_mv, anorm)


def _to_dense(A):
    if isinstance(A, SparseHermitian):
        return A.toarray()
    if isinstance(A, np.ndarray):
        return A
    if sp.issparse(A):
        return A.toarray()
    A = _as_operator(A)
    if hasattr(A, "toarray"):
        return A.toarray()
    n = A.shape[0]
    eye = np.eye(n, dtype=np.result_type(A.dtype, np.float64))
    return np.column_stack([A.matvec(eye[:, i]) for i in range(n)])


def dense_reference(A, cap=4096):
    """Full spectrum by dense Hermitian diagonalization (exact oracle)."""
    n = A.shape[0]
    if n > cap:
        raise CapacityError(f"dimension {n} exceeds dense cap {cap}")
    a = _to_dense(A)
    values, vectors = np.linalg.eigh(a)
    residuals = np.linalg.norm(a @ vectors - vectors * values, axis=0)
    return EigenResult(values, vectors, residuals, 0, float(np.linalg.norm(a, 2)) if n <= 512 else float("nan"))


# binary layout: <int64 dim><int64 k> then k vectors of dim (re, im) float64 pairs
def save_eigenvectors(path, vectors):
    vectors = np.asarray(vectors, dtype=np.complex128)
    dim, k = vectors.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<qq", dim, k))
        fh.write(np.ascontiguousarray(vectors.T).astype("<c16").tobytes())


def load_eigenvectors(path):
    data = Path(path).read_bytes()
    dim, k = struct.unpack("<qq", data[:16])
    flat = np.frombuffer(data[16:], dtype="<c16", count=dim * k)
    return flat.reshape(k, dim).T.copy()
