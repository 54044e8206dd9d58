"""Self-contained dense and tridiagonal linear algebra.

Symmetric eigensolvers (implicit-shift QL on tridiagonal form, Householder
reduction for dense input, Cholesky whitening for the symmetric-definite
generalized problem) plus an LU solver with partial pivoting. Everything
is plain numpy array arithmetic, bit-reproducible across runs, with a
deterministic eigenvector sign convention: the largest-magnitude component
of each vector is made positive (first index wins ties).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonConvergenceError, SingularMatrixError

__all__ = [
    "SymMatrix",
    "EigenDecomposition",
    "GeneralizedEigenDecomposition",
    "eig_sym_tridiagonal",
    "eig_sym_dense",
    "eig_sym_generalized",
    "cholesky_lower",
    "solve_dense",
    "solve_lower",
    "solve_upper",
    "lu_logdet",
]

_MAX_QL_SWEEPS = 50


class SymMatrix:
    """Dense real symmetric matrix with exactly mirrored storage."""

    __slots__ = ("mat",)

    def __init__(self, mat):
        a = np.array(mat, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"need a square matrix, got shape {a.shape}")
        scale = np.max(np.abs(a)) if a.size else 0.0
        if scale and np.max(np.abs(a - a.T)) > 1e-10 * scale:
            raise ValueError("matrix is not symmetric")
        self.mat = 0.5 * (a + a.T)

    @property
    def order(self) -> int:
        return self.mat.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.array(self.mat, dtype=dtype)


def _as_square_array(A) -> np.ndarray:
    a = A.mat if isinstance(A, SymMatrix) else np.asarray(A, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"need a square matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues and orthonormal eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray


@dataclass(frozen=True)
class GeneralizedEigenDecomposition:
    """H Gamma = Omega Gamma diag(values), with Gamma^T Omega Gamma = I.

    eta and tau are the diagonals of Gamma^T H Gamma and Gamma^T Omega
    Gamma, so values = eta / tau (tau is 1 up to roundoff under the
    whitening normalization used here).
    """

    values: np.ndarray
    vectors: np.ndarray
    eta: np.ndarray
    tau: np.ndarray


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        lead = col[int(np.argmax(np.abs(col)))]
        if lead < 0.0:
            vectors[:, j] = -col
    return vectors


def _ql_implicit(d: np.ndarray, e: np.ndarray, z: np.ndarray | None):
    """Implicit-shift QL on a tridiagonal matrix (EISPACK tql family).

    d: diagonal (modified in place to eigenvalues), e: subdiagonal with a
    trailing zero sentinel, z: matrix whose columns accumulate rotations
    (or None for values only).
    """
    n = d.size
    eps = np.finfo(float).eps
    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            sweeps += 1
            if sweeps > _MAX_QL_SWEEPS:
                raise NonConvergenceError(
                    f"QL iteration stalled at eigenvalue index {l}"
                )
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + np.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if z is not None:
                    # copies: both targets are overwritten below
                    col_i = z[:, i].copy()
                    col_j = z[:, i + 1].copy()
                    z[:, i + 1] = s * col_i + c * col_j
                    z[:, i] = c * col_i - s * col_j
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0


def _finish(values: np.ndarray, vectors: np.ndarray | None) -> EigenDecomposition:
    order = np.argsort(values, kind="stable")
    values = values[order]
    if vectors is None:
        return EigenDecomposition(values=values, vectors=None)
    vectors = _fix_signs(vectors[:, order])
    return EigenDecomposition(values=values, vectors=vectors)


def eig_sym_tridiagonal(diag, offdiag, want_vectors: bool = True) -> EigenDecomposition:
    """Eigendecomposition of a symmetric tridiagonal matrix.

    diag has length n, offdiag length n-1. Eigenvalues come back
    ascending; eigenvectors (columns) are orthonormal.
    """
    d = np.array(diag, dtype=float)
    off = np.asarray(offdiag, dtype=float)
    n = d.size
    if off.shape != (max(n - 1, 0),):
        raise ValueError("offdiag must have length n-1")
    e = np.zeros(n)
    e[: n - 1] = off
    z = np.eye(n) if want_vectors else None
    _ql_implicit(d, e, z)
    return _finish(d, z)


def _householder_tridiagonalize(a: np.ndarray):
    """Reduce symmetric a to tridiagonal form; returns (d, e, q).

    q accumulates the orthogonal transform so that q^T a q is tridiagonal
    with diagonal d and subdiagonal e.
    """
    n = a.shape[0]
    a = a.copy()
    q = np.eye(n)
    e = np.zeros(n)
    for k in range(n - 2):
        x = a[k + 1:, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            e[k] = 0.0
            continue
        if x[0] > 0.0:
            alpha = -alpha
        v = x.copy()
        v[0] -= alpha
        vnorm = np.linalg.norm(v)
        if vnorm == 0.0:
            e[k] = alpha
            continue
        v /= vnorm
        # rank-2 update of the trailing block: A <- (I-2vv^T) A (I-2vv^T)
        sub = a[k + 1:, k + 1:]
        w = sub @ v
        w -= v * (v @ w)
        sub -= 2.0 * (np.outer(v, w) + np.outer(w, v))
        a[k + 1:, k] = 0.0
        a[k, k + 1:] = 0.0
        a[k + 1, k] = alpha
        a[k, k + 1] = alpha
        e[k] = alpha
        qsub = q[:, k + 1:]
        qsub -= 2.0 * np.outer(qsub @ v, v)
    if n >= 2:
        e[n - 2] = a[n - 1, n - 2]
    d = np.diag(a).copy()
    return d, e[: max(n - 1, 0)], q


def eig_sym_dense(A) -> EigenDecomposition:
    """Eigendecomposition of a dense real symmetric matrix."""
    a = _as_square_array(A)
    n = a.shape[0]
    if n == 0:
        return EigenDecomposition(values=np.zeros(0), vectors=np.zeros((0, 0)))
    if n == 1:
        return EigenDecomposition(values=a[0, :1].copy(), vectors=np.ones((1, 1)))
    d, off, q = _householder_tridiagonalize(a)
    e = np.zeros(n)
    e[: n - 1] = off
    _ql_implicit(d, e, q)
    return _finish(d, q)


def cholesky_lower(A) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive definite matrix."""
    a = _as_square_array(A)
    n = a.shape[0]
    L = np.zeros_like(a)
    scale = max(np.max(np.abs(a)), 1.0) if a.size else 1.0
    for j in range(n):
        s = a[j, j] - L[j, :j] @ L[j, :j]
        if s <= 1e-14 * scale:
            raise SingularMatrixError(
                f"matrix not positive definite at pivot {j} (value {s:.3e})"
            )
        L[j, j] = np.sqrt(s)
        if j + 1 < n:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def solve_lower(L: np.ndarray, B):
    """Solve L X = B with L lower triangular."""
    b = np.array(B, dtype=float)
    vec = b.ndim == 1
    x = b.reshape(b.shape[0], -1)
    n = L.shape[0]
    for i in range(n):
        x[i] = (x[i] - L[i, :i] @ x[:i]) / L[i, i]
    return x[:, 0] if vec else x


def solve_upper(U: np.ndarray, B):
    """Solve U X = B with U upper triangular."""
    b = np.array(B, dtype=float)
    vec = b.ndim == 1
    x = b.reshape(b.shape[0], -1)
    n = U.shape[0]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - U[i, i + 1:] @ x[i + 1:]) / U[i, i]
    return x[:, 0] if vec else x


def eig_sym_generalized(H, Omega) -> GeneralizedEigenDecomposition:
    """Solve H Gamma = Omega Gamma diag(values) for SPD Omega.

    Whitening route: with Omega = L L^T the problem becomes an ordinary
    symmetric eigenproblem for L^-1 H L^-T, and Gamma = L^-T Q. The
    returned Gamma is Omega-orthonormal (tau = 1 up to roundoff).
    """
    h = _as_square_array(H)
    w = _as_square_array(Omega)
    if h.shape != w.shape:
        raise ValueError("H and Omega must have the same shape")
    L = cholesky_lower(w)
    inner = solve_lower(L, solve_lower(L, h).T)
    inner = 0.5 * (inner + inner.T)
    dec = eig_sym_dense(inner)
    gamma = solve_upper(L.T, dec.vectors)
    gamma = _fix_signs(gamma)
    eta = np.einsum("ij,jk,ki->i", gamma.T, h, gamma)
    tau = np.einsum("ij,jk,ki->i", gamma.T, w, gamma)
    return GeneralizedEigenDecomposition(
        values=dec.values, vectors=gamma, eta=eta, tau=tau
    )


def _lu_factor(a: np.ndarray):
    """Partial-pivot LU in place; returns (lu, perm, parity)."""
    n = a.shape[0]
    lu = a.copy()
    perm = np.arange(n)
    parity = 1.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if lu[p, k] == 0.0:
            raise SingularMatrixError(f"exactly singular pivot at column {k}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            parity = -parity
        lu[k + 1:, k] /= lu[k, k]
        if k + 1 < n:
            lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, perm, parity


def solve_dense(A, rhs):
    """Solve A x = rhs by LU with partial pivoting.

    rhs may be a vector or a matrix of stacked right-hand sides. Raises
    SingularMatrixError with a crude condition estimate when a pivot
    vanishes or the factorization signals numerical singularity.
    """
    a = np.asarray(A, dtype=float) if not isinstance(A, SymMatrix) else A.mat
    a = _as_square_array(a)
    lu, perm, _ = _lu_factor(a)
    diag = np.abs(np.diag(lu))
    if diag.size and diag.min() < 1e-14 * diag.max():
        cond = diag.max() / max(diag.min(), 1e-300)
        raise SingularMatrixError(
            f"matrix numerically singular (pivot-ratio estimate {cond:.3e})"
        )
    b = np.array(rhs, dtype=float)
    vec = b.ndim == 1
    x = b.reshape(b.shape[0], -1)[perm]
    n = a.shape[0]
    for i in range(n):  # forward: unit lower triangle
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):  # backward
        x[i] = (x[i] - lu[i, i + 1:] @ x[i + 1:]) / lu[i, i]
    return x[:, 0] if vec else x


def lu_logdet(A) -> tuple[float, float]:
    """(sign, log|det|) of a square matrix via LU.

    Returns sign 0.0 and -inf for an exactly singular matrix.
    """
    a = _as_square_array(A)
    if a.shape[0] == 0:
        return 1.0, 0.0
    try:
        lu, _, parity = _lu_factor(a)
    except SingularMatrixError:
        return 0.0, -np.inf
    d = np.diag(lu)
    sign = parity * np.prod(np.sign(d))
    return float(sign), float(np.sum(np.log(np.abs(d))))
