"""Finite Green's functions over a truncated basis, orthogonal or not.

The resolvent of the truncated problem is G(z) = (H - z Omega)^{-1}, with H
the wave-operator matrix and Omega the basis overlap (the identity for an
orthonormal basis). Two equivalent evaluations are provided.

Spectral sum (the default). The simultaneous diagonalization
H Gamma = Omega Gamma diag(eps) gives

    G_nm(z) = sum_i Gamma_ni Gamma_mi / (eta_i - z tau_i),

where eta and tau are the diagonals of Gamma^T H Gamma and
Gamma^T Omega Gamma; the value is independent of how the columns of Gamma
are scaled since eta and tau rescale together.

Eigenvalue-dominated route. On the diagonal, G_nn is a ratio of
characteristic products: det of the (n,n)-deleted pencil over det of the
full pencil, each expanded over its spectrum, so only eigenvalues enter.
Off the diagonal the cofactor formula applies:

    G_nm(z) = (-1)^{n+m} det(minor_nm(H - z Omega)) / det(H - z Omega).

A literal product over the spectrum of the deleted H-submatrix alone is
NOT correct off the diagonal: deleting row n and column m of Omega breaks
the pencil structure (the minor of the identity matrix is not an
identity), which the 2x2 exchange matrix [[0,1],[1,0]] already
demonstrates. The cofactor determinant is what the product notation is
shorthand for; both agree wherever the deleted overlap minor is
nonsingular. The n = m specialization evaluated at z = eps_k also yields
the eigenvector components squared from eigenvalues alone, and its
off-diagonal analog gives the products Gamma_nk Gamma_mk.

Eigen-data is computed once per (H, Omega). The deleted-minor spectra used
by the diagonal eigenvalue-only route are cached lazily per index, filled
under a lock: scattering needs only a handful of Green elements near the
matching edge, never the full matrix of sub-decompositions.
"""

from __future__ import annotations

import math
import threading

import numpy as np

from .errors import DegenerateSpectrumError, PoleError
from .linalg import (
    SymMatrix,
    cholesky_lower,
    eig_sym_dense,
    eig_sym_generalized,
    lu_logdet,
)

__all__ = [
    "FiniteGreen",
    "green_element",
    "green_element_eigenvalue_only",
    "eigenvector_products",
]

# eigenvalues closer than this (times the spectral scale) make the
# eigenvalue-only ratios meaningless; fail loudly instead of dividing
DEGENERACY_TOL = 1e-10
# z this close (times the spectral scale) to a pencil eigenvalue is a pole
POLE_TOL = 1e-12


def _logdet_spd(a: np.ndarray) -> float:
    if a.shape[0] == 0:
        return 0.0
    return 2.0 * float(np.sum(np.log(np.diag(cholesky_lower(a)))))


class FiniteGreen:
    """Cached eigen-data of the pencil (H, Omega) behind a resolvent.

    Omega=None means an orthonormal basis (identity overlap). Instances
    are immutable apart from idempotent lazy caches and safe to share
    across threads.
    """

    def __init__(self, H, Omega=None):
        h = H if isinstance(H, SymMatrix) else SymMatrix(H)
        self._h = h.mat
        self._size = h.order
        if self._size < 1:
            raise ValueError("need at least a 1x1 matrix")
        if Omega is None:
            self._omega = None
            dec = eig_sym_dense(self._h)
            values, vectors = dec.values, dec.vectors
            eta = values.copy()
            tau = np.ones(self._size)
            self._logdet_omega = 0.0
        else:
            w = Omega if isinstance(Omega, SymMatrix) else SymMatrix(Omega)
            if w.order != self._size:
                raise ValueError("H and Omega sizes differ")
            self._omega = w.mat
            gen = eig_sym_generalized(self._h, self._omega)
            values, vectors = gen.values, gen.vectors
            eta, tau = gen.eta, gen.tau
            self._logdet_omega = _logdet_spd(self._omega)
        for arr in (values, vectors, eta, tau):
            arr.setflags(write=False)
        self._values = values
        self._vectors = vectors
        self._eta = eta
        self._tau = tau
        self._scale = max(1.0, float(np.abs(values).max()))
        self._lock = threading.Lock()
        self._minor_cache: dict[int, tuple[np.ndarray, float]] = {}

    # ------------------------------------------------------------ data

    @property
    def size(self) -> int:
        return self._size

    @property
    def values(self) -> np.ndarray:
        """Generalized eigenvalues of (H, Omega), ascending."""
        return self._values

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    @property
    def eta(self) -> np.ndarray:
        return self._eta

    @property
    def tau(self) -> np.ndarray:
        return self._tau

    @property
    def is_orthogonal(self) -> bool:
        return self._omega is None

    def pole_distance(self, z: float) -> float:
        """Distance from z to the nearest pencil eigenvalue."""
        return float(np.abs(self._values - z).min())

    # ------------------------------------------------------------ guards

    def _check_z(self, z) -> float:
        if isinstance(z, complex) or not math.isfinite(float(z)):
            raise ValueError(f"z must be a finite real number, got {z!r}")
        z = float(z)
        if self.pole_distance(z) <= POLE_TOL * self._scale:
            raise PoleError(f"z = {z!r} sits on a pencil eigenvalue")
        return z

    def _check_index(self, *idx: int) -> None:
        for i in idx:
            if not isinstance(i, (int, np.integer)) or isinstance(i, bool):
                raise ValueError(f"index must be an integer, got {i!r}")
            if not 0 <= i < self._size:
                raise ValueError(f"index {i} outside 0..{self._size - 1}")

    def _check_gaps(self) -> None:
        if self._size < 2:
            return
        gap = float(np.diff(self._values).min())
        if gap < DEGENERACY_TOL * self._scale:
            raise DegenerateSpectrumError(
                f"eigenvalue gap {gap:.3e} below {DEGENERACY_TOL:.0e} * scale"
            )

    # ------------------------------------------------------------ minors

    def _principal_minor(self, n: int) -> tuple[np.ndarray, float]:
        """Spectrum of the (n,n)-deleted pencil and its overlap log-det."""
        with self._lock:
            hit = self._minor_cache.get(n)
            if hit is not None:
                return hit
        hd = np.delete(np.delete(self._h, n, axis=0), n, axis=1)
        if self._omega is None:
            if hd.shape[0] == 0:
                eps = np.zeros(0)
            else:
                eps = eig_sym_dense(hd).values
            entry = (eps, 0.0)
        else:
            wd = np.delete(np.delete(self._omega, n, axis=0), n, axis=1)
            if hd.shape[0] == 0:
                entry = (np.zeros(0), 0.0)
            else:
                eps = eig_sym_generalized(hd, wd).values
                entry = (eps, _logdet_spd(wd))
        entry[0].setflags(write=False)
        with self._lock:
            return self._minor_cache.setdefault(n, entry)

    def _minor_logdet(self, n: int, m: int, z: float) -> tuple[float, float]:
        """(sign, log|det|) of H - z*Omega with row n and column m deleted."""
        if self._omega is None:
            a = self._h - z * np.eye(self._size)
        else:
            a = self._h - z * self._omega
        sub = np.delete(np.delete(a, n, axis=0), m, axis=1)
        return lu_logdet(sub)


def _pole_product(sub: np.ndarray, eps: np.ndarray, z: float, skip: int | None) -> float:
    """prod(sub - z) / prod(eps - z), pairing factors to stay bounded.

    sub has one fewer entry than eps; when skip is given that index of eps
    is left out of the denominator instead (then lengths match). The
    minor spectra interlace eps, so the paired ratios are O(1) and the
    product never wanders through huge intermediates.
    """
    den = eps if skip is None else np.delete(eps, skip)
    out = 1.0
    for i in range(sub.size):
        out *= (sub[i] - z) / (den[i] - z)
    if skip is None:
        out /= den[-1] - z
    return out


def green_element(fg: FiniteGreen, n: int, m: int, z: float) -> float:
    """Resolvent element from the spectral sum over the pencil eigen-data."""
    fg._check_index(n, m)
    z = fg._check_z(z)
    terms = fg.vectors[n, :] * fg.vectors[m, :] / (fg.eta - z * fg.tau)
    return float(terms.sum())


def green_element_eigenvalue_only(fg: FiniteGreen, n: int, m: int, z: float) -> float:
    """Resolvent element from eigenvalues (plus one LU off the diagonal).

    Diagonal: ratio of the deleted-pencil characteristic product to the
    full one, times the overlap determinant ratio. Off-diagonal: cofactor
    determinant over the spectral expansion of det(H - z Omega).
    """
    fg._check_index(n, m)
    z = fg._check_z(z)
    fg._check_gaps()
    if n == m:
        sub, log_xi = fg._principal_minor(n)
        pref = math.exp(log_xi - fg._logdet_omega)
        return pref * _pole_product(sub, fg.values, z, skip=None)
    sign_minor, log_minor = fg._minor_logdet(n, m, z)
    if sign_minor == 0.0:
        return 0.0
    diffs = fg.values - z
    den_sign = float(np.prod(np.sign(diffs)))
    den_log = float(np.sum(np.log(np.abs(diffs)))) + fg._logdet_omega
    parity = -1.0 if (n + m) % 2 else 1.0
    return parity * sign_minor * den_sign * math.exp(log_minor - den_log)


def eigenvector_products(fg: FiniteGreen, n: int, m: int, k: int) -> float:
    """Gamma_nk Gamma_mk from eigenvalues alone (residue at eps_k).

    For n = m this is the squared component of the k-th normalized
    eigenvector written as a ratio of spectral products; off the diagonal
    the cofactor determinant supplies the product including its sign. In
    the generalized case the result is scaled by tau_k, matching vectors
    normalized to Gamma^T Omega Gamma = diag(tau).
    """
    fg._check_index(n, m, k)
    fg._check_gaps()
    eps = fg.values
    eps_k = float(eps[k])
    tau_k = float(fg.tau[k])
    if n == m:
        sub, log_xi = fg._principal_minor(n)
        pref = math.exp(log_xi - fg._logdet_omega)
        return tau_k * pref * _pole_product(sub, eps, eps_k, skip=k)
    sign_minor, log_minor = fg._minor_logdet(n, m, eps_k)
    if sign_minor == 0.0:
        return 0.0
    diffs = np.delete(eps, k) - eps_k
    den_sign = float(np.prod(np.sign(diffs)))
    den_log = float(np.sum(np.log(np.abs(diffs)))) + fg._logdet_omega
    parity = -1.0 if (n + m) % 2 else 1.0
    return tau_k * parity * sign_minor * den_sign * math.exp(log_minor - den_log)
