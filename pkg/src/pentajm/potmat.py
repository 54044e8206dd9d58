"""Gauss quadrature on the basis measures and finite potential matrices.

Both basis families reduce to the same polynomial machinery. The orthonormal
polynomials of the normalized weight rho(u) = u^beta e^{-u} / Gamma(beta+1)
on (0, inf) satisfy the three-term recursion

    u p_n(u) = (2n+beta+1) p_n(u)
               - sqrt(n(n+beta)) p_{n-1}(u)
               - sqrt((n+1)(n+beta+1)) p_{n+1}(u),

so their truncated Jacobi matrix has diagonal 2n+beta+1 and off-diagonal
-sqrt((n+1)(n+beta+1)). Its eigenvalues are the quadrature nodes and the
squared first components of its normalized eigenvectors are the weights.
The Laguerre family uses the polynomial variable u = x directly; the
oscillator family uses u = x^2. Either way the rule integrates against
rho(u) du and is exact for polynomial integrands of degree <= 2N-1.

Measure bookkeeping for potential matrices. The basis functions behave like
x^{(beta+2)/2} e^{-x/2} p_n(x) (Laguerre) and sqrt(2) x^{beta+3/2}
e^{-x^2/2} p_n(x^2) (oscillator), normalized against Gamma(beta+1), with
x = lambda r. A product of two basis functions against plain dx is then

    Laguerre:   p_n(x) p_m(x) x^{beta+2} e^{-x} / Gamma(beta+1) dx
    oscillator: p_n(y) p_m(y) y^{beta+1} e^{-y}  / Gamma(beta+1) dy,  y = x^2

after substituting y in the oscillator case. Matrix elements of a local
potential U(r) in the SAME dx measure as the reference-wave operator and
overlap matrices of refsol therefore hand the rule the integrand

    Laguerre:   g(eps) = eps^2 * U(eps / lambda)
    oscillator: g(eps) = eps   * U(sqrt(eps) / lambda)

with the basis beta entering the rule unchanged. The leftover powers (eps^2
and eps) are absorbed into the integrand, never into the measure. Handing
U alone would instead produce matrix elements in the x^{-2} dx inner
product, which is not the measure the rest of the engine works in, and
would silently break cross-basis agreement of scattering output.

Explicit QuadratureRule objects keep their weights in double precision,
which underflows once the largest node passes ~745 (rule order around 180
for beta = 0). potential_matrix never builds a rule; it applies the
eigenvector transform directly, so it has no such ceiling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateSpectrumError, NonConvergenceError
from .linalg import eig_sym_tridiagonal
from .refsol import LAGUERRE, OSCILLATOR, BasisSpec

__all__ = [
    "WITH_WEIGHT",
    "DERIVATIVE_WEIGHT",
    "POTENTIAL_KINDS",
    "JacobiMatrix",
    "QuadratureRule",
    "PotentialModel",
    "jacobi_matrix",
    "nodes_and_weights",
    "alternative_weights",
    "quadrature_integrate",
    "quadrature_transform",
    "radial_nodes",
    "absorbed_node_values",
    "potential_matrix",
]

WITH_WEIGHT = "with_weight"
DERIVATIVE_WEIGHT = "derivative_weight"
_MODES = (WITH_WEIGHT, DERIVATIVE_WEIGHT)

POTENTIAL_KINDS = (
    "exponential",
    "gaussian",
    "poschl-teller-cosh",
    "custom-tabulated",
)

_CROSS_CHECK_TOL = 1e-10
# interlacing gaps in the far tail shrink below double resolution (the
# sub-rule's top node approaches the rule's top node exponentially fast),
# so ordering violations up to roundoff scale are tolerated
_INTERLACE_SLACK = 1e-12


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class JacobiMatrix:
    """Truncated symmetric tridiagonal recursion matrix of a basis measure."""

    diag: np.ndarray
    offdiag: np.ndarray
    beta: float

    def __post_init__(self) -> None:
        diag = _readonly(self.diag)
        off = _readonly(self.offdiag)
        if diag.ndim != 1 or diag.size < 1:
            raise ValueError("diag must be a non-empty 1-d array")
        if off.shape != (diag.size - 1,):
            raise ValueError("offdiag must have length order-1")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "offdiag", off)

    @property
    def order(self) -> int:
        return self.diag.size

    def to_dense(self) -> np.ndarray:
        n = self.order
        dense = np.zeros((n, n))
        dense[np.arange(n), np.arange(n)] = self.diag
        idx = np.arange(n - 1)
        dense[idx, idx + 1] = self.offdiag
        dense[idx + 1, idx] = self.offdiag
        return dense


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss rule for the normalized weight u^beta e^{-u} / Gamma(beta+1).

    nodes are strictly increasing and positive, weights are positive and sum
    to one. sub_nodes, when present, holds the order-(N-1) spectrum used by
    the product-formula cross-check; it interlaces the nodes strictly.
    """

    nodes: np.ndarray
    weights: np.ndarray
    order: int
    beta: float
    sub_nodes: np.ndarray | None = None

    def __post_init__(self) -> None:
        nodes = _readonly(self.nodes)
        weights = _readonly(self.weights)
        if nodes.shape != (self.order,) or weights.shape != (self.order,):
            raise ValueError("nodes and weights must both have length order")
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if not np.all(np.isfinite(nodes)) or not np.all(np.isfinite(weights)):
            raise ValueError("nodes and weights must be finite")
        if nodes[0] <= 0.0:
            raise ValueError("nodes must be positive")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("nodes must be strictly increasing")
        if np.any(weights <= 0.0):
            raise ValueError("weights must be positive")
        total = float(weights.sum())
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"weights must sum to 1, got {total!r}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if self.sub_nodes is not None:
            sub = _readonly(self.sub_nodes)
            if sub.shape != (self.order - 1,):
                raise ValueError("sub_nodes must have length order-1")
            _check_interlacing(nodes, sub)
            object.__setattr__(self, "sub_nodes", sub)

    @cached_property
    def derivative_weights(self) -> np.ndarray:
        # omega / rho(eps) computed in logs: the ratio stays polynomially
        # bounded even where omega and 1/rho separately over/underflow.
        logs = (
            np.log(self.weights)
            + self.nodes
            - self.beta * np.log(self.nodes)
            + math.lgamma(self.beta + 1.0)
        )
        return _readonly(np.exp(logs))


def jacobi_matrix(basis: BasisSpec, order: int) -> JacobiMatrix:
    """Order-N recursion matrix of the basis polynomial measure.

    The oscillator family shares the Laguerre-type matrix because its
    polynomials live in the variable y = x^2 with the same beta.
    """
    if not isinstance(order, (int, np.integer)) or isinstance(order, bool):
        raise ValueError("order must be an integer")
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    n = np.arange(order, dtype=float)
    diag = 2.0 * n + basis.beta + 1.0
    m = n[:-1]
    off = -np.sqrt((m + 1.0) * (m + basis.beta + 1.0))
    return JacobiMatrix(diag=diag, offdiag=off, beta=float(basis.beta))


def _check_interlacing(eps: np.ndarray, sub: np.ndarray) -> None:
    """eps[0] < sub[0] < eps[1] < ... up to roundoff-scale slack."""
    slack = _INTERLACE_SLACK * max(1.0, float(np.abs(eps).max()))
    worst = max(float((eps[:-1] - sub).max()), float((sub - eps[1:]).max()))
    if worst > slack:
        raise DegenerateSpectrumError(
            f"sub-rule nodes break interlacing by {worst:.3e} (slack {slack:.3e})"
        )


def _product_weights(eps: np.ndarray, sub: np.ndarray) -> np.ndarray:
    """Weights from the two nested spectra alone, in log form.

    omega_n = prod_m (eps_n - sub_m) / prod_{k != n} (eps_n - eps_k). Both
    products share their sign pattern, so the ratio is positive; logs keep
    the intermediate products from overflowing at large order.
    """
    n = eps.size
    # a fully collapsed tail gap shows up as an exact zero factor; floor it
    # at a value far below any honest gap so the weight rounds to zero
    # instead of tripping log(0)
    floor = 1e-290
    out = np.empty(n)
    for i in range(n):
        num = np.maximum(np.abs(eps[i] - sub), floor)
        den = np.abs(np.delete(eps, i) - eps[i])
        if np.any(den == 0.0):
            raise DegenerateSpectrumError("coincident quadrature nodes")
        out[i] = math.exp(np.log(num).sum() - np.log(den).sum())
    return out


def nodes_and_weights(J: JacobiMatrix, cross_check: bool = True) -> QuadratureRule:
    """Gauss rule of a Jacobi matrix: spectrum plus squared first components.

    With cross_check on (the default) the weights are re-derived from the
    eigenvalue-only product formula on the first-row/column-deleted
    submatrix and must agree to 1e-10 of the largest weight, and the two
    spectra must interlace. The comparison is scale-normalized, not
    elementwise relative: the product formula divides by interlacing gaps
    that close up exponentially in the tail, so the smallest weights carry
    no relative accuracy in double precision there (their absolute error
    stays at roundoff).
    """
    if J.order > 1 and np.any(J.offdiag == 0.0):
        raise ValueError("off-diagonal entries must be nonzero")
    dec = eig_sym_tridiagonal(J.diag, J.offdiag, want_vectors=True)
    eps = dec.values
    weights = dec.vectors[0, :] ** 2
    sub = None
    if cross_check and J.order > 1:
        sub = eig_sym_tridiagonal(J.diag[1:], J.offdiag[1:], want_vectors=False).values
        _check_interlacing(eps, sub)
        alt = _product_weights(eps, sub)
        worst = float(np.abs(alt - weights).max() / weights.max())
        if worst > _CROSS_CHECK_TOL:
            raise NonConvergenceError(
                f"product-formula weights disagree by {worst:.3e} (tol 1e-10)"
            )
    return QuadratureRule(
        nodes=eps, weights=weights, order=J.order, beta=J.beta, sub_nodes=sub
    )


def alternative_weights(J: JacobiMatrix) -> np.ndarray:
    """Weights via the eigenvalue-only product formula, no eigenvectors."""
    if J.order > 1 and np.any(J.offdiag == 0.0):
        raise ValueError("off-diagonal entries must be nonzero")
    eps = eig_sym_tridiagonal(J.diag, J.offdiag, want_vectors=False).values
    if J.order == 1:
        return np.ones(1)
    sub = eig_sym_tridiagonal(J.diag[1:], J.offdiag[1:], want_vectors=False).values
    _check_interlacing(eps, sub)
    return _product_weights(eps, sub)


def quadrature_integrate(rule: QuadratureRule, f, mode: str = WITH_WEIGHT) -> float:
    """Weighted node sum of f: against rho(u) du, or against plain du.

    with_weight approximates the integral of rho*f and is exact for
    polynomial f of degree <= 2N-1; derivative_weight divides the weight
    function back out and approximates the integral of f itself.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    vals = np.array([float(f(x)) for x in rule.nodes])
    if not np.all(np.isfinite(vals)):
        raise ValueError("integrand is not finite at every node")
    w = rule.weights if mode == WITH_WEIGHT else rule.derivative_weights
    return float(w @ vals)


@dataclass(frozen=True)
class PotentialModel:
    """Short-range, everywhere-finite radial potential U(r).

    Analytic kinds take parameters (strength, range): strength in energy
    units, range in length units. The tabulated kind interpolates linearly
    between samples, holds the first value below the table, and is zero
    beyond it (short range by convention; nothing enforces the decay rate
    at runtime). Instances are callable on scalars or arrays of r >= 0.
    """

    kind: str
    parameters: tuple = ()
    table: tuple | None = None

    def __post_init__(self) -> None:
        kind = str(self.kind).lower().replace("ö", "o")
        object.__setattr__(self, "kind", kind)
        if kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if kind == "custom-tabulated":
            if self.table is None:
                raise ValueError("custom-tabulated potential needs a table")
            radii = _readonly(self.table[0])
            values = _readonly(self.table[1])
            if radii.ndim != 1 or radii.shape != values.shape or radii.size < 2:
                raise ValueError("table needs matching 1-d radii and values, >= 2 rows")
            if radii[0] < 0.0 or np.any(np.diff(radii) <= 0.0):
                raise ValueError("table radii must be >= 0 and strictly increasing")
            if not (np.all(np.isfinite(radii)) and np.all(np.isfinite(values))):
                raise ValueError("table entries must be finite")
            object.__setattr__(self, "table", (radii, values))
            object.__setattr__(self, "parameters", tuple(self.parameters))
            return
        if self.table is not None:
            raise ValueError(f"{kind} potential takes no table")
        params = tuple(float(p) for p in self.parameters)
        if len(params) != 2:
            raise ValueError(f"{kind} potential takes (strength, range)")
        if not all(math.isfinite(p) for p in params):
            raise ValueError("potential parameters must be finite")
        if params[1] <= 0.0:
            raise ValueError(f"potential range must be > 0, got {params[1]}")
        object.__setattr__(self, "parameters", params)

    @classmethod
    def exponential(cls, strength: float, range_: float) -> "PotentialModel":
        return cls("exponential", (strength, range_))

    @classmethod
    def gaussian(cls, strength: float, range_: float) -> "PotentialModel":
        return cls("gaussian", (strength, range_))

    @classmethod
    def poschl_teller(cls, strength: float, range_: float) -> "PotentialModel":
        return cls("poschl-teller-cosh", (strength, range_))

    @classmethod
    def tabulated(cls, radii: Sequence[float], values: Sequence[float]) -> "PotentialModel":
        return cls("custom-tabulated", (), (np.asarray(radii), np.asarray(values)))

    def __call__(self, r):
        arr = np.asarray(r, dtype=float)
        if self.kind == "custom-tabulated":
            radii, values = self.table
            out = np.interp(arr, radii, values, left=values[0], right=0.0)
        else:
            strength, range_ = self.parameters
            s = arr / range_
            if self.kind == "exponential":
                out = strength * np.exp(-s)
            elif self.kind == "gaussian":
                out = strength * np.exp(-(s * s))
            else:
                out = strength / np.cosh(s) ** 2
        if np.ndim(r) == 0:
            return float(out)
        return out


def radial_nodes(basis: BasisSpec, nodes, lambda_scale: float) -> np.ndarray:
    """Radial points the quadrature nodes stand for: r = eps/lambda, or
    sqrt(eps)/lambda for the oscillator family living in y = (lambda r)^2."""
    eps = np.asarray(nodes, dtype=float)
    if basis.family == LAGUERRE:
        return eps / lambda_scale
    return np.sqrt(eps) / lambda_scale


def absorbed_node_values(
    basis: BasisSpec,
    potential: Callable[[np.ndarray], np.ndarray],
    lambda_scale: float,
    nodes,
) -> np.ndarray:
    """Integrand values handed to the rule for dx-measure matrix elements.

    The eps^2 (Laguerre) and eps (oscillator) factors carry the mismatch
    between the squared basis weight and the polynomial measure; see the
    module docstring for the derivation.
    """
    eps = np.asarray(nodes, dtype=float)
    u = np.asarray(potential(radial_nodes(basis, eps, lambda_scale)), dtype=float)
    if basis.family == LAGUERRE:
        return eps * eps * u
    return eps * u


def quadrature_transform(J: JacobiMatrix, node_values, size: int | None = None) -> np.ndarray:
    """Leading block of Lambda diag(values) Lambda^T for a Jacobi matrix.

    node_values is either an array aligned with the ascending eigenvalues
    or a callable evaluated on them. With constant values c this returns
    c times the identity, the eigenvector matrix being orthogonal.
    """
    if size is None:
        size = J.order
    if not 1 <= size <= J.order:
        raise ValueError(f"size must be in 1..{J.order}, got {size}")
    dec = eig_sym_tridiagonal(J.diag, J.offdiag, want_vectors=True)
    if callable(node_values):
        vals = np.asarray(node_values(dec.values), dtype=float)
    else:
        vals = np.asarray(node_values, dtype=float)
        if vals.ndim == 0:
            vals = np.full(J.order, float(vals))
    if vals.shape != (J.order,):
        raise ValueError("node values must match the rule order")
    if not np.all(np.isfinite(vals)):
        raise ValueError("node values must be finite")
    rows = dec.vectors[:size, :]
    out = (rows * vals) @ rows.T
    return 0.5 * (out + out.T)


def potential_matrix(
    basis: BasisSpec,
    model,
    lambda_scale: float,
    size: int,
    order: int | None = None,
) -> np.ndarray:
    """Matrix of a short-range potential over the first `size` basis states.

    model is a PotentialModel or any callable U(r). The quadrature order
    defaults to size + 128: analytic integrands converge to roundoff long
    before that, and the slowest smooth case (an exponential potential in
    the oscillator family, whose integrand has a sqrt branch point at the
    origin) still lands near 1e-12. order=size reproduces the bare
    equal-order eigenvector transform, which is only percent-level
    accurate at small sizes.
    """
    if not isinstance(size, (int, np.integer)) or isinstance(size, bool):
        raise ValueError("size must be an integer")
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    if not lambda_scale > 0.0:
        raise ValueError(f"lambda_scale must be > 0, got {lambda_scale}")
    if not callable(model):
        raise ValueError("model must be callable on r")
    if order is None:
        order = size + 128
    if order < size:
        raise ValueError(f"order must be >= size, got {order} < {size}")
    J = jacobi_matrix(basis, order)
    return quadrature_transform(
        J,
        lambda eps: absorbed_node_values(basis, model, lambda_scale, eps),
        size=size,
    )
