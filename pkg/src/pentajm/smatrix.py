"""S-matrix and phase shifts from the truncated wave operator.

The representation space splits into a finite inner block of size N, where
the short-range potential acts through its dense matrix, and a semi-infinite
outer tail where only the banded reference operator survives. Tail
coefficients therefore obey the free five-term recursion and must be a
combination of the two reference families, q_n = B+ F_n^+ + B- F_n^-.
Matching row N-1 of the combined system against the inner Green's function
fixes the single unknown ratio, and the physical normalization B+ = 1,
B- = -S turns that ratio into the scattering matrix:

    S = T_{N-1} * [1 + W R_N^+ + V R_{N+1}^+ R_N^+]
              / [1 + W R_N^- + V R_{N+1}^- R_N^-],

with W = G_{N-1,N-1} J_{N-1,N} + G_{N-1,N-2} J_{N-2,N} and
V = G_{N-1,N-1} J_{N-1,N+1} built from four Green elements of the inner
operator and the three boundary couplings of the reference bands. The
numerator and denominator brackets are exact complex conjugates (W, V are
real, the minus family is the conjugate of the plus family), so |S| = 1 is
structural; the reported unitarity defect measures only roundoff.

Two independent quality measures ride along with every evaluation. The
matching defect compares the row-(N-2) matching equation, which is not used
to determine S, against the tail values it should reproduce; it decays with
the potential-matrix tail and is the convergence diagnostic. The tail defect
is the relative size of the first potential-matrix columns outside the inner
block, the a-priori check that N was large enough for the split.

With the potential removed the matching equations hold identically for any
S, so the formula evaluates to a ratio of roundoff residues: the free
problem has no preferred scattering matrix. Results are still returned, with
their (large) defects on display, and it is the caller's job to flag them.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    NonConvergenceError,
    PoleError,
    PrecisionLossWarning,
    ZeroCoefficientError,
)
from .greens import FiniteGreen, green_element
from .linalg import SymMatrix, solve_dense
from .potmat import PotentialModel, potential_matrix
from .refsol import (
    BasisSpec,
    ExpansionCoefficients,
    PentaDiagonalOperator,
    PhysicalParams,
    expand_coefficients,
    overlap_bands,
    recursion_bands,
)

__all__ = [
    "KinematicCoefficients",
    "ScatteringResult",
    "OuterSolution",
    "InnerSystem",
    "kinematic_coefficients",
    "assemble_inner_operator",
    "s_matrix",
    "s_matrix_tridiagonal_limit",
    "outer_coefficients",
    "phase_shift",
    "unwrap_phase",
    "s_matrix_converged",
]

# Relative size of the potential-matrix columns just outside the inner block
# above which the truncation is considered unfaithful.
TAIL_TOL = 1e-8

# Row-(N-2) matching agreement required of a converged scattering result.
MATCHING_TOL = 1e-8


# ----------------------------------------------------------------------
# Kinematic ratios of the reference expansion coefficients.

@dataclass(frozen=True)
class KinematicCoefficients:
    """Coefficient ratios entering the matching formula.

    T[n] = F_n^+ / F_n^- is unimodular (the families are conjugates) and
    R<sign>[n] = F_n^<sign> / F_{n-1}^<sign> for n >= 1; R[0] has no meaning
    and is stored as nan.
    """

    T: np.ndarray
    Rplus: np.ndarray
    Rminus: np.ndarray
    n_max: int

    def __post_init__(self) -> None:
        for name in ("T", "Rplus", "Rminus"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != (self.n_max + 1,):
                raise ValueError(
                    f"{name} must have shape ({self.n_max + 1},), got {arr.shape}"
                )
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def kinematic_coefficients(coeffs: ExpansionCoefficients, upto: int) -> KinematicCoefficients:
    """Ratios T_n and R_n^+- for n = 0..upto.

    A coefficient that vanishes exactly sits at a false-scattering energy
    for its index: every ratio through it is undefined, so the offending
    index is reported instead of letting infinities propagate.
    """
    if not isinstance(upto, (int, np.integer)) or isinstance(upto, bool):
        raise ValueError(f"upto must be an integer, got {upto!r}")
    if not 1 <= upto <= coeffs.n_max:
        raise ValueError(f"upto must be in 1..{coeffs.n_max}, got {upto}")
    plus = coeffs.plus[: upto + 1]
    minus = coeffs.minus[: upto + 1]
    dead = np.nonzero(np.abs(minus) == 0.0)[0]
    if dead.size:
        raise ZeroCoefficientError(
            f"expansion coefficient vanishes at n = {int(dead[0])}; "
            "kinematic ratios are undefined at this energy"
        )
    T = plus / minus
    Rplus = np.empty(upto + 1, dtype=complex)
    Rminus = np.empty(upto + 1, dtype=complex)
    Rplus[0] = Rminus[0] = complex(math.nan, math.nan)
    Rplus[1:] = plus[1:] / plus[:-1]
    Rminus[1:] = minus[1:] / minus[:-1]
    return KinematicCoefficients(T=T, Rplus=Rplus, Rminus=Rminus, n_max=upto)


# ----------------------------------------------------------------------
# Inner-block assembly.

def _dense_overlap(basis: BasisSpec, size: int) -> np.ndarray:
    oa, ob, oc = overlap_bands(basis, size)
    return PentaDiagonalOperator(
        diag_a=oa, off1_b=ob[: size - 1], off2_c=oc[: size - 2], scale=1.0, size=size
    ).to_dense()


def assemble_inner_operator(
    basis: BasisSpec, params: PhysicalParams, model: PotentialModel, N: int
) -> SymMatrix:
    """Dense N x N total wave operator: banded reference part at the energy
    of `params` plus the quadrature potential matrix."""
    if not isinstance(N, (int, np.integer)) or isinstance(N, bool):
        raise ValueError(f"N must be an integer, got {N!r}")
    if N < 5:
        raise ValueError(f"N must be >= 5, got {N}")
    from .refsol import reference_jmatrix

    ref = reference_jmatrix(basis, params, N).to_dense()
    pot = potential_matrix(basis, model, params.lambda_scale, N)
    return SymMatrix(ref + pot)


class InnerSystem:
    """Energy-independent pieces of the inner block, reusable across a sweep.

    Holds H = (reference operator at zero energy) + (potential matrix), the
    basis overlap, and their generalized eigendecomposition; the operator at
    energy E is H - E * overlap, so one decomposition serves every energy.
    The wavenumber carried by `params` is ignored here; only the singularity
    strength and the basis scale enter.
    """

    def __init__(
        self,
        basis: BasisSpec,
        params: PhysicalParams,
        model: PotentialModel,
        N: int,
    ) -> None:
        if not isinstance(N, (int, np.integer)) or isinstance(N, bool):
            raise ValueError(f"N must be an integer, got {N!r}")
        if N < 5:
            raise ValueError(f"N must be >= 5, got {N}")
        self.basis = basis
        self.nu = params.nu
        self.lambda_scale = params.lambda_scale
        self.N = int(N)

        # Two extra columns probe the potential tail just outside the block.
        pot_ext = potential_matrix(basis, model, params.lambda_scale, self.N + 2)
        col_norms = np.sqrt((pot_ext * pot_ext).sum(axis=0))
        biggest = col_norms.max()
        self.tail_defect = float(col_norms[self.N :].max() / biggest) if biggest > 0.0 else 0.0
        self.potential = pot_ext[: self.N, : self.N].copy()
        self.potential_ext = pot_ext

        a0, b0, c0 = recursion_bands(basis, params, self.N, mu_sq=0.0)
        ref0 = PentaDiagonalOperator(
            diag_a=a0,
            off1_b=b0[: self.N - 1],
            off2_c=c0[: self.N - 2],
            scale=-0.5 * params.lambda_scale**2,
            size=self.N,
        ).to_dense()
        self.overlap = _dense_overlap(basis, self.N)
        self.hamiltonian = ref0 + self.potential
        self.green = FiniteGreen(self.hamiltonian, self.overlap)

    def matches(self, basis: BasisSpec, params: PhysicalParams, N: int) -> bool:
        return (
            basis == self.basis
            and N == self.N
            and params.nu == self.nu
            and params.lambda_scale == self.lambda_scale
        )

    def operator_at(self, energy: float) -> np.ndarray:
        return self.hamiltonian - energy * self.overlap

    def boundary_block(self, energy: float):
        """The four Green elements on indices {N-2, N-1} at this energy."""
        i, j = self.N - 2, self.N - 1
        g22 = green_element(self.green, i, i, energy)
        g21 = green_element(self.green, i, j, energy)
        g11 = green_element(self.green, j, j, energy)
        return g22, g21, g11


def _boundary_couplings(basis: BasisSpec, params: PhysicalParams, N: int):
    """Reference-operator entries (N-2,N), (N-1,N), (N-1,N+1) at the energy
    of `params`; these are the only couplings across the block edge."""
    a, b, c = recursion_bands(basis, params, N)
    scale = -0.5 * params.lambda_scale**2
    return scale * c[N - 2], scale * b[N - 1], scale * c[N - 1]


# ----------------------------------------------------------------------
# Scattering results.

@dataclass(frozen=True)
class ScatteringResult:
    """One scattering evaluation at fixed basis, potential, energy, N.

    `unitarity_defect` is ||S| - 1| as computed, never normalized away.
    `matching_defect` is the relative disagreement of the row-(N-2) matching
    equation with the tail values; `tail_defect` is the relative size of the
    first potential columns outside the block. Both near roundoff mean the
    truncation is faithful; either one large means the result is not
    converged at this N.
    """

    S: complex
    delta: float
    unitarity_defect: float
    N: int
    basis: BasisSpec
    energy: float
    matching_defect: float
    tail_defect: float


@dataclass(frozen=True)
class OuterSolution:
    """Combined inner/outer coefficient vector for one scattering solution.

    p[0..N-1] solve the dense inner system; q[i] is the tail coefficient at
    index first_outer + i. The matching indices N-2, N-1 appear in both and
    must agree. row_residuals[i] is the relative residual of row
    first_outer + i of the full (banded + potential) system evaluated on the
    combined vector.
    """

    p: np.ndarray
    q: np.ndarray
    first_outer: int
    row_residuals: np.ndarray
    result: ScatteringResult


def _tail_values(coeffs: ExpansionCoefficients, S: complex, lo: int, hi: int) -> np.ndarray:
    return coeffs.plus[lo:hi] - S * coeffs.minus[lo:hi]


def _prepare(basis, params, model, N, system, coeffs, min_n):
    if system is None:
        system = InnerSystem(basis, params, model, N)
    elif not system.matches(basis, params, N):
        raise ValueError("InnerSystem was built for different basis, size, or parameters")
    if system.tail_defect > TAIL_TOL:
        warnings.warn(
            f"potential tail beyond the inner block is {system.tail_defect:.3e} "
            f"of the largest column (tolerance {TAIL_TOL:.1e}); increase N",
            PrecisionLossWarning,
            stacklevel=3,
        )
    if coeffs is None:
        coeffs = expand_coefficients(basis, params, min_n)
    elif coeffs.n_max < min_n:
        raise ValueError(f"coefficients reach n = {coeffs.n_max}, need at least {min_n}")
    return system, coeffs


def _matching_defect(coeffs, S, N, g22, g21, g11, j2n, j1n, j1n1):
    """Relative error of the matching rows evaluated with this S.

    Row N-1 reproduces the construction of S and sits at roundoff; row N-2
    is not used in the formula and measures the actual truncation error.
    """
    q = _tail_values(coeffs, S, N - 2, N + 2)
    s2 = j2n * q[2]
    s1 = j1n * q[2] + j1n1 * q[3]
    predicted_m2 = -(g22 * s2 + g21 * s1)
    predicted_m1 = -(g21 * s2 + g11 * s1)
    scale = np.abs(q).max()
    if scale == 0.0:
        return 0.0
    return float(max(abs(predicted_m2 - q[0]), abs(predicted_m1 - q[1])) / scale)


def s_matrix(
    basis: BasisSpec,
    params: PhysicalParams,
    model: PotentialModel,
    N: int,
    *,
    system: InnerSystem | None = None,
    coeffs: ExpansionCoefficients | None = None,
    drop_second_band: bool = False,
) -> ScatteringResult:
    """Scattering matrix at the energy of `params` with inner block size N.

    `system` and `coeffs` allow reuse across a sweep (the system is energy
    independent, the coefficients are per energy). `drop_second_band` zeroes
    the two across-the-edge couplings of the second band, which collapses
    the matching onto its nearest-neighbor form; the inner operator itself
    keeps both bands.

    Raises PoleError when the energy sits on an inner-operator eigenvalue
    and ZeroCoefficientError at a false-scattering energy of the edge
    indices. A potential tail above TAIL_TOL only warns: the result is
    returned with its defects and the caller decides.
    """
    system, coeffs = _prepare(basis, params, model, N, system, coeffs, N + 1)
    kin = kinematic_coefficients(coeffs, N + 1)
    energy = params.energy

    g22, g21, g11 = system.boundary_block(energy)
    j2n, j1n, j1n1 = _boundary_couplings(basis, params, N)
    if drop_second_band:
        j2n = 0.0
        j1n1 = 0.0

    w = g11 * j1n + g21 * j2n
    v = g11 * j1n1
    num = 1.0 + w * kin.Rplus[N] + v * kin.Rplus[N + 1] * kin.Rplus[N]
    den = 1.0 + w * kin.Rminus[N] + v * kin.Rminus[N + 1] * kin.Rminus[N]
    # W and V are real and the minus ratios are conjugates of the plus ones,
    # so the two brackets must be conjugates; their failure would mean the
    # structure above was broken, not a numerical problem.
    assert abs(den - num.conjugate()) <= 1e-12 * max(abs(den), 1e-300)
    if den == 0.0:
        raise ZeroCoefficientError(
            f"matching denominator vanished at E = {energy!r}; "
            "the formula is degenerate here (free-problem limit or exact zero)"
        )
    S = complex(kin.T[N - 1] * num / den)

    defect = _matching_defect(coeffs, S, N, g22, g21, g11, j2n, j1n, j1n1)
    return ScatteringResult(
        S=S,
        delta=0.5 * cmath.phase(S),
        unitarity_defect=abs(abs(S) - 1.0),
        N=int(N),
        basis=basis,
        energy=energy,
        matching_defect=defect,
        tail_defect=system.tail_defect,
    )


def s_matrix_tridiagonal_limit(
    basis: BasisSpec,
    params: PhysicalParams,
    model: PotentialModel,
    N: int,
    *,
    system: InnerSystem | None = None,
    coeffs: ExpansionCoefficients | None = None,
) -> ScatteringResult:
    """Nearest-neighbor matching formula: only the first-band coupling
    crosses the block edge, S = T_{N-1} (1 + G J R^+) / (1 + G J R^-).

    This is the classic single-coupling result; it must agree with
    `s_matrix(..., drop_second_band=True)` to roundoff, and differs from the
    full formula by the neglected second-band boundary terms.
    """
    system, coeffs = _prepare(basis, params, model, N, system, coeffs, N + 1)
    kin = kinematic_coefficients(coeffs, N)
    energy = params.energy

    g22, g21, g11 = system.boundary_block(energy)
    _, j1n, _ = _boundary_couplings(basis, params, N)

    num = 1.0 + g11 * j1n * kin.Rplus[N]
    den = 1.0 + g11 * j1n * kin.Rminus[N]
    assert abs(den - num.conjugate()) <= 1e-12 * max(abs(den), 1e-300)
    if den == 0.0:
        raise ZeroCoefficientError(
            f"matching denominator vanished at E = {energy!r}"
        )
    S = complex(kin.T[N - 1] * num / den)

    defect = _matching_defect(coeffs, S, N, g22, g21, g11, 0.0, j1n, 0.0)
    return ScatteringResult(
        S=S,
        delta=0.5 * cmath.phase(S),
        unitarity_defect=abs(abs(S) - 1.0),
        N=int(N),
        basis=basis,
        energy=energy,
        matching_defect=defect,
        tail_defect=system.tail_defect,
    )


# ----------------------------------------------------------------------
# Full coefficient vector and residual diagnostics.

def outer_coefficients(
    basis: BasisSpec,
    params: PhysicalParams,
    model: PotentialModel,
    N: int,
    *,
    n_tail: int = 8,
    system: InnerSystem | None = None,
    result: ScatteringResult | None = None,
) -> OuterSolution:
    """Solve the dense inner system and extend it with the tail coefficients.

    q_n = F_n^+ - S F_n^- for n = N-2 .. N-3+n_tail; the inner vector p
    comes from the dense solve against the edge couplings, so p[N-2] and
    p[N-1] reproduce q independently of how S was extracted. Row residuals
    cover the six rows around the block edge, each normalized by its largest
    term.
    """
    if n_tail < 6:
        raise ValueError(f"n_tail must be >= 6, got {n_tail}")
    top = N - 3 + n_tail  # highest tail index used
    system, coeffs = _prepare(basis, params, model, N, system, None, top)
    if result is None:
        result = s_matrix(basis, params, model, N, system=system, coeffs=coeffs)
    S = result.S
    energy = params.energy

    q = _tail_values(coeffs, S, N - 2, top + 1)
    j2n, j1n, j1n1 = _boundary_couplings(basis, params, N)
    rhs = np.zeros(N, dtype=complex)
    rhs[N - 2] = -j2n * q[2]
    rhs[N - 1] = -(j1n * q[2] + j1n1 * q[3])
    # the operator is real, so the complex solve splits into two real ones
    both = solve_dense(system.operator_at(energy), np.column_stack([rhs.real, rhs.imag]))
    p = both[:, 0] + 1j * both[:, 1]

    # Combined vector over indices 0..top: inner solve up to N-3, tail after.
    u = np.concatenate([p[: N - 2], q])
    a, b, c = recursion_bands(basis, params, top + 1)
    scale = -0.5 * params.lambda_scale**2
    pot = system.potential_ext
    rows = range(N - 2, N + 4)
    residuals = np.empty(len(rows))
    for i, n in enumerate(rows):
        terms = [
            scale * c[n - 2] * u[n - 2],
            scale * b[n - 1] * u[n - 1],
            scale * a[n] * u[n],
            scale * b[n] * u[n + 1],
            scale * c[n] * u[n + 2],
        ]
        if n < pot.shape[0]:
            terms.append(pot[n, : pot.shape[1]] @ u[: pot.shape[1]])
        total = np.sum(terms)
        biggest = max(abs(complex(t)) for t in terms[:5])
        if n < pot.shape[0]:
            biggest = max(biggest, float(np.abs(pot[n, : pot.shape[1]] * u[: pot.shape[1]]).max()))
        residuals[i] = abs(total) / max(biggest, 1e-300)
    return OuterSolution(
        p=p, q=q, first_outer=N - 2, row_residuals=residuals, result=result
    )


# ----------------------------------------------------------------------
# Phase shifts.

def phase_shift(S: complex, tol: float = 1e-6) -> float:
    """Principal phase shift, delta = arg(S)/2 in (-pi/2, pi/2].

    Rejects an S whose modulus strays from 1 by more than `tol`: a phase
    extracted from a non-unitary matrix is not a phase shift.
    """
    defect = abs(abs(S) - 1.0)
    if not defect <= tol:
        raise NonConvergenceError(
            f"|S| deviates from unity by {defect:.3e} (tolerance {tol:.1e})"
        )
    return 0.5 * cmath.phase(S)


def unwrap_phase(deltas) -> np.ndarray:
    """Continuity restoration for a phase-shift sweep.

    The phase shift is defined modulo pi; each value is shifted by the
    multiple of pi that brings it nearest its unwrapped predecessor.
    """
    d = np.asarray(deltas, dtype=float)
    if d.ndim != 1:
        raise ValueError(f"expected a 1-d sequence, got shape {d.shape}")
    out = d.copy()
    for i in range(1, out.size):
        out[i] += math.pi * round((out[i - 1] - out[i]) / math.pi)
    return out


def _branch_distance(d1: float, d2: float) -> float:
    """Distance between two phases compared modulo pi."""
    diff = (d1 - d2) % math.pi
    return min(diff, math.pi - diff)


def s_matrix_converged(
    basis: BasisSpec,
    params: PhysicalParams,
    model: PotentialModel,
    *,
    n_start: int = 32,
    n_max: int = 2048,
    delta_tol: float = 1e-6,
    matching_tol: float = MATCHING_TOL,
) -> ScatteringResult:
    """Double the inner block until the phase shift settles.

    Accepts the first N whose phase shift moved less than `delta_tol`
    (modulo pi) from the previous size and whose matching and tail defects
    are below tolerance. Probing runs suppress the tail warning; sizes where
    the energy collides with an inner eigenvalue are skipped, since those
    poles move with N.

    For a supercritical inverse-square core the truncation index acts as a
    logarithmic regulator: the phase shift drifts like -nu*ln(N) modulo pi
    and never settles, the matching defect decays only algebraically, and
    the potential-matrix tail decays like a power of N. This driver is
    therefore expected to raise NonConvergenceError at the stated default
    tolerances; it exists so callers can prove that to themselves, and for
    use with deliberately loosened tolerances. Fixed-N evaluation with the
    defect fields of ScatteringResult is the honest mode of operation.
    """
    if n_start < 5:
        raise ValueError(f"n_start must be >= 5, got {n_start}")
    previous = None
    n = int(n_start)
    while n <= n_max:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", PrecisionLossWarning)
                current = s_matrix(basis, params, model, n)
        except PoleError:
            previous = None
            n *= 2
            continue
        if previous is not None:
            settled = _branch_distance(previous.delta, current.delta) < delta_tol
            clean = (
                current.matching_defect <= matching_tol
                and current.tail_defect <= TAIL_TOL
            )
            if settled and clean:
                return current
        previous = current
        n *= 2
    raise NonConvergenceError(
        f"phase shift did not settle to {delta_tol:.1e} with matching defect "
        f"below {matching_tol:.1e} for N up to {n_max}"
    )
