"""Reference-problem solutions in the two square-integrable bases.

The engine expands the outgoing/incoming reference waves chi_+- (imaginary-
order Hankel waves around a supercritical 1/r^2 core) in a Laguerre-type or
oscillator-type radial basis. The expansion coefficients obey a five-term
recursion whose coefficient bands also define the penta-diagonal reference
wave-operator matrix; everything downstream (potential matrix, finite
Green's function, S-matrix) consumes the objects built here.

Conventions: x = lambda*r is the dimensionless radial argument, mu = k/lambda,
nu = sqrt(A - (l+1/2)^2) > 0. All "bands" are the raw recursion coefficients
a_n, b_n, c_n; the wave-operator matrix carries the extra -lambda^2/2 factor
in its `scale` field.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from . import specfun
from .errors import PrecisionLossWarning, RegimeError, ZeroCoefficientError

LAGUERRE = "laguerre"
OSCILLATOR = "oscillator"
FAMILIES = (LAGUERRE, OSCILLATOR)

# software-float digits used by precision="extended" recursions
EXTENDED_DPS = 34

# dynamic-range guards for the weighted polynomial recursions
_RESCALE_EVERY = 8
_RESCALE_ABOVE = 1e180

_LN2 = math.log(2.0)


def effective_nu(ell: int, strength_A: float) -> float:
    """Imaginary-order parameter nu = sqrt(A - (ell+1/2)^2).

    Only the supercritical regime A > (ell+1/2)^2 is in scope; at or below
    the boundary the reference solutions change character entirely.
    """
    gap = strength_A - (ell + 0.5) ** 2
    if gap <= 0.0:
        raise RegimeError(
            f"coupling A = {strength_A} is not supercritical for ell = {ell}: "
            f"need A > (ell+1/2)^2 = {(ell + 0.5) ** 2}"
        )
    return math.sqrt(gap)


@dataclass(frozen=True)
class PhysicalParams:
    """Scattering parameters: angular momentum, core strength, wavenumber, basis scale.

    The inverse-square core is -A/(2 r^2); energy and wavenumber are tied by
    E = k^2/2. Instances are immutable and safe to share across workers.
    """

    ell: int
    strength_A: float
    k: float
    lambda_scale: float = 1.0

    def __post_init__(self) -> None:
        if not isinstance(self.ell, (int, np.integer)) or isinstance(self.ell, bool):
            raise ValueError(f"ell must be an integer, got {self.ell!r}")
        if self.ell < 0:
            raise ValueError(f"ell must be >= 0, got {self.ell}")
        for name in ("strength_A", "k", "lambda_scale"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValueError(f"{name} must be > 0, got {value!r}")
        effective_nu(self.ell, self.strength_A)  # raises RegimeError if subcritical

    @property
    def nu(self) -> float:
        return effective_nu(self.ell, self.strength_A)

    @property
    def mu(self) -> float:
        return self.k / self.lambda_scale

    @property
    def energy(self) -> float:
        return 0.5 * self.k * self.k


@dataclass(frozen=True)
class BasisSpec:
    """Basis family and its shape parameter beta ( > -1 ).

    The power alpha of the basis elements is not free: normalizability plus
    polynomial orthogonality pin it to (beta+2)/2 for the Laguerre family and
    beta + 3/2 for the oscillator family.
    """

    family: str
    beta: float

    def __post_init__(self) -> None:
        family = str(self.family).lower()
        object.__setattr__(self, "family", family)
        if family not in FAMILIES:
            raise ValueError(f"unknown basis family {self.family!r}; use one of {FAMILIES}")
        if not self.beta > -1.0:
            raise ValueError(f"beta must be > -1, got {self.beta}")

    @property
    def alpha(self) -> float:
        if self.family == LAGUERRE:
            return 0.5 * (self.beta + 2.0)
        return self.beta + 1.5


@dataclass(frozen=True)
class ExpansionCoefficients:
    """Reference-wave expansion coefficients F_n^+ and F_n^- for n = 0..n_max."""

    plus: np.ndarray
    minus: np.ndarray
    n_max: int

    def __post_init__(self) -> None:
        plus = np.asarray(self.plus, dtype=complex)
        minus = np.asarray(self.minus, dtype=complex)
        if plus.shape != (self.n_max + 1,) or minus.shape != plus.shape:
            raise ValueError(
                f"coefficient arrays must have shape ({self.n_max + 1},), "
                f"got {plus.shape} and {minus.shape}"
            )
        plus.flags.writeable = False
        minus.flags.writeable = False
        object.__setattr__(self, "plus", plus)
        object.__setattr__(self, "minus", minus)


@dataclass(frozen=True)
class PentaDiagonalOperator:
    """Symmetric penta-diagonal matrix stored as its three defining bands.

    Entry (n, m) is scale * [a_n d_{nm} + b_min(n,m) |n-m|=1 + c_min(n,m) |n-m|=2]
    and zero beyond the two side bands.
    """

    diag_a: np.ndarray
    off1_b: np.ndarray
    off2_c: np.ndarray
    scale: float
    size: int

    def __post_init__(self) -> None:
        diag = np.asarray(self.diag_a, dtype=float)
        off1 = np.asarray(self.off1_b, dtype=float)
        off2 = np.asarray(self.off2_c, dtype=float)
        if diag.shape != (self.size,):
            raise ValueError(f"diag_a must have length {self.size}, got {diag.shape}")
        if off1.shape != (self.size - 1,):
            raise ValueError(f"off1_b must have length {self.size - 1}, got {off1.shape}")
        if off2.shape != (self.size - 2,):
            raise ValueError(f"off2_c must have length {self.size - 2}, got {off2.shape}")
        for arr, name in ((diag, "diag_a"), (off1, "off1_b"), (off2, "off2_c")):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def to_dense(self) -> np.ndarray:
        m = np.zeros((self.size, self.size))
        idx = np.arange(self.size)
        m[idx, idx] = self.diag_a
        m[idx[:-1], idx[:-1] + 1] = self.off1_b
        m[idx[:-1] + 1, idx[:-1]] = self.off1_b
        m[idx[:-2], idx[:-2] + 2] = self.off2_c
        m[idx[:-2] + 2, idx[:-2]] = self.off2_c
        return self.scale * m

    def apply(self, vec: np.ndarray) -> np.ndarray:
        v = np.asarray(vec)
        if v.shape != (self.size,):
            raise ValueError(f"vector must have length {self.size}, got {v.shape}")
        out = self.diag_a * v
        out[:-1] += self.off1_b * v[1:]
        out[1:] += self.off1_b * v[:-1]
        out[:-2] += self.off2_c * v[2:]
        out[2:] += self.off2_c * v[:-2]
        return self.scale * out


# ----------------------------------------------------------------------
# Recursion coefficient bands.

def _band_formulas(family: str, beta: float, nusq: float, musq: float, count: int):
    """Raw (a_n, b_n, c_n) for n = 0..count-1 at a given mu^2."""
    n = np.arange(count, dtype=float)
    if family == LAGUERRE:
        t = 2.0 * n + beta + 1.0
        a = (nusq + 0.25 * (beta * beta - 1.0)
             + (musq - 0.25) * t * t
             + (musq + 0.25) * (2.0 * n * (n + beta + 1.0) + beta + 1.0))
        b = -2.0 * musq * (2.0 * n + beta + 2.0) * np.sqrt((n + 1.0) * (n + beta + 1.0))
        c = (musq + 0.25) * np.sqrt(
            (n + 1.0) * (n + 2.0) * (n + beta + 1.0) * (n + beta + 2.0))
    else:
        a = nusq + (beta + 1.0) * (musq - 1.0) - 2.0 * n * (n + beta + 1.0 - musq)
        b = -musq * np.sqrt((n + 1.0) * (n + beta + 1.0))
        c = np.sqrt((n + 1.0) * (n + 2.0) * (n + beta + 1.0) * (n + beta + 2.0))
    return a, b, c


def recursion_bands(
    basis: BasisSpec,
    params: PhysicalParams,
    count: int,
    mu_sq: float | None = None,
):
    """Coefficient bands (a, b, c), each of length count.

    `mu_sq` overrides mu^2; the bands are affine in mu^2, which is what lets
    the S-matrix layer split the wave operator into an energy-independent
    part plus E times the overlap.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    musq = params.mu ** 2 if mu_sq is None else float(mu_sq)
    return _band_formulas(basis.family, basis.beta, params.nu ** 2, musq, count)


def recursion_coefficients(basis: BasisSpec, params: PhysicalParams, n: int):
    """Scalar (a_n, b_n, c_n); negative n returns the boundary zeros."""
    if n < 0:
        return 0.0, 0.0, 0.0
    a, b, c = recursion_bands(basis, params, n + 1)
    return float(a[n]), float(b[n]), float(c[n])


def overlap_bands(basis: BasisSpec, count: int):
    """Bands of the basis overlap matrix in the d(lambda r) measure.

    Equal to d(bands)/d(mu^2), exact because the bands are affine in mu^2.
    Penta-diagonal for the Laguerre family; the oscillator overlap is
    tridiagonal, so its second band comes back as zeros.
    """
    a1, b1, c1 = _band_formulas(basis.family, basis.beta, 0.0, 1.0, count)
    a0, b0, c0 = _band_formulas(basis.family, basis.beta, 0.0, 0.0, count)
    return a1 - a0, b1 - b0, c1 - c0


def reference_jmatrix(basis: BasisSpec, params: PhysicalParams, size: int) -> PentaDiagonalOperator:
    """Penta-diagonal reference wave-operator matrix of the given size."""
    if size < 5:
        raise ValueError(f"size must be >= 5, got {size}")
    a, b, c = recursion_bands(basis, params, size)
    return PentaDiagonalOperator(
        diag_a=a,
        off1_b=b[: size - 1],
        off2_c=c[: size - 2],
        scale=-0.5 * params.lambda_scale ** 2,
        size=size,
    )


# ----------------------------------------------------------------------
# Closed-form seed integrals and coefficients.

def _sinh_weights(nu: float, pm: int):
    """(e^{+pm pi nu/2}, e^{-pm pi nu/2}) / sinh(pi nu), assembled in log space."""
    ls = specfun.log_sinh(math.pi * nu)
    wp = math.exp(pm * 0.5 * math.pi * nu - ls)
    wm = math.exp(-pm * 0.5 * math.pi * nu - ls)
    return wp, wm


def closed_form_integral(basis: BasisSpec, params: PhysicalParams, m: int, sign: int) -> complex:
    """Seed integral I_m^sign of the reference wave against one basis element.

    Laguerre family: a Gamma times an associated Legendre function of
    imaginary order. Oscillator family: a Gamma ratio times a confluent
    hypergeometric value, evaluated through its Kummer-transformed form
    (same-signed series). All prefactors are combined in log space.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    nu = params.nu
    mu = params.mu
    beta = basis.beta
    io = 1j * (sign * nu)
    if basis.family == LAGUERRE:
        half = 0.5 * (beta + 1.0)
        # (sqrt(4 mu^2 + 1)/2)^(-m-half) = exp[-(m+half) * 0.5*ln(mu^2 + 1/4)]
        logp = -(m + half) * 0.5 * math.log(mu * mu + 0.25)
        g = specfun.ln_gamma_complex(m + half + io)
        x = 1.0 / math.sqrt(4.0 * mu * mu + 1.0)
        return cmath.exp(logp + g) * specfun.assoc_legendre_p(-io, m + 0.5 * (beta - 1.0), x)
    logp = (
        0.5 * (2.0 * m + beta - 1.0) * _LN2
        + io * math.log(mu / math.sqrt(2.0))
        + specfun.ln_gamma_complex(m + 0.5 * (1.0 + beta) + 0.5 * io)
        - specfun.ln_gamma_complex(1.0 + io)
    )
    f = specfun.hyp1f1(m + 0.5 * (1.0 + beta) + 0.5 * io, 1.0 + io, -0.5 * mu * mu)
    return cmath.exp(logp) * f


def _series_log_prefactor(basis: BasisSpec, params: PhysicalParams, n: int) -> float:
    """log of sqrt(C mu (beta+1)_n / (n! Gamma(beta+1))), C = 2 for oscillator."""
    beta = basis.beta
    lg = 0.5 * (
        math.log(params.mu)
        + math.lgamma(beta + 1.0 + n)
        - math.lgamma(n + 1.0)
        - 2.0 * math.lgamma(beta + 1.0)
    )
    if basis.family == OSCILLATOR:
        lg += 0.5 * _LN2
    return lg


def coefficients_by_series(basis: BasisSpec, params: PhysicalParams, n: int):
    """(F_n^+, F_n^-) by the finite alternating sum over seed integrals.

    The sum has n+1 terms with alternating-sign weights, so cancellation
    grows with n; it is intended for the seed range n <= 3 and used by the
    tests as an independent route to the recursion seeds.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    i_plus = [closed_form_integral(basis, params, m, +1) for m in range(n + 1)]
    i_minus = [closed_form_integral(basis, params, m, -1) for m in range(n + 1)]
    nu = params.nu
    beta = basis.beta
    pref = math.exp(_series_log_prefactor(basis, params, n))
    out = []
    for pm in (1, -1):
        wp, wm = _sinh_weights(nu, pm)
        total = 0.0 + 0.0j
        coef = 1.0
        for m in range(n + 1):
            if m > 0:
                coef *= (m - 1.0 - n) / ((beta + m) * m)
            total += coef * (wp * i_plus[m] - wm * i_minus[m])
        out.append(pm * pref * total)
    return out[0], out[1]


def initial_coefficients(basis: BasisSpec, params: PhysicalParams):
    """Closed-form seeds ((F_0^+, F_0^-), (F_1^+, F_1^-)).

    Written-out two-term closed forms (no loop over seed integrals), so the
    tests can cross them against coefficients_by_series as a genuinely
    different assembly of the same special functions. Both signs are
    computed independently; conjugacy is checked by the tests, not assumed.
    """
    nu = params.nu
    mu = params.mu
    beta = basis.beta

    if basis.family == LAGUERRE:
        x = 1.0 / math.sqrt(4.0 * mu * mu + 1.0)
        lnbase = 0.5 * math.log(mu * mu + 0.25)
        half = 0.5 * (beta + 1.0)

        def bracket(m: int, pm: int) -> complex:
            wp, wm = _sinh_weights(nu, pm)
            gp = cmath.exp(-(m + half) * lnbase + specfun.ln_gamma_complex(m + half + 1j * nu))
            gm = cmath.exp(-(m + half) * lnbase + specfun.ln_gamma_complex(m + half - 1j * nu))
            pp = specfun.assoc_legendre_p(-1j * nu, m + 0.5 * (beta - 1.0), x)
            pmm = specfun.assoc_legendre_p(+1j * nu, m + 0.5 * (beta - 1.0), x)
            return wp * gp * pp - wm * gm * pmm

    else:

        def bracket(m: int, pm: int) -> complex:
            wp, wm = _sinh_weights(nu, pm)
            lead = 0.5 * (2.0 * m + beta - 1.0) * _LN2
            terms = []
            for s in (1.0, -1.0):
                io = 1j * (s * nu)
                logp = (
                    lead
                    + io * math.log(mu / math.sqrt(2.0))
                    + specfun.ln_gamma_complex(m + 0.5 * (1.0 + beta) + 0.5 * io)
                    - specfun.ln_gamma_complex(1.0 + io)
                )
                # Kummer form: exp(-mu^2/2) 1F1(-m + (io+1-beta)/2; 1+io; mu^2/2)
                f = specfun.hyp1f1(-m + 0.5 * (io + 1.0 - beta), 1.0 + io, 0.5 * mu * mu)
                terms.append(cmath.exp(logp - 0.5 * mu * mu) * f)
            return wp * terms[0] - wm * terms[1]

    p0 = math.exp(_series_log_prefactor(basis, params, 0))
    p1 = math.exp(_series_log_prefactor(basis, params, 1))
    f0 = tuple(pm * p0 * bracket(0, pm) for pm in (1, -1))
    f1 = tuple(
        pm * p1 * (bracket(0, pm) - bracket(1, pm) / (beta + 1.0)) for pm in (1, -1)
    )
    return f0, f1


# ----------------------------------------------------------------------
# Five-term recursions.

def _abc_mp(family: str, beta, nusq, musq, n: int):
    """mpmath mirror of _band_formulas for one index."""
    n = mp.mpf(n)
    if family == LAGUERRE:
        t = 2 * n + beta + 1
        a = (nusq + (beta * beta - 1) / 4 + (musq - mp.mpf(1) / 4) * t * t
             + (musq + mp.mpf(1) / 4) * (2 * n * (n + beta + 1) + beta + 1))
        b = -2 * musq * (2 * n + beta + 2) * mp.sqrt((n + 1) * (n + beta + 1))
        c = (musq + mp.mpf(1) / 4) * mp.sqrt(
            (n + 1) * (n + 2) * (n + beta + 1) * (n + beta + 2))
    else:
        a = nusq + (beta + 1) * (musq - 1) - 2 * n * (n + beta + 1 - musq)
        b = -musq * mp.sqrt((n + 1) * (n + beta + 1))
        c = mp.sqrt((n + 1) * (n + 2) * (n + beta + 1) * (n + beta + 2))
    return a, b, c


def _seed_block(basis: BasisSpec, params: PhysicalParams, a, b, c):
    """F_0..F_3 for the plus branch from the closed forms and the n=0,1 rows."""
    (f0, _), (f1, _) = initial_coefficients(basis, params)
    if c[0] == 0.0 or c[1] == 0.0:
        raise ZeroCoefficientError("c_0 or c_1 vanished; recursion cannot start")
    f2 = -(a[0] * f0 + b[0] * f1) / c[0]
    f3 = -(b[0] * f0 + a[1] * f1 + b[1] * f2) / c[1]
    return f0, f1, f2, f3


def _run_direct(seeds, a, b, c, n_max: int) -> np.ndarray:
    f = np.empty(n_max + 1, dtype=complex)
    f[0], f[1], f[2], f[3] = seeds
    for n in range(2, n_max - 1):
        if c[n] == 0.0:
            raise ZeroCoefficientError(f"c_{n} = 0 in the five-term recursion")
        f[n + 2] = -(a[n] * f[n] + b[n - 1] * f[n - 1] + b[n] * f[n + 1]
                     + c[n - 2] * f[n - 2]) / c[n]
    return f


def _run_ratio(seeds, a, b, c, n_max: int) -> np.ndarray:
    f0, f1, f2, f3 = seeds
    for idx, val in enumerate((f0, f1, f2)):
        if val == 0.0:
            raise ZeroCoefficientError(f"F_{idx} = 0; ratio recursion undefined")
    r = np.empty(n_max + 1, dtype=complex)
    r[0] = 0.0  # unused; ratios are F_n / F_{n-1} for n >= 1
    r[1] = f1 / f0
    r[2] = f2 / f1
    r[3] = f3 / f2
    for n in range(2, n_max - 1):
        if c[n] == 0.0:
            raise ZeroCoefficientError(f"c_{n} = 0 in the ratio recursion")
        if r[n - 1] == 0.0 or r[n] == 0.0 or r[n + 1] == 0.0:
            raise ZeroCoefficientError(f"ratio hit zero near n = {n}")
        inner = (b[n - 1] + c[n - 2] / r[n - 1]) / r[n] + a[n]
        r[n + 2] = -b[n] / c[n] - inner / (c[n] * r[n + 1])
    f = np.empty(n_max + 1, dtype=complex)
    f[0] = f0
    f[1:] = f0 * np.cumprod(r[1:])
    return f


def _run_direct_mp(seeds, family, beta, nusq, musq, n_max: int) -> np.ndarray:
    f = [mp.mpc(s) for s in seeds] + [mp.mpc(0)] * (n_max - 3)
    bm1 = _abc_mp(family, beta, nusq, musq, 1)[1]
    for n in range(2, n_max - 1):
        an, bn, cn = _abc_mp(family, beta, nusq, musq, n)
        cm2 = _abc_mp(family, beta, nusq, musq, n - 2)[2]
        if cn == 0:
            raise ZeroCoefficientError(f"c_{n} = 0 in the five-term recursion")
        f[n + 2] = -(an * f[n] + bm1 * f[n - 1] + bn * f[n + 1] + cm2 * f[n - 2]) / cn
        bm1 = bn
    return np.array([complex(v) for v in f], dtype=complex)


def _run_ratio_mp(seeds, family, beta, nusq, musq, n_max: int) -> np.ndarray:
    f0, f1, f2, f3 = (mp.mpc(s) for s in seeds)
    for idx, val in enumerate((f0, f1, f2)):
        if val == 0:
            raise ZeroCoefficientError(f"F_{idx} = 0; ratio recursion undefined")
    r = [mp.mpc(0), f1 / f0, f2 / f1, f3 / f2] + [mp.mpc(0)] * (n_max - 3)
    for n in range(2, n_max - 1):
        an, bn, cn = _abc_mp(family, beta, nusq, musq, n)
        bm1 = _abc_mp(family, beta, nusq, musq, n - 1)[1]
        cm2 = _abc_mp(family, beta, nusq, musq, n - 2)[2]
        if cn == 0:
            raise ZeroCoefficientError(f"c_{n} = 0 in the ratio recursion")
        if r[n - 1] == 0 or r[n] == 0 or r[n + 1] == 0:
            raise ZeroCoefficientError(f"ratio hit zero near n = {n}")
        inner = (bm1 + cm2 / r[n - 1]) / r[n] + an
        r[n + 2] = -bn / cn - inner / (cn * r[n + 1])
    f = [f0]
    for n in range(1, n_max + 1):
        f.append(f[-1] * r[n])
    return np.array([complex(v) for v in f], dtype=complex)


def _residual_scan(plus: np.ndarray, a, b, c, samples: int = 16):
    """Largest term-normalized five-term residual over sampled interior n."""
    n_max = len(plus) - 1
    lo, hi = 2, n_max - 2
    if hi < lo:
        return 0.0, lo
    idx = np.unique(np.geomspace(lo, hi, samples).astype(int))
    worst, where = 0.0, lo
    for n in idx:
        terms = np.array([
            a[n] * plus[n],
            b[n - 1] * plus[n - 1],
            b[n] * plus[n + 1],
            c[n - 2] * plus[n - 2],
            c[n] * plus[n + 2],
        ])
        denom = np.abs(terms).sum()
        if denom == 0.0:
            continue
        rel = abs(terms.sum()) / denom
        if rel > worst:
            worst, where = rel, int(n)
    return worst, where


def expand_coefficients(
    basis: BasisSpec,
    params: PhysicalParams,
    n_max: int,
    method: str = "ratio",
    precision: str = "double",
) -> ExpansionCoefficients:
    """Expansion coefficients F_n^+- for n = 0..n_max.

    method="direct" runs the five-term recursion forward from the closed-form
    seeds; method="ratio" (default) recurs on successive ratios and rebuilds
    the coefficients as a running product, which is the numerically stabler
    route. precision="extended" reruns the chosen recursion in software
    floats with EXTENDED_DPS digits (seeds still enter at double accuracy).

    If |F_0| is negligibly small against the other seeds (an energy where the
    plus wave has no n=0 component), the ratio route would divide by it, so
    the builder falls back to the direct recursion in extended precision and
    warns. A residual monitor warns whenever the finished coefficients stop
    satisfying the recursion at the working precision.
    """
    if n_max < 4:
        raise ValueError(f"n_max must be >= 4, got {n_max}")
    if method not in ("direct", "ratio"):
        raise ValueError(f"method must be 'direct' or 'ratio', got {method!r}")
    if precision not in ("double", "extended"):
        raise ValueError(f"precision must be 'double' or 'extended', got {precision!r}")

    a, b, c = recursion_bands(basis, params, n_max + 1)
    seeds = _seed_block(basis, params, a, b, c)

    f0, f1, f2, f3 = seeds
    seed_scale = max(abs(f1), abs(f2), abs(f3))
    if method == "ratio" and abs(f0) < 1e-10 * seed_scale:
        warnings.warn(
            f"|F_0| = {abs(f0):.3e} is tiny against the other seeds; "
            "falling back to the direct recursion in extended precision",
            PrecisionLossWarning,
            stacklevel=2,
        )
        method, precision = "direct", "extended"

    if precision == "double":
        run = _run_direct if method == "direct" else _run_ratio
        plus = run(seeds, a, b, c, n_max)
    else:
        run_mp = _run_direct_mp if method == "direct" else _run_ratio_mp
        with mp.workdps(EXTENDED_DPS):
            plus = run_mp(seeds, basis.family, mp.mpf(basis.beta),
                          mp.mpf(params.nu) ** 2, mp.mpf(params.mu) ** 2, n_max)

    worst, where = _residual_scan(plus, a, b, c)
    if worst > 1e-10:
        warnings.warn(
            f"five-term residual {worst:.3e} at n = {where} exceeds 1e-10; "
            "coefficients may have degraded accuracy",
            PrecisionLossWarning,
            stacklevel=2,
        )
    return ExpansionCoefficients(plus=plus, minus=np.conj(plus), n_max=n_max)


# ----------------------------------------------------------------------
# Basis evaluation and reference-wave reconstruction.

def _poly_argument_and_logweight(basis: BasisSpec, x: np.ndarray):
    """(u, log w): polynomial argument and log of the basis weight factor.

    phi_n(x) = p_n(u) * exp(log w) with p_n the orthonormal polynomials;
    u = x for the Laguerre family and x^2 for the oscillator family.
    """
    beta = basis.beta
    if basis.family == LAGUERRE:
        u = x
        logw = -0.5 * x + basis.alpha * np.log(x) - 0.5 * math.lgamma(beta + 1.0)
    else:
        u = x * x
        logw = (-0.5 * u + basis.alpha * np.log(x)
                + 0.5 * _LN2 - 0.5 * math.lgamma(beta + 1.0))
    return u, logw


def _rescale(p: np.ndarray, pm1: np.ndarray, logscale: np.ndarray) -> bool:
    """Pull large carriers back to O(1), folding the factor into logscale."""
    mag = np.maximum(np.abs(p), np.abs(pm1))
    big = mag > _RESCALE_ABOVE
    if not big.any():
        return False
    f = mag[big]
    p[big] /= f
    pm1[big] /= f
    logscale[big] += np.log(f)
    return True


def basis_eval(basis: BasisSpec, n: int, x):
    """Normalized basis element phi_n at x = lambda*r (scalar or array).

    The orthonormal-polynomial three-term recursion runs with a per-point
    floating scale so deep classically-forbidden evaluations neither
    overflow the polynomial nor underflow the weight.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    if not (xa > 0.0).all():
        raise ValueError("x must be > 0")
    beta = basis.beta
    u, logscale = _poly_argument_and_logweight(basis, xa)
    logscale = logscale.copy()
    pm1 = np.zeros_like(u)
    p = np.ones_like(u)
    for k in range(n):
        p, pm1 = (((2.0 * k + beta + 1.0 - u) * p - math.sqrt(k * (k + beta)) * pm1)
                  / math.sqrt((k + 1.0) * (k + beta + 1.0))), p
        if (k + 1) % _RESCALE_EVERY == 0:
            _rescale(p, pm1, logscale)
    out = p * np.exp(logscale)
    return float(out[0]) if scalar else out


def reconstruct_reference(
    basis: BasisSpec,
    params: PhysicalParams,
    coeffs: ExpansionCoefficients,
    grid,
    sign: int = +1,
    n_terms: int | None = None,
) -> np.ndarray:
    """Partial sums sum_n F_n^sign phi_n(x) on a grid of x = lambda*r values.

    With enough terms this converges (slowly) to the reference wave
    chi_sign(mu x); truncation snapshots of it are the figure-style
    convergence data.
    """
    if sign == +1:
        f = coeffs.plus
    elif sign == -1:
        f = coeffs.minus
    else:
        raise ValueError("sign must be +1 or -1")
    if n_terms is None:
        n_terms = len(f)
    if not 1 <= n_terms <= len(f):
        raise ValueError(f"n_terms must be in [1, {len(f)}], got {n_terms}")
    xa = np.atleast_1d(np.asarray(grid, dtype=float))
    if not (xa > 0.0).all():
        raise ValueError("grid points must be > 0")

    beta = basis.beta
    u, logscale = _poly_argument_and_logweight(basis, xa)
    logscale = logscale.copy()
    pm1 = np.zeros_like(u)
    p = np.ones_like(u)
    expw = np.exp(logscale)
    out = f[0] * (p * expw)
    for k in range(n_terms - 1):
        p, pm1 = (((2.0 * k + beta + 1.0 - u) * p - math.sqrt(k * (k + beta)) * pm1)
                  / math.sqrt((k + 1.0) * (k + beta + 1.0))), p
        if (k + 1) % _RESCALE_EVERY == 0 and _rescale(p, pm1, logscale):
            expw = np.exp(logscale)
        out += f[k + 1] * (p * expw)
    return out
