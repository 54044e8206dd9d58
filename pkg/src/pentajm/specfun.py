"""Special functions for the scattering engine.

Self-contained implementations of everything the reference-solution layer
needs: complex log-gamma (Lanczos), Bessel functions of pure imaginary
order on the positive real axis, the scaled Hankel combinations that the
reference waves are built from, Gauss and Kummer hypergeometric series
with complex parameters, and the associated Legendre function of complex
order on [0, 1].

Series policy: every infinite series is first summed in double precision
while recording max|term|. If the projected cancellation error
(eps * max|term| / |sum|) exceeds the requested budget, the same series is
re-summed in software extended precision (mpmath) with the digit count
sized from the measured ratio. Results always come back as machine
complex numbers.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import mpmath as mp

from .errors import NonConvergenceError

__all__ = [
    "AccuracyBudget",
    "DEFAULT_BUDGET",
    "ln_gamma_complex",
    "gamma_complex",
    "log_sinh",
    "default_y_switch",
    "bessel_j_imag_order",
    "scaled_hankel_imag_order",
    "hankel_imag_order",
    "chi_reference",
    "hyp2f1",
    "hyp1f1",
    "assoc_legendre_p",
]

_EPS = 2.220446049250313e-16
_TINY = 1e-300


@dataclass(frozen=True)
class AccuracyBudget:
    """Termination contract for series evaluation.

    target_rel_err is the requested relative accuracy; max_terms caps any
    single summation loop.
    """

    target_rel_err: float = 1e-12
    max_terms: int = 1_000_000


DEFAULT_BUDGET = AccuracyBudget()

# Lanczos approximation, g = 7, 9 coefficients (Godfrey's tabulation).
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def _log_sin_pi(z: complex) -> complex:
    """log(sin(pi z)), safe against overflow for large |Im z|."""
    if z.imag < 0.0:
        return _log_sin_pi(z.conjugate()).conjugate()
    # sin(pi z) = e^{-i pi z} (e^{2 i pi z} - 1) / (2i); |e^{2 i pi z}| <= 1 here
    w = cmath.exp(2j * cmath.pi * z)
    return -1j * cmath.pi * z + cmath.log(0.5j * (1.0 - w))


def ln_gamma_complex(z: complex) -> complex:
    """Logarithm of the gamma function for complex argument.

    exp(ln_gamma_complex(z)) == Gamma(z) to roughly 1e-13 relative. On the
    reflected half-plane (Re z < 1/2) the imaginary part may differ from
    the principal branch by a multiple of 2 pi; every caller here
    exponentiates, so that is harmless.
    """
    z = complex(z)
    if z.real < 0.5:
        if z.imag == 0.0 and z.real == math.floor(z.real):
            raise ValueError(f"gamma pole at z = {z!r}")
        return math.log(math.pi) - _log_sin_pi(z) - ln_gamma_complex(1.0 - z)
    zz = z - 1.0
    acc = complex(_LANCZOS[0])
    for i in range(1, 9):
        acc += _LANCZOS[i] / (zz + i)
    t = zz + _LANCZOS_G + 0.5
    return (
        0.5 * math.log(2.0 * math.pi)
        + (zz + 0.5) * cmath.log(t)
        - t
        + cmath.log(acc)
    )


def gamma_complex(z: complex) -> complex:
    """Gamma function for complex argument via ln_gamma_complex."""
    return cmath.exp(ln_gamma_complex(z))


def log_sinh(t: float) -> float:
    """log(sinh(t)) for t > 0 without overflow."""
    if t <= 0.0:
        raise ValueError("log_sinh needs t > 0")
    return t + math.log1p(-math.exp(-2.0 * t)) - math.log(2.0)


def default_y_switch(nu: float) -> float:
    """Argument beyond which the asymptotic Hankel branch takes over.

    At this point the asymptotic truncation floor ~ e^{-2y + pi nu} sits
    below 1e-12 for the supported order range.
    """
    return max(20.0, 2.0 * nu * nu)


# ----------------------------------------------------------------------
# Bessel function of imaginary order, ascending series branch.

def _bessel_series_float(nu: float, y: float, max_terms: int):
    """Double-precision ascending series for J_{i nu}(y).

    Returns (value, loss) where loss estimates the relative cancellation
    error eps * max|term| / |sum|.
    """
    half = 0.5 * y
    t = cmath.exp(1j * nu * math.log(half) - ln_gamma_complex(complex(1.0, nu)))
    total = t
    peak = abs(t)
    q = -half * half
    prev = math.inf
    for k in range(1, max_terms):
        t *= q / (k * complex(k, nu))
        total += t
        a = abs(t)
        if a > peak:
            peak = a
        if a < _EPS * abs(total) and a < prev:
            break
        prev = a
    else:
        raise NonConvergenceError(
            f"imaginary-order Bessel series: {max_terms} terms at nu={nu}, y={y}"
        )
    return total, _EPS * peak / max(abs(total), _TINY)


def _bessel_series_mp(nu: float, y: float, digits: int, max_terms: int):
    """Extended-precision re-summation; returns (value, achieved_loss)."""
    with mp.workdps(digits):
        half = mp.mpf(y) / 2
        order = mp.mpc(0, nu)
        t = mp.exp(order * mp.log(half) - mp.loggamma(1 + order))
        total = t
        peak = abs(t)
        q = -(half * half)
        prev = mp.inf
        converged = False
        for k in range(1, max_terms):
            t = t * q / (k * mp.mpc(k, nu))
            total += t
            a = abs(t)
            if a > peak:
                peak = a
            if a < mp.eps * abs(total) and a < prev:
                converged = True
                break
            prev = a
        if not converged:
            raise NonConvergenceError(
                f"imaginary-order Bessel series (mp): {max_terms} terms "
                f"at nu={nu}, y={y}"
            )
        loss = float(mp.eps * peak / abs(total)) if total != 0 else math.inf
        return complex(total), loss


def bessel_j_imag_order(
    nu: float,
    y: float,
    budget: AccuracyBudget = DEFAULT_BUDGET,
    y_switch: float | None = None,
) -> complex:
    """J_{i nu}(y) for real nu >= 0 and real y > 0.

    Ascending series below y_switch (with automatic extended-precision
    escalation when cancellation eats the budget), asymptotic Hankel
    recombination above it.
    """
    if nu < 0.0:
        raise ValueError("order parameter nu must be >= 0")
    if y <= 0.0:
        raise ValueError("argument y must be > 0")
    if y_switch is None:
        y_switch = default_y_switch(nu)
    if y > y_switch:
        p = scaled_hankel_imag_order(nu, y, +1, budget, y_switch)
        # J = (e^{pi nu/2} A+H+ + e^{-pi nu/2} A-H-)/2, A-H- = conj(A+H+)
        ep = math.exp(0.5 * math.pi * nu)
        return 0.5 * (ep * p + p.conjugate() / ep)
    value, loss = _bessel_series_float(nu, y, budget.max_terms)
    if loss <= budget.target_rel_err:
        return value
    if math.isfinite(loss):
        digits = 18 + max(0, math.ceil(math.log10(loss / budget.target_rel_err)))
    else:
        digits = 40
    for _ in range(4):
        digits = min(digits, 500)
        value, loss = _bessel_series_mp(nu, y, digits, budget.max_terms)
        if loss <= budget.target_rel_err:
            return value
        digits += math.ceil(math.log10(loss / budget.target_rel_err)) + 4
    raise NonConvergenceError(
        f"imaginary-order Bessel escalation failed at nu={nu}, y={y}"
    )


# ----------------------------------------------------------------------
# Scaled Hankel combinations.

def _scaled_hankel_asymptotic(
    nu: float, y: float, sign: int, budget: AccuracyBudget
) -> complex:
    """Large-argument expansion of A_s H^s_{i nu}(y).

    A_s H^s = sqrt(2/(pi y)) e^{s i (y - pi/4)} Sum_k (-s i)^k B_k / y^k,
    B_0 = 1, B_k = B_{k-1} (4 nu^2 + (2k-1)^2) / (8 k). All B_k real and
    positive; the series is asymptotic, truncated at its smallest term.
    """
    four_nu2 = 4.0 * nu * nu
    rot = complex(0.0, -float(sign))
    term = 1.0 + 0.0j
    total = term
    prev_mag = 1.0
    converged = False
    for k in range(1, 200):
        odd = 2.0 * k - 1.0
        term *= rot * (four_nu2 + odd * odd) / (8.0 * k * y)
        mag = abs(term)
        if mag >= prev_mag:
            # asymptotic floor reached before the budget target
            if prev_mag > budget.target_rel_err * abs(total):
                raise NonConvergenceError(
                    f"Hankel asymptotic floor {prev_mag:.2e} above budget "
                    f"at nu={nu}, y={y}; raise y_switch"
                )
            converged = True
            break
        total += term
        if mag < budget.target_rel_err * abs(total):
            converged = True
            break
        prev_mag = mag
    if not converged:
        raise NonConvergenceError(
            f"Hankel asymptotic series did not settle at nu={nu}, y={y}"
        )
    pref = math.sqrt(2.0 / (math.pi * y)) * cmath.exp(
        sign * 1j * (y - 0.25 * math.pi)
    )
    return pref * total


def scaled_hankel_imag_order(
    nu: float,
    y: float,
    sign: int,
    budget: AccuracyBudget = DEFAULT_BUDGET,
    y_switch: float | None = None,
) -> complex:
    """A_s H^s_{i nu}(y) with A_s = e^{-s pi nu / 2}, s = sign = +-1.

    This combination stays O(1) in nu, which is why the engine works with
    it instead of the bare Hankel functions. Asymptotically it approaches
    sqrt(2/(pi y)) e^{s i (y - pi/4)}.
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    if nu <= 0.0:
        raise ValueError("nu must be > 0 (supercritical order)")
    if y <= 0.0:
        raise ValueError("argument y must be > 0")
    if y_switch is None:
        y_switch = default_y_switch(nu)
    if y > y_switch:
        return _scaled_hankel_asymptotic(nu, y, sign, budget)
    jp = bessel_j_imag_order(nu, y, budget, y_switch)
    jm = jp.conjugate()  # J_{-i nu}(y) = conj(J_{i nu}(y)) for real y
    ls = log_sinh(math.pi * nu)
    cp = math.exp(sign * 0.5 * math.pi * nu - ls)
    cm = math.exp(-sign * 0.5 * math.pi * nu - ls)
    return float(sign) * (cp * jp - cm * jm)


def hankel_imag_order(
    sign: int,
    nu: float,
    y: float,
    budget: AccuracyBudget = DEFAULT_BUDGET,
    y_switch: float | None = None,
) -> complex:
    """Bare Hankel function H^s_{i nu}(y) = J_{i nu} + s i Y_{i nu}.

    Computed as e^{s pi nu / 2} times the scaled combination; raises
    OverflowError when the unscaling factor is not representable.
    """
    expo = sign * 0.5 * math.pi * nu
    if expo > 700.0:
        raise OverflowError(
            f"unscaled Hankel overflows at nu={nu} (factor e^{expo:.1f}); "
            "use scaled_hankel_imag_order"
        )
    scaled = scaled_hankel_imag_order(nu, y, sign, budget, y_switch)
    return math.exp(expo) * scaled


def chi_reference(
    sign: int,
    nu: float,
    y: float,
    budget: AccuracyBudget = DEFAULT_BUDGET,
    y_switch: float | None = None,
) -> complex:
    """Reference wave chi_s at kr = y: A_s sqrt(y) H^s_{i nu}(y).

    Asymptotically sqrt(2/pi) e^{s i (y - pi/4)}; the two signs are
    complex conjugates of each other on the real axis.
    """
    return math.sqrt(y) * scaled_hankel_imag_order(nu, y, sign, budget, y_switch)


# ----------------------------------------------------------------------
# Hypergeometric series.

def _as_nonpositive_int(w: complex, tol: float = 1e-12) -> int | None:
    """Return -w as a terminating-series order when w is ~ a nonpositive int."""
    if abs(w.imag) > tol:
        return None
    r = round(w.real)
    if r > 0 or abs(w.real - r) > tol:
        return None
    return -r


def _hyp_series_float(seed: complex, ratio, max_terms: int):
    """Sum seed * prod(ratio) in double precision; ratio(k) multiplies term k.

    Returns (sum, loss).
    """
    t = seed
    total = t
    peak = abs(t)
    prev = math.inf
    for k in range(max_terms):
        t *= ratio(k)
        if t == 0:
            break
        total += t
        a = abs(t)
        if a > peak:
            peak = a
        if a < _EPS * abs(total) and a < prev:
            break
        prev = a
    else:
        raise NonConvergenceError(f"hypergeometric series: {max_terms} terms")
    return total, _EPS * peak / max(abs(total), _TINY)


def _hyp_series_mp(seed, ratio_mp, digits: int, max_terms: int):
    with mp.workdps(digits):
        t = mp.mpc(seed)
        total = t
        peak = abs(t)
        prev = mp.inf
        for k in range(max_terms):
            t = t * ratio_mp(k)
            if t == 0:
                break
            total += t
            a = abs(t)
            if a > peak:
                peak = a
            if a < mp.eps * abs(total) and a < prev:
                break
            prev = a
        else:
            raise NonConvergenceError(
                f"hypergeometric series (mp): {max_terms} terms"
            )
        loss = float(mp.eps * peak / abs(total)) if total != 0 else math.inf
        return complex(total), loss


def _escalated_series(seed, ratio, ratio_mp, budget: AccuracyBudget, name: str):
    total, loss = _hyp_series_float(seed, ratio, budget.max_terms)
    if loss <= budget.target_rel_err:
        return total
    if math.isfinite(loss):
        digits = 18 + max(0, math.ceil(math.log10(loss / budget.target_rel_err)))
    else:
        digits = 40
    for _ in range(4):
        digits = min(digits, 500)
        total, loss = _hyp_series_mp(seed, ratio_mp, digits, budget.max_terms)
        if loss <= budget.target_rel_err:
            return total
        digits += math.ceil(math.log10(loss / budget.target_rel_err)) + 4
    raise NonConvergenceError(f"{name}: extended-precision escalation failed")


def _check_c_parameter(c: complex) -> None:
    if _as_nonpositive_int(complex(c)) is not None:
        raise ValueError(f"lower parameter c = {c!r} is a nonpositive integer")


def _hyp2f1_direct(a, b, c, z, budget: AccuracyBudget) -> complex:
    def ratio(k: int) -> complex:
        return (a + k) * (b + k) * z / ((c + k) * (k + 1.0))

    def ratio_mp(k: int):
        return (
            mp.mpc(a + k)
            * mp.mpc(b + k)
            * mp.mpf(z)
            / (mp.mpc(c + k) * (k + 1))
        )

    return _escalated_series(1.0 + 0.0j, ratio, ratio_mp, budget, "2F1")


def hyp2f1(a, b, c, z: float, budget: AccuracyBudget = DEFAULT_BUDGET) -> complex:
    """Gauss hypergeometric function for complex parameters and real z.

    Domain 0 <= z < 1 (any real z when the series terminates). Arguments
    near 1 go through the standard z -> 1-z linear transformation, which
    requires c - a - b away from integers.
    """
    a = complex(a)
    b = complex(b)
    c = complex(c)
    _check_c_parameter(c)
    terminating = (
        _as_nonpositive_int(a) is not None or _as_nonpositive_int(b) is not None
    )
    if z == 0.0 or a == 0 or b == 0:
        return 1.0 + 0.0j
    if not terminating and not 0.0 <= z < 1.0:
        raise ValueError(f"2F1 argument z = {z} outside [0, 1)")
    if terminating or z <= 0.7:
        return _hyp2f1_direct(a, b, c, z, budget)
    # connection formula at 1 - z
    s = c - a - b
    if abs(s.imag) < 1e-8 and abs(s.real - round(s.real)) < 1e-8:
        raise ValueError(
            f"2F1 near z=1 with integer c-a-b = {s!r} is not supported"
        )
    w = 1.0 - z
    lg = ln_gamma_complex
    # a gamma pole in a denominator kills that term (1/Gamma -> 0)
    if _as_nonpositive_int(c - a) is not None or _as_nonpositive_int(c - b) is not None:
        term1 = 0.0 + 0.0j
    else:
        pref1 = cmath.exp(lg(c) + lg(s) - lg(c - a) - lg(c - b))
        term1 = pref1 * _hyp2f1_direct(a, b, 1.0 - s, w, budget)
    if _as_nonpositive_int(a) is not None or _as_nonpositive_int(b) is not None:
        term2 = 0.0 + 0.0j
    else:
        pref2 = cmath.exp(lg(c) + lg(-s) - lg(a) - lg(b) + s * math.log(w))
        term2 = pref2 * _hyp2f1_direct(c - a, c - b, 1.0 + s, w, budget)
    return term1 + term2


def hyp1f1(a, c, z: float, budget: AccuracyBudget = DEFAULT_BUDGET) -> complex:
    """Confluent hypergeometric function 1F1(a; c; z) for real z.

    Negative arguments are routed through the Kummer transformation
    1F1(a; c; -z) = e^{-z} 1F1(c-a; c; z) to keep the summed series
    same-signed.
    """
    a = complex(a)
    c = complex(c)
    _check_c_parameter(c)
    if z == 0.0 or a == 0:
        return 1.0 + 0.0j
    if z < 0.0 and _as_nonpositive_int(a) is None:
        return math.exp(z) * hyp1f1(c - a, c, -z, budget)

    def ratio(k: int) -> complex:
        return (a + k) * z / ((c + k) * (k + 1.0))

    def ratio_mp(k: int):
        return mp.mpc(a + k) * mp.mpf(z) / (mp.mpc(c + k) * (k + 1))

    return _escalated_series(1.0 + 0.0j, ratio, ratio_mp, budget, "1F1")


def assoc_legendre_p(
    lam, gam, x: float, budget: AccuracyBudget = DEFAULT_BUDGET
) -> complex:
    """Associated Legendre function of the first kind on 0 <= x <= 1.

    Quadratic hypergeometric representation:

        P^lam_gam(x) = [2^lam / Gamma(1-lam)] (1-x^2)^{-lam/2}
                       2F1((1+gam-lam)/2, -(gam+lam)/2; 1-lam; 1-x^2)

    with the power prefactor on the principal branch. Conjugating lam and
    gam conjugates the value, which is what makes paired evaluations at
    lam = -+ i nu complex conjugates.
    """
    lam = complex(lam)
    gam = complex(gam)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"argument x = {x} outside [0, 1]")
    if _as_nonpositive_int(1.0 - lam) is not None:
        raise ValueError(f"Gamma(1 - lam) pole at lam = {lam!r}")
    z = 1.0 - x * x
    if x == 1.0:
        return 1.0 + 0.0j if lam == 0 else _raise_oscillatory(lam)
    pref = cmath.exp(
        lam * math.log(2.0)
        - ln_gamma_complex(1.0 - lam)
        - 0.5 * lam * math.log(z)
    )
    f = hyp2f1(0.5 * (1.0 + gam - lam), -0.5 * (gam + lam), 1.0 - lam, z, budget)
    return pref * f


def _raise_oscillatory(lam: complex) -> complex:
    raise ValueError(
        f"P^lam_gam has no limit at x = 1 for lam = {lam!r} (oscillatory)"
    )
