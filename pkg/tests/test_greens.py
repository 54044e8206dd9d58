"""Finite Green's function routes and eigenvector-product identities."""

import math
import threading

import numpy as np
import pytest

from pentajm.errors import DegenerateSpectrumError, PoleError, SingularMatrixError
from pentajm.greens import (
    FiniteGreen,
    eigenvector_products,
    green_element,
    green_element_eigenvalue_only,
)
from pentajm.linalg import eig_sym_dense, solve_dense


def random_symmetric(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) * scale
    return 0.5 * (a + a.T)


def random_spd(rng, n, shift=None):
    b = rng.standard_normal((n, n))
    return b @ b.T + (shift if shift is not None else n) * np.eye(n)


def full_green(fg, z, op=green_element):
    n = fg.size
    return np.array([[op(fg, i, j, z) for j in range(n)] for i in range(n)])


def off_spectrum_points(values, count, rng, pad=1e-2):
    lo, hi = values.min() - 2.0, values.max() + 2.0
    out = []
    while len(out) < count:
        z = float(rng.uniform(lo, hi))
        if np.abs(values - z).min() > pad:
            out.append(z)
    return out


# ------------------------------------------------------------- basics


def test_diagonal_hamiltonian():
    fg = FiniteGreen(np.diag([1.0, 2.0]))
    assert green_element(fg, 0, 0, 0.5) == pytest.approx(2.0, rel=1e-14)
    assert green_element(fg, 0, 1, 0.5) == 0.0
    assert green_element_eigenvalue_only(fg, 0, 0, 0.5) == pytest.approx(2.0, rel=1e-14)
    # delete row0/col0: remaining eigenvalue 2 cancels against the full
    # spectrum, leaving 1/(1-z)
    assert green_element_eigenvalue_only(fg, 1, 1, 0.5) == pytest.approx(1.0 / 1.5, rel=1e-14)


def test_one_by_one():
    fg = FiniteGreen([[3.0]], [[2.0]])
    assert green_element(fg, 0, 0, 0.5) == pytest.approx(0.5, rel=1e-14)
    assert green_element_eigenvalue_only(fg, 0, 0, 0.5) == pytest.approx(0.5, rel=1e-14)
    # a single Omega-normalized vector: Gamma^2 tau = tau^2|v|^2... the
    # product route must reproduce vectors[0,0]^2 * tau_0
    want = fg.vectors[0, 0] ** 2 * fg.tau[0]
    assert eigenvector_products(fg, 0, 0, 0) == pytest.approx(want, rel=1e-12)


def test_defining_relation_orthogonal():
    rng = np.random.default_rng(11)
    H = random_symmetric(rng, 5)
    fg = FiniteGreen(H)
    G = full_green(fg, -0.3)
    assert np.abs(G @ (H + 0.3 * np.eye(5)) - np.eye(5)).max() < 1e-8


def test_defining_relation_generalized():
    rng = np.random.default_rng(12)
    H = random_symmetric(rng, 6)
    Om = random_spd(rng, 6)
    fg = FiniteGreen(H, Om)
    for z in off_spectrum_points(fg.values, 3, rng):
        G = full_green(fg, z)
        assert np.abs(G @ (H - z * Om) - np.eye(6)).max() < 1e-8


def test_matches_direct_inverse_nonorthogonal():
    rng = np.random.default_rng(13)
    H = random_symmetric(rng, 3)
    Om = random_spd(rng, 3)
    fg = FiniteGreen(H, Om)
    z = -0.7
    direct = solve_dense(H - z * Om, np.eye(3))
    assert np.abs(full_green(fg, z) - direct).max() < 1e-8


def test_symmetry_is_exact():
    rng = np.random.default_rng(14)
    fg = FiniteGreen(random_symmetric(rng, 6), random_spd(rng, 6))
    for n, m in [(0, 3), (1, 5), (2, 4)]:
        assert green_element(fg, n, m, 0.11) == green_element(fg, m, n, 0.11)


# ------------------------------------- eigenvalue-only route equivalence


@pytest.mark.parametrize("order", [2, 4, 6, 8])
def test_orthogonal_equivalence(order):
    rng = np.random.default_rng(100 + order)
    H = random_symmetric(rng, order)
    fg = FiniteGreen(H)
    for z in off_spectrum_points(fg.values, 5, rng):
        a = full_green(fg, z)
        b = full_green(fg, z, op=green_element_eigenvalue_only)
        assert np.abs(a - b).max() < 1e-8


@pytest.mark.parametrize("order", [2, 3, 5, 8])
def test_generalized_equivalence(order):
    rng = np.random.default_rng(200 + order)
    H = random_symmetric(rng, order)
    Om = random_spd(rng, order)
    fg = FiniteGreen(H, Om)
    for z in off_spectrum_points(fg.values, 5, rng):
        a = full_green(fg, z)
        b = full_green(fg, z, op=green_element_eigenvalue_only)
        assert np.abs(a - b).max() < 1e-8


def test_exchange_matrix_settles_the_minor_reading():
    """The deleted-H-spectrum reading of the off-diagonal eigenvalue-only
    formula gives 1/(1+z) here; the true element is -1/(z^2-1). The
    cofactor evaluation must reproduce the latter."""
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    fg = FiniteGreen(X)
    z = 0.3
    truth = -1.0 / (z * z - 1.0)
    got = green_element_eigenvalue_only(fg, 0, 1, z)
    assert got == pytest.approx(truth, rel=1e-12)
    literal_wrong = 1.0 / (1.0 + z)
    assert abs(got - literal_wrong) > 0.25


def test_off_diagonal_sign_on_four_by_four():
    rng = np.random.default_rng(15)
    H = random_symmetric(rng, 4)
    fg = FiniteGreen(H)
    z = off_spectrum_points(fg.values, 1, rng)[0]
    for n in range(4):
        for m in range(4):
            want = green_element(fg, n, m, z)
            got = green_element_eigenvalue_only(fg, n, m, z)
            assert got == pytest.approx(want, abs=1e-10 * max(1.0, abs(want)))


# --------------------------------------------------- eigenvector products


def test_products_diagonal_hamiltonian():
    fg = FiniteGreen(np.diag([3.0, 5.0, 9.0]))
    for n in range(3):
        for k in range(3):
            want = 1.0 if n == k else 0.0
            assert eigenvector_products(fg, n, n, k) == pytest.approx(want, abs=1e-12)


def test_products_exchange_matrix():
    fg = FiniteGreen(np.array([[0.0, 1.0], [1.0, 0.0]]))
    for n in range(2):
        for k in range(2):
            assert eigenvector_products(fg, n, n, k) == pytest.approx(0.5, rel=1e-12)
    # the off-diagonal products carry the sign of the eigenvector pattern
    assert eigenvector_products(fg, 0, 1, 0) == pytest.approx(-0.5, rel=1e-12)
    assert eigenvector_products(fg, 0, 1, 1) == pytest.approx(0.5, rel=1e-12)


def test_products_match_direct_eigenvectors():
    rng = np.random.default_rng(16)
    H = random_symmetric(rng, 5)
    fg = FiniteGreen(H)
    dec = eig_sym_dense(H)
    sq = np.array([[eigenvector_products(fg, n, n, k) for k in range(5)] for n in range(5)])
    assert np.abs(sq - dec.vectors**2).max() < 1e-8
    assert np.abs(sq.sum(axis=1) - 1.0).max() < 1e-10
    prod = np.array([[eigenvector_products(fg, 0, m, k) for k in range(5)] for m in range(5)])
    assert np.abs(prod - dec.vectors[0, :] * dec.vectors).max() < 1e-8


def test_products_generalized_match_vectors():
    rng = np.random.default_rng(17)
    H = random_symmetric(rng, 4)
    Om = random_spd(rng, 4)
    fg = FiniteGreen(H, Om)
    for k in range(4):
        want = np.outer(fg.vectors[:, k], fg.vectors[:, k]) * fg.tau[k]
        got = np.array([[eigenvector_products(fg, n, m, k) for m in range(4)] for n in range(4)])
        assert np.abs(got - want).max() < 1e-8


def test_products_nonnegative_on_diagonal():
    rng = np.random.default_rng(18)
    fg = FiniteGreen(random_symmetric(rng, 7))
    vals = [eigenvector_products(fg, n, n, k) for n in range(7) for k in range(7)]
    assert min(vals) > -1e-14


# ------------------------------------------------------------ poles


def test_pole_error_on_eigenvalue():
    fg = FiniteGreen(np.diag([1.0, 2.0]))
    with pytest.raises(PoleError):
        green_element(fg, 0, 0, 1.0)
    with pytest.raises(PoleError):
        green_element_eigenvalue_only(fg, 0, 0, 2.0 + 1e-14)


def test_sign_change_across_each_pole():
    rng = np.random.default_rng(19)
    H = random_symmetric(rng, 5)
    fg = FiniteGreen(H)
    step = 1e-4
    for eps in fg.values:
        below = green_element(fg, 0, 0, eps - step)
        above = green_element(fg, 0, 0, eps + step)
        assert below * above < 0.0


def test_pole_distance():
    fg = FiniteGreen(np.diag([1.0, 2.0]))
    assert fg.pole_distance(1.6) == pytest.approx(0.4, rel=1e-12)


# ------------------------------------------------------------ guards


def test_degenerate_spectrum_rejected_by_eigenvalue_routes():
    fg = FiniteGreen(np.eye(3))
    # spectral sum still works away from the (triple) pole
    assert green_element(fg, 0, 0, 0.5) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(DegenerateSpectrumError):
        green_element_eigenvalue_only(fg, 0, 0, 0.5)
    with pytest.raises(DegenerateSpectrumError):
        eigenvector_products(fg, 0, 0, 1)


def test_validation():
    rng = np.random.default_rng(20)
    with pytest.raises(ValueError):
        FiniteGreen(rng.standard_normal((3, 3)))  # not symmetric
    with pytest.raises(ValueError):
        FiniteGreen(np.eye(3), np.eye(4))
    with pytest.raises(SingularMatrixError):
        FiniteGreen(np.eye(2), np.diag([1.0, -1.0]))  # overlap not SPD
    fg = FiniteGreen(np.diag([1.0, 2.0]))
    with pytest.raises(ValueError):
        green_element(fg, 0, 2, 0.5)
    with pytest.raises(ValueError):
        green_element(fg, -1, 0, 0.5)
    with pytest.raises(ValueError):
        green_element(fg, 0, True, 0.5)
    with pytest.raises(ValueError):
        green_element(fg, 0, 0, math.nan)
    with pytest.raises(ValueError):
        green_element(fg, 0, 0, 1.0 + 2.0j)
    with pytest.raises(ValueError):
        eigenvector_products(fg, 0, 0, 5)


# --------------------------------------------------------- cache safety


def test_lazy_minor_cache_is_consistent_under_threads():
    rng = np.random.default_rng(21)
    H = random_symmetric(rng, 6)
    Om = random_spd(rng, 6)
    serial = FiniteGreen(H, Om)
    z = off_spectrum_points(serial.values, 1, rng)[0]
    want = full_green(serial, z, op=green_element_eigenvalue_only)

    shared = FiniteGreen(H, Om)
    results = {}

    def worker(tid):
        results[tid] = full_green(shared, z, op=green_element_eigenvalue_only)

    threads = [threading.Thread(target=worker, args=(t,)) for t in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for got in results.values():
        assert np.abs(got - want).max() < 1e-12


def test_eigendata_is_read_only():
    fg = FiniteGreen(np.diag([1.0, 2.0]))
    with pytest.raises(ValueError):
        fg.values[0] = 99.0
    with pytest.raises(ValueError):
        fg.vectors[0, 0] = 99.0
