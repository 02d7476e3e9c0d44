"""Closed-form triangle reference: series, eigenpairs, line output."""

import numpy as np
import pytest
from scipy.integrate import dblquad, simpson

import oracles
from helmrom import AdaptiveConfig, adaptive_solve, create_initial_mesh
from helmrom.analytic import (series_tail_estimate, triangle_eigenfunction,
                              triangle_eigenvalues, triangle_energy_error,
                              triangle_exact_gradient, triangle_exact_qoi,
                              triangle_exact_solution)


def triangle_integral(f):
    """Adaptive quadrature over 0 < x2 < x1 < pi/2."""
    val, err = dblquad(lambda x2, x1: f(x1, x2), 0.0, np.pi / 2.0,
                       0.0, lambda x1: x1, epsabs=1e-10)
    assert err < 1e-6
    return val


def test_eigenvalue_table():
    # odd pairs m <= n with m^2 + n^2 <= 100; 50 = 1+49 = 25+25 is double
    got = triangle_eigenvalues(100.0)
    assert got == [(2.0, 1), (10.0, 1), (18.0, 1), (26.0, 1), (34.0, 1),
                   (50.0, 2), (58.0, 1), (74.0, 1), (82.0, 1), (90.0, 1),
                   (98.0, 1)]
    assert triangle_eigenvalues(1.0) == []


def test_eigenfunctions_orthonormal():
    pairs = [(1, 1), (1, 3), (3, 3), (1, 5)]
    for a in range(len(pairs)):
        for b in range(a, len(pairs)):
            (m1, n1), (m2, n2) = pairs[a], pairs[b]

            def prod(x1, x2):
                pa = triangle_eigenfunction(m1, n1, [[x1, x2]])[0]
                pb = triangle_eigenfunction(m2, n2, [[x1, x2]])[0]
                return pa * pb

            want = 1.0 if a == b else 0.0
            assert triangle_integral(prod) == pytest.approx(want, abs=1e-7)


def test_eigenfunction_rejects_bad_pairs():
    for m, n in [(2, 3), (1, 4), (3, 1)]:
        with pytest.raises(ValueError):
            triangle_eigenfunction(m, n, [[0.1, 0.1]])


def test_eigenfunction_satisfies_pde():
    # -lap(phi) = (m^2 + n^2) phi, checked by finite differences
    for m, n, lam in [(1, 1, 2.0), (1, 3, 10.0), (3, 5, 34.0)]:
        f = lambda pts: triangle_eigenfunction(m, n, pts)
        for p in [(0.9, 0.4), (1.3, 0.7), (1.1, 1.0)]:
            lap = oracles.fd_laplacian(f, p, h=1e-4).real
            val = f([p])[0]
            assert lap == pytest.approx(-lam * val, abs=1e-5 * max(1.0, lam))


def test_series_coefficients_from_weak_form():
    # testing -lap(u) - z u = 1 with an orthonormal eigenfunction phi gives
    # <u, phi> = <1, phi> / (lam - z); the load moments have the closed
    # forms 4 / (pi m n) for m < n and 2 sqrt(2) / (pi m^2) on the diagonal
    z = 7.5
    for m, n in [(1, 1), (1, 3), (3, 3), (3, 5)]:
        load = triangle_integral(
            lambda x1, x2: triangle_eigenfunction(m, n, [[x1, x2]])[0])
        want = (2.0 * np.sqrt(2.0) / (np.pi * m * m) if m == n
                else 4.0 / (np.pi * m * n))
        assert load == pytest.approx(want, rel=1e-8)
        # the truncated series contains the (m, n) mode exactly, so its
        # projection matches the weak form up to quadrature error alone
        proj = triangle_integral(
            lambda x1, x2: triangle_exact_solution(
                z, [[x1, x2]], truncation=61)[0]
            * triangle_eigenfunction(m, n, [[x1, x2]])[0])
        assert proj == pytest.approx(load / (m * m + n * n - z), rel=1e-6)


def test_solution_boundary_conditions():
    z = 7.5
    # Dirichlet bottom: exact zeros term by term
    x = np.linspace(0.1, 1.4, 7)
    bottom = np.stack([x, np.zeros_like(x)], axis=1)
    assert np.abs(triangle_exact_solution(z, bottom)).max() == 0.0
    # Neumann on the vertical leg and the hypotenuse: the normal derivative
    # cancels term by term (odd m, and m <-> n symmetry), so even the
    # truncated series satisfies it to roundoff
    t = np.linspace(0.2, 1.3, 6)
    leg = np.stack([np.full_like(t, np.pi / 2.0), t], axis=1)
    g = triangle_exact_gradient(z, leg)
    assert np.abs(g[:, 0]).max() < 1e-10
    hyp = np.stack([t, t], axis=1)
    g = triangle_exact_gradient(z, hyp)
    assert np.abs(g[:, 0] - g[:, 1]).max() < 1e-10


def test_solution_series_converges():
    z = 51.0
    pts = [(1.0, 0.5), (0.7, 0.2)]
    coarse = triangle_exact_solution(z, pts, truncation=101)
    fine = triangle_exact_solution(z, pts, truncation=801)
    assert np.abs(coarse - fine).max() <= series_tail_estimate(z, 101)
    assert np.abs(coarse - fine).max() < 1e-3


def test_qoi_matches_line_quadrature():
    for z in (51.0, 5.0, 20.0 + 3.0j):
        x2 = np.linspace(0.0, np.pi / 2.0, 4001)
        pts = np.stack([np.full_like(x2, np.pi / 2.0), x2], axis=1)
        vals = triangle_exact_solution(z, pts)
        want = simpson(vals, x=x2)
        assert triangle_exact_qoi(z) == pytest.approx(want, rel=1e-7)


def test_qoi_raises_at_eigenvalue():
    with pytest.raises(ZeroDivisionError):
        triangle_exact_qoi(10.0)
    with pytest.raises(ZeroDivisionError):
        triangle_exact_solution(2.0, [(0.5, 0.2)])


def test_qoi_pole_residues():
    # near lam = 2 the output behaves like -16/pi^2 / (z - 2); near lam = 10
    # the (1,3) and (3,1) terms combine to +32/(9 pi^2) / (z - 10)
    res2 = oracles.richardson_residue(triangle_exact_qoi, 2.0, h=1e-4)
    assert res2 == pytest.approx(-16.0 / np.pi ** 2, rel=1e-6)
    res10 = oracles.richardson_residue(triangle_exact_qoi, 10.0, h=1e-4)
    assert res10 == pytest.approx(32.0 / (9.0 * np.pi ** 2), rel=1e-6)


def test_tail_estimate_decreases():
    z = 51.0
    tails = [series_tail_estimate(z, t) for t in (51, 101, 201, 401)]
    assert all(a > b > 0.0 for a, b in zip(tails, tails[1:]))
    assert tails[-1] < 1e-3


def test_energy_error_shrinks_under_refinement(triangle_bench):
    mesh = create_initial_mesh(triangle_bench.problem.geometry)
    coarse = adaptive_solve(mesh, triangle_bench.problem, 5.0,
                            AdaptiveConfig(theta=0.5, tol_h=0.6, n_max=4000))
    fine = adaptive_solve(mesh, triangle_bench.problem, 5.0,
                          AdaptiveConfig(theta=0.5, tol_h=0.15, n_max=4000))
    e_coarse = triangle_energy_error(coarse, truncation=401)
    e_fine = triangle_energy_error(fine, truncation=401)
    assert 0.0 < e_fine < 0.5 * e_coarse
    # the converged estimator bounds the energy error up to a modest factor
    assert e_fine < 10.0 * fine.history[-1][2]
