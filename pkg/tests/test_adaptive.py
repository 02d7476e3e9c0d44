"""Adaptive driver: budgets, statuses, retry, sweeps, guarded solves."""

import numpy as np
import pytest

from helmrom import (AdaptiveConfig, BoundaryCondition, InsufficientSnapshotsError,
                     WaveProblem, adaptive_solve, create_initial_mesh,
                     get_benchmark, refine, sample_sweep)
from helmrom.adaptive import resolution_budget, snapshot_with_retry
from helmrom.fem import assemble_system, stiffness_mass
from helmrom.geometry import square_geometry


def test_resolution_budget_formula():
    bench = get_benchmark("triangle")
    mesh = create_initial_mesh(bench.problem.geometry)
    area = np.pi ** 2 / 8.0
    assert mesh.domain_area() == pytest.approx(area, rel=1e-13)
    # interior convention: k^4 = z^2
    expected = int(np.ceil(10.0 * area * 51.0 ** 2 / (4.0 * 5e-2 ** 2)))
    assert resolution_budget(mesh, bench.problem, 51.0, 5e-2) == expected == 3208856
    # scattering convention: k^4 = z^4
    cav = get_benchmark("cavity")
    cmesh = create_initial_mesh(cav.problem.geometry)
    expected = int(np.ceil(10.0 * cmesh.domain_area() * 20.0 ** 4 / (4.0 * 0.5 ** 2)))
    assert resolution_budget(cmesh, cav.problem, 20.0, 0.5) == expected
    # floor of 2 at tiny frequencies
    assert resolution_budget(mesh, bench.problem, 1e-3, 1.0) == 2


def test_adaptive_solve_converges_and_records_history():
    bench = get_benchmark("triangle")
    mesh = create_initial_mesh(bench.problem.geometry)
    cfg = AdaptiveConfig(theta=0.3, tol_h=0.3, n_max=20000)
    snap = adaptive_solve(mesh, bench.problem, 5.0, cfg)
    assert snap.status == "converged"
    assert snap.estimator <= 0.3
    hist = snap.history
    assert [h[0] for h in hist] == list(range(len(hist)))
    dofs = [h[1] for h in hist]
    assert all(a <= b for a, b in zip(dofs, dofs[1:]))
    assert hist[-1][1] == snap.num_dofs
    assert hist[-1][2] == snap.estimator
    # wallclock entries count milliseconds since the solve started
    ms = [h[3] for h in hist]
    assert all(a < b for a, b in zip(ms, ms[1:]))


def test_budget_exhaustion_status():
    bench = get_benchmark("triangle")
    mesh = create_initial_mesh(bench.problem.geometry)
    cfg = AdaptiveConfig(theta=0.3, tol_h=1e-4, n_max=50)
    snap = adaptive_solve(mesh, bench.problem, 5.0, cfg)
    assert snap.status == "budget_exhausted"
    assert snap.num_dofs > 50


def test_retry_upgrades_budget_once():
    bench = get_benchmark("triangle")
    mesh = create_initial_mesh(bench.problem.geometry)
    # base budget too small, ten-fold retry large enough
    base = AdaptiveConfig(theta=0.3, tol_h=0.3, n_max=10, retry_factor=10_000.0)
    snap = snapshot_with_retry(mesh, bench.problem, 5.0, base)
    assert snap.status == "converged"
    # both budgets too small: the snapshot is discarded
    hopeless = AdaptiveConfig(theta=0.3, tol_h=1e-6, n_max=10, retry_factor=2.0)
    snap = snapshot_with_retry(mesh, bench.problem, 5.0, hopeless)
    assert snap.status == "discarded"
    # retry_factor <= 1 disables the retry
    snap = snapshot_with_retry(
        mesh, bench.problem, 5.0,
        AdaptiveConfig(theta=0.3, tol_h=1e-6, n_max=10, retry_factor=1.0))
    assert snap.status == "budget_exhausted"


def test_singular_start_is_guarded():
    # start the loop exactly on a discrete eigenvalue of the initial mesh:
    # the first solve fails, the guard marks everything, and the loop
    # recovers on the refined mesh
    geo = square_geometry()
    problem = WaveProblem(geo, {"wall": BoundaryCondition("dirichlet")},
                          source=lambda z, pts: np.ones(len(pts), dtype=complex))
    mesh = create_initial_mesh(geo)
    for _ in range(4):
        mesh = refine(mesh, np.arange(mesh.num_triangles))
    system = assemble_system(mesh, problem, 1.0)
    import scipy.linalg as sla
    K, M = stiffness_mass(mesh)
    free = system.free_vertices
    lam = np.sort(sla.eigh(K.toarray()[np.ix_(free, free)],
                           M.toarray()[np.ix_(free, free)],
                           eigvals_only=True))[0]
    cfg = AdaptiveConfig(theta=0.5, tol_h=0.5, n_max=30000)
    snap = adaptive_solve(mesh, problem, lam, cfg)
    assert snap.history[0][2] == 1.0  # guarded first iteration
    assert snap.status == "converged"
    assert snap.estimator <= 0.5


def test_sweep_preserves_order_and_counts_usable():
    bench = get_benchmark("triangle")
    mesh = create_initial_mesh(bench.problem.geometry)
    cfg = AdaptiveConfig(theta=0.3, tol_h=0.5, n_max=20000)
    points = [3.0, 7.0, 5.0]
    snaps = sample_sweep(mesh, bench.problem, points, cfg)
    assert [s.z for s in snaps] == [complex(p) for p in points]
    assert all(s.status == "converged" for s in snaps)


def test_sweep_without_retry_keeps_exhausted_status():
    bench = get_benchmark("triangle")
    mesh = create_initial_mesh(bench.problem.geometry)
    cfg = AdaptiveConfig(theta=0.3, tol_h=1e-6, n_max=10)
    snaps = sample_sweep(mesh, bench.problem, [3.0, 5.0], cfg, retry=False)
    assert [s.status for s in snaps] == ["budget_exhausted", "budget_exhausted"]


def test_sweep_raises_when_almost_everything_discarded():
    bench = get_benchmark("triangle")
    mesh = create_initial_mesh(bench.problem.geometry)
    cfg = AdaptiveConfig(theta=0.3, tol_h=1e-8, n_max=10, retry_factor=2.0)
    with pytest.raises(InsufficientSnapshotsError):
        sample_sweep(mesh, bench.problem, [3.0, 5.0, 7.0], cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        AdaptiveConfig(theta=0.0)
    with pytest.raises(ValueError):
        AdaptiveConfig(theta=1.2)
    with pytest.raises(ValueError):
        AdaptiveConfig(tol_h=-1.0)
    with pytest.raises(ValueError):
        AdaptiveConfig(n_max=1)
