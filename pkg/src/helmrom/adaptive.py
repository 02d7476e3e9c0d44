"""Adaptive solve-estimate-mark-refine driver and frequency sweeps.

One snapshot per frequency point, each on its own adaptively refined mesh.
The loop stops once the residual estimator drops below ``tol_h``
(``converged``) or the number of degrees of freedom exceeds the budget
``n_max`` (``budget_exhausted``).  When the discrete system is singular or
numerically ill-posed at the current mesh, the iteration sets the solution
to zero, the estimator value to one, and refines every element.

The default budget is ten times the resolution heuristic
``|Omega| k^4 / (4 tol_h^2)``: a quasi-uniform mesh with that many
vertices has mesh width ``h`` with ``h k^2`` about ``2 tol_h``.  A
budget-exhausted run can be retried once with ten times the budget;
failing again discards the snapshot.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace

import numpy as np

from .estimator import doerfler_mark, local_indicators_from_values
from .fem import Snapshot, SingularSystemError, WaveProblem, assemble_system, solve
from .mesh import Mesh, refine

__all__ = ["AdaptiveConfig", "adaptive_solve", "snapshot_with_retry",
           "sample_sweep", "InsufficientSnapshotsError", "resolution_budget"]

logger = logging.getLogger(__name__)


class InsufficientSnapshotsError(RuntimeError):
    """Fewer than two usable snapshots survived a sweep."""


@dataclass(frozen=True)
class AdaptiveConfig:
    """Knobs of the adaptive loop.

    ``n_max = None`` selects the resolution-based budget; an explicit value
    must exceed 1.  ``retry_factor`` scales the budget of the single retry
    granted to budget-exhausted snapshots.
    """

    theta: float = 0.1
    tol_h: float = 5e-2
    n_max: int | None = None
    retry_factor: float = 10.0
    max_iterations: int = 10_000

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must be in (0, 1]")
        if self.tol_h <= 0.0:
            raise ValueError("tol_h must be positive")
        if self.n_max is not None and self.n_max <= 1:
            raise ValueError("n_max must exceed 1")


def resolution_budget(mesh: Mesh, problem: WaveProblem, z, tol_h: float) -> int:
    """Default DoF budget ``10 |Omega| k^4 / (4 tol_h^2)``, at least 2.

    ``|Omega| k^4 / (4 tol_h^2)`` is the uniform-mesh resolution heuristic
    (mesh size times k^2 comparable to the tolerance); the safety decade on
    top leaves the budget generous enough that only samples nearly on a
    resonance ever exhaust it.
    """
    k = abs(problem.wavenumber(z))
    n = 10.0 * mesh.domain_area() * k ** 4 / (4.0 * tol_h ** 2)
    return max(2, int(np.ceil(n)))


def adaptive_solve(mesh: Mesh, problem: WaveProblem, z,
                   config: AdaptiveConfig) -> Snapshot:
    """Run the adaptive loop from ``mesh`` at frequency ``z``.

    Returns the last snapshot, with ``status`` ``converged`` or
    ``budget_exhausted`` and the per-iteration history attached as
    ``(level, dofs, estimator, wallclock_ms)`` records.
    """
    n_max = config.n_max
    if n_max is None:
        n_max = resolution_budget(mesh, problem, z, config.tol_h)

    history = []
    t0 = time.perf_counter()
    level = 0
    while True:
        system = assemble_system(mesh, problem, z)
        dofs = system.num_dofs
        try:
            x = solve(system)
            eta = local_indicators_from_values(
                mesh, _full(system, x), problem, z)
            eta_val = eta.total
            guarded = False
        except SingularSystemError:
            x = np.zeros(dofs, dtype=complex)
            eta = None
            eta_val = 1.0
            guarded = True

        ms = (time.perf_counter() - t0) * 1e3
        history.append((level, dofs, eta_val, ms))
        logger.info("level %d, %d dofs, estimator %.3e, %.1f ms",
                    level, dofs, eta_val, ms)

        snapshot = Snapshot(mesh=mesh, coefficients=x, z=complex(z),
                            estimator=eta_val, status="converged",
                            history=history,
                            dof_of_vertex=system.dof_of_vertex)

        if not guarded and eta_val <= config.tol_h:
            return snapshot
        if dofs > n_max:
            snapshot.status = "budget_exhausted"
            return snapshot
        if level + 1 >= config.max_iterations:
            snapshot.status = "budget_exhausted"
            return snapshot

        if guarded:
            marked = np.arange(mesh.num_triangles)
        else:
            marked = doerfler_mark(eta, config.theta)
            if marked.size == 0:
                # zero estimator but not converged cannot happen; guard
                marked = np.arange(mesh.num_triangles)
        mesh = refine(mesh, marked)
        level += 1


def _full(system, x):
    out = np.zeros(system.mesh.num_vertices, dtype=complex)
    out[system.free_vertices] = x
    return out


def snapshot_with_retry(mesh: Mesh, problem: WaveProblem, z,
                        config: AdaptiveConfig) -> Snapshot:
    """Adaptive solve with one retry at ``retry_factor`` times the budget.

    A snapshot that exhausts the enlarged budget as well comes back with
    ``status == "discarded"``.
    """
    snap = adaptive_solve(mesh, problem, z, config)
    if snap.status != "budget_exhausted" or config.retry_factor <= 1.0:
        return snap
    n_max = config.n_max
    if n_max is None:
        n_max = resolution_budget(mesh, problem, z, config.tol_h)
    retry_cfg = replace(config, n_max=int(n_max * config.retry_factor))
    logger.info("retrying z=%s with budget %d", z, retry_cfg.n_max)
    snap = adaptive_solve(mesh, problem, z, retry_cfg)
    if snap.status == "budget_exhausted":
        snap.status = "discarded"
    return snap


def sample_sweep(mesh: Mesh, problem: WaveProblem, points,
                 config: AdaptiveConfig, retry: bool = True) -> list[Snapshot]:
    """One adaptive snapshot per frequency point, order preserved.

    Discarded snapshots stay in the returned list (callers exclude them
    from surrogate building).  Raises ``InsufficientSnapshotsError`` when
    fewer than two snapshots are usable.
    """
    run = snapshot_with_retry if retry else adaptive_solve
    out = []
    for z in points:
        t0 = time.perf_counter()
        snap = run(mesh, problem, z, config)
        logger.info("sweep point z=%s: %s with %d dofs (%.1f s)",
                    z, snap.status, snap.num_dofs, time.perf_counter() - t0)
        out.append(snap)
    usable = sum(1 for s in out if s.status != "discarded")
    if usable < 2:
        raise InsufficientSnapshotsError(
            f"only {usable} usable snapshots out of {len(points)}")
    return out
