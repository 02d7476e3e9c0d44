"""Residual a-posteriori error estimation and bulk marking.

For a P1 Galerkin solution ``u_h`` of the Helmholtz problem the squared
local indicator of an element ``T`` with diameter ``h_T`` is

    h_T^2 ||f + k^2 u_h||_T^2
    + h_T ||jump of the normal derivative||^2 over interior edges of T
    + h_T ||g_N - du/dn||^2 over Neumann edges of T
    + h_T ||g_R + i k u_h - du/dn||^2 over Robin edges of T

where every interior edge contributes to both neighboring elements and
Dirichlet edges contribute nothing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .fem import Snapshot, WaveProblem, _p1_gradients, _edge_normals, \
    _D4_W, _D4_BARY, _G3_X, _G3_W
from .mesh import Mesh

__all__ = ["IndicatorField", "local_indicators", "local_indicators_from_values",
           "doerfler_mark", "write_convergence_csv"]


@dataclass(frozen=True)
class IndicatorField:
    """Per-element squared indicators and their total."""

    squared: np.ndarray
    total: float  # sqrt of the sum of squared indicators

    def __post_init__(self):
        object.__setattr__(self, "squared", np.asarray(self.squared, dtype=float))

    @classmethod
    def from_squared(cls, squared) -> "IndicatorField":
        squared = np.asarray(squared, dtype=float)
        return cls(squared, float(np.sqrt(squared.sum())))


def local_indicators(snapshot: Snapshot, problem: WaveProblem,
                     z=None) -> IndicatorField:
    """Residual indicators of a snapshot (frequency defaults to its own)."""
    z = snapshot.z if z is None else z
    return local_indicators_from_values(snapshot.mesh, snapshot.full_values(),
                                        problem, z)


def local_indicators_from_values(mesh: Mesh, values, problem: WaveProblem,
                                 z) -> IndicatorField:
    """Residual indicators for an arbitrary nodal vector."""
    values = np.asarray(values, dtype=complex)
    k = problem.wavenumber(z)
    k2 = k * k
    b, c, area = _p1_gradients(mesh)
    t = mesh.triangles
    h = mesh.diameters()
    uloc = values[t]
    grad = np.stack([(uloc * b).sum(axis=1), (uloc * c).sum(axis=1)],
                    axis=1) / (2.0 * area)[:, None]

    eta2 = np.zeros(mesh.num_triangles)

    # volume residual, 6-point degree-4 rule
    p = mesh.corner_coords()
    qpts = np.einsum("qi,tid->tqd", _D4_BARY, p)
    u_q = uloc @ _D4_BARY.T
    if problem.source is None:
        f_q = np.zeros_like(u_q)
    else:
        f_q = np.asarray(problem.source(z, qpts.reshape(-1, 2)),
                         dtype=complex).reshape(u_q.shape)
    res = np.abs(f_q + k2 * u_q) ** 2
    eta2 += h * h * area * (res @ _D4_W)

    # interior jumps of the normal derivative, counted on both neighbors
    edges, tri_edges, edge_tris = mesh.edge_structure()
    interior = np.where(edge_tris[:, 1] >= 0)[0]
    if len(interior):
        e = edges[interior]
        d = mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]]
        L = np.hypot(d[:, 0], d[:, 1])
        nu = np.column_stack([d[:, 1], -d[:, 0]]) / L[:, None]
        tl, tr = edge_tris[interior, 0], edge_tris[interior, 1]
        jump = ((grad[tl] - grad[tr]) * nu).sum(axis=1)
        contrib = L * np.abs(jump) ** 2
        np.add.at(eta2, tl, h[tl] * contrib)
        np.add.at(eta2, tr, h[tr] * contrib)

    # Neumann and Robin residuals
    if len(mesh.boundary_edges):
        owner = _boundary_edge_owners(mesh)
        for name, cond in problem.conditions.items():
            if cond.kind == "dirichlet":
                continue
            sel = np.where(mesh.boundary_labels == name)[0]
            if len(sel) == 0:
                continue
            e = mesh.boundary_edges[sel]
            te = owner[sel]
            pa, pb = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
            L = np.hypot(*(pb - pa).T)
            nu = _edge_normals(mesh, e)
            dn = (grad[te] * nu).sum(axis=1)
            ua, ub = values[e[:, 0]], values[e[:, 1]]
            acc = np.zeros(len(sel))
            for xg, wg in zip(_G3_X, _G3_W):
                pts = pa + xg * (pb - pa)
                g = (np.zeros(len(sel), dtype=complex) if cond.datum is None
                     else np.asarray(cond.datum(z, pts, nu), dtype=complex))
                r = g - dn
                if cond.kind == "robin":
                    r = r + 1j * k * (ua + xg * (ub - ua))
                acc += wg * np.abs(r) ** 2
            np.add.at(eta2, te, h[te] * L * acc)

    return IndicatorField.from_squared(eta2)


def _boundary_edge_owners(mesh: Mesh) -> np.ndarray:
    """Element owning each boundary edge."""
    edges, tri_edges, edge_tris = mesh.edge_structure()
    b = np.sort(mesh.boundary_edges, axis=1)
    view = edges.view([("a", edges.dtype), ("b", edges.dtype)]).ravel()
    pos = np.searchsorted(view, np.ascontiguousarray(b).view(view.dtype).ravel())
    return edge_tris[pos, 0]


def doerfler_mark(indicators: IndicatorField, theta: float) -> np.ndarray:
    """Smallest element set holding a ``theta`` fraction of the total.

    Elements are sorted by decreasing squared indicator (ties broken by
    index) and the shortest prefix with
    ``sum >= theta * total_squared`` is returned.  ``theta = 0`` or a zero
    total gives the empty set; ``theta = 1`` marks all elements carrying
    mass.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must be in [0, 1]")
    eta2 = indicators.squared
    total = eta2.sum()
    if theta == 0.0 or total == 0.0:
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((np.arange(len(eta2)), -eta2))
    csum = np.cumsum(eta2[order])
    target = theta * total
    count = int(np.searchsorted(csum, target, side="left")) + 1
    count = min(count, len(eta2))
    # drop trailing zero-mass elements (possible when theta == 1)
    while count > 1 and eta2[order[count - 1]] == 0.0:
        count -= 1
    return np.sort(order[:count])


def write_convergence_csv(path, history, errors=None) -> None:
    """Dump an adaptive history as ``dofs,estimator[,error]`` rows.

    ``history`` holds ``(level, dofs, estimator, wallclock_ms)`` records as
    produced by the adaptive driver; the error column is written only when
    an oracle supplied ``errors``.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if errors is None:
            writer.writerow(["dofs", "estimator"])
            for rec in history:
                writer.writerow([rec[1], _fmt(rec[2])])
        else:
            writer.writerow(["dofs", "estimator", "error"])
            for rec, err in zip(history, errors):
                writer.writerow([rec[1], _fmt(rec[2]), _fmt(err)])


def _fmt(x: float) -> str:
    return format(float(x), ".17e")
