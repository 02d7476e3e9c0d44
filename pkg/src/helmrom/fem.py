"""Piecewise-linear finite elements for the Helmholtz equation.

The boundary-value problem is posed in a frequency parameter ``z`` that
maps to the wavenumber ``k`` either as ``k = sqrt(z)`` (interior problems,
``z`` plays the role of ``k^2``) or as ``k = z`` (scattering problems).
The sesquilinear form is

    b(w, v) = (grad w, grad v) - k^2 (w, v) - i k <w, v>_{Robin}

with natural data on Neumann and Robin segments and homogeneous Dirichlet
conditions imposed by elimination.
"""

from __future__ import annotations

import base64
import json
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Curve, Geometry
from .mesh import Mesh, load_mesh, save_mesh
from . import traces as _traces

__all__ = [
    "BoundaryCondition", "WaveProblem", "AssembledSystem", "Snapshot",
    "SingularSystemError", "assemble_system", "solve",
    "evaluate_solution", "BoundaryFunctional",
    "apply_linear_functional", "apply_quadratic_functional",
    "save_snapshot", "load_snapshot",
]

# quadrature: edge-midpoint rule on triangles (degree 2)
_MID_BARY = np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])
# 6-point degree-4 triangle rule
_D4_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)
_D4_BARY = np.vstack([
    np.roll([0.108103018168070, 0.445948490915965, 0.445948490915965], k)
    for k in range(3)
] + [
    np.roll([0.816847572980459, 0.091576213509771, 0.091576213509771], k)
    for k in range(3)
])
# 3-point Gauss-Legendre on [0, 1]
_G3_X = 0.5 + np.array([-0.5 * np.sqrt(0.6), 0.0, 0.5 * np.sqrt(0.6)])
_G3_W = np.array([5.0, 8.0, 5.0]) / 18.0
# 2-point Gauss-Legendre on [0, 1]
_G2_X = 0.5 + np.array([-0.5, 0.5]) / np.sqrt(3.0)
_G2_W = np.array([0.5, 0.5])


class SingularSystemError(np.linalg.LinAlgError):
    """The assembled system is singular or numerically ill-posed."""


@dataclass(frozen=True)
class BoundaryCondition:
    """Condition on one boundary segment.

    ``kind`` is one of ``dirichlet`` (homogeneous), ``neumann``, ``robin``.
    ``datum`` maps ``(z, points, normals)`` to complex values; ``None``
    means zero data.
    """

    kind: str
    datum: object = None

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann", "robin"):
            raise ValueError(f"unknown boundary condition kind {self.kind!r}")


@dataclass(frozen=True)
class WaveProblem:
    """Parametric Helmholtz problem on a geometry.

    Attributes
    ----------
    geometry : Geometry
    conditions : dict
        Segment name -> BoundaryCondition; every geometry segment needs one.
    source : callable or None
        Volume load ``f(z, points)``; ``None`` means zero.
    convention : str
        ``"ksq"``: interior problems, ``k = sqrt(z)`` (principal branch);
        ``"k"``: scattering problems, ``k = z``.
    """

    geometry: Geometry
    conditions: dict
    source: object = None
    convention: str = "ksq"

    def __post_init__(self):
        if self.convention not in ("ksq", "k"):
            raise ValueError(f"unknown frequency convention {self.convention!r}")
        for seg in self.geometry.segments:
            if seg.name not in self.conditions:
                raise ValueError(f"segment {seg.name!r} has no boundary condition")

    def wavenumber(self, z) -> complex:
        if self.convention == "k":
            return complex(z)
        return complex(np.sqrt(complex(z)))

    def dirichlet_labels(self) -> tuple[str, ...]:
        return tuple(n for n, c in self.conditions.items() if c.kind == "dirichlet")


@dataclass
class AssembledSystem:
    """Reduced linear system together with the vertex/DoF bookkeeping."""

    matrix: sp.csc_matrix
    rhs: np.ndarray
    free_vertices: np.ndarray      # vertex index per DoF
    dof_of_vertex: np.ndarray      # DoF index per vertex, -1 if constrained
    mesh: Mesh
    z: complex

    @property
    def num_dofs(self) -> int:
        return len(self.free_vertices)


@dataclass
class Snapshot:
    """Finite element solution at one frequency point.

    ``coefficients`` holds the free DoF values; constrained vertices are
    zero.  ``status`` is one of ``converged``, ``budget_exhausted``,
    ``discarded``.
    """

    mesh: Mesh
    coefficients: np.ndarray
    z: complex
    estimator: float
    status: str = "converged"
    history: list = field(default_factory=list, repr=False)
    dof_of_vertex: np.ndarray | None = None

    @property
    def num_dofs(self) -> int:
        return len(self.coefficients)

    def full_values(self) -> np.ndarray:
        """Nodal values on all vertices, zeros at constrained ones."""
        if self.dof_of_vertex is None:
            if len(self.coefficients) != self.mesh.num_vertices:
                raise ValueError("snapshot without DoF map must store all vertices")
            return np.asarray(self.coefficients, dtype=complex)
        out = np.zeros(self.mesh.num_vertices, dtype=complex)
        free = self.dof_of_vertex >= 0
        out[free] = self.coefficients[self.dof_of_vertex[free]]
        return out


# ---------------------------------------------------------------------------
# assembly


def _p1_gradients(mesh: Mesh):
    """Per-element P1 shape gradients and areas.

    Returns ``(b, c, area)`` where ``grad phi_i = (b_i, c_i) / (2 area)``.
    """
    p = mesh.corner_coords()
    x, y = p[..., 0], p[..., 1]
    b = y[:, [1, 2, 0]] - y[:, [2, 0, 1]]
    c = x[:, [2, 0, 1]] - x[:, [1, 2, 0]]
    area = mesh.areas()
    return b, c, area


def stiffness_mass(mesh: Mesh):
    """Global P1 stiffness and mass matrices (CSR, real)."""
    b, c, area = _p1_gradients(mesh)
    kloc = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) \
        / (4.0 * area)[:, None, None]
    mloc = (np.ones((3, 3)) + np.eye(3))[None] * (area / 12.0)[:, None, None]
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.num_vertices
    K = sp.coo_matrix((kloc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((mloc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return K, M


def boundary_mass(mesh: Mesh, labels) -> sp.csr_matrix:
    """Edge mass matrix of the boundary edges with the given labels."""
    n = mesh.num_vertices
    sel = np.isin(mesh.boundary_labels, list(labels))
    e = mesh.boundary_edges[sel]
    if len(e) == 0:
        return sp.csr_matrix((n, n))
    L = np.hypot(*(mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]]).T)
    loc = (np.array([[2.0, 1.0], [1.0, 2.0]]))[None] * (L / 6.0)[:, None, None]
    rows = np.repeat(e, 2, axis=1).ravel()
    cols = np.tile(e, (1, 2)).ravel()
    return sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _volume_load(mesh: Mesh, source, z) -> np.ndarray:
    n = mesh.num_vertices
    if source is None:
        return np.zeros(n, dtype=complex)
    p = mesh.corner_coords()
    mids = np.einsum("qi,tid->tqd", _MID_BARY, p)
    f = np.asarray(source(z, mids.reshape(-1, 2)), dtype=complex).reshape(len(p), 3)
    area = mesh.areas()
    # load_i = area/6 * (f at the two midpoints adjacent to vertex i)
    load_loc = (area / 6.0)[:, None] * (f[:, [1, 2, 0]] + f[:, [2, 0, 1]])
    out = np.zeros(n, dtype=complex)
    np.add.at(out, mesh.triangles.ravel(), load_loc.ravel())
    return out


def _edge_normals(mesh: Mesh, edges) -> np.ndarray:
    """Outward unit normals of oriented boundary edges."""
    d = mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]]
    L = np.hypot(d[:, 0], d[:, 1])
    return np.column_stack([d[:, 1], -d[:, 0]]) / L[:, None]


def _boundary_load(mesh: Mesh, problem: WaveProblem, z) -> np.ndarray:
    out = np.zeros(mesh.num_vertices, dtype=complex)
    for name, cond in problem.conditions.items():
        if cond.kind == "dirichlet" or cond.datum is None:
            continue
        sel = np.where(mesh.boundary_labels == name)[0]
        if len(sel) == 0:
            continue
        e = mesh.boundary_edges[sel]
        pa, pb = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
        L = np.hypot(*(pb - pa).T)
        normals = _edge_normals(mesh, e)
        for xg, wg in zip(_G2_X, _G2_W):
            pts = pa + xg * (pb - pa)
            g = np.asarray(cond.datum(z, pts, normals), dtype=complex)
            np.add.at(out, e[:, 0], wg * L * g * (1.0 - xg))
            np.add.at(out, e[:, 1], wg * L * g * xg)
    return out


def assemble_system(mesh: Mesh, problem: WaveProblem, z) -> AssembledSystem:
    """Assemble the reduced Galerkin system at frequency ``z``.

    Homogeneous Dirichlet vertices (vertices touching any edge of a
    Dirichlet segment) are eliminated.  With no Robin boundary and real
    data the matrix is complex symmetric, never Hermitian.
    """
    k = problem.wavenumber(z)
    K, M = stiffness_mass(mesh)
    A = sp.csr_matrix(K - (k * k) * M, dtype=complex)
    robin = [n for n, c in problem.conditions.items() if c.kind == "robin"]
    if robin:
        A = A - 1j * k * boundary_mass(mesh, robin)

    rhs = _volume_load(mesh, problem.source, z) + _boundary_load(mesh, problem, z)

    constrained = mesh.boundary_vertex_mask(problem.dirichlet_labels())
    free = np.where(~constrained)[0]
    dof_of_vertex = -np.ones(mesh.num_vertices, dtype=np.int64)
    dof_of_vertex[free] = np.arange(len(free))

    A = A.tocsr()[free][:, free].tocsc()
    return AssembledSystem(A, rhs[free], free, dof_of_vertex, mesh, complex(z))


# ---------------------------------------------------------------------------
# solve


def solve(system: AssembledSystem, check_rcond: bool = True) -> np.ndarray:
    """Sparse direct solve with ill-posedness detection.

    Raises
    ------
    SingularSystemError
        If the LU factorization meets a pivot below ``1e-12`` times the
        largest one, the estimated reciprocal condition number falls below
        ``1e-14``, or the residual check fails.
    """
    A, b = system.matrix, system.rhs
    n = A.shape[0]
    if n == 0:
        raise SingularSystemError("no free degrees of freedom")
    # undamped problems at real frequencies assemble real matrices stored
    # as complex; factoring in real arithmetic halves the fill-in memory,
    # which decides feasibility of the largest resonant meshes
    if np.iscomplexobj(A.data) and not A.data.imag.any() \
            and not np.asarray(b).imag.any():
        A = sp.csc_matrix((np.ascontiguousarray(A.data.real), A.indices,
                           A.indptr), shape=A.shape)
        b = np.ascontiguousarray(np.asarray(b).real)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SingularSystemError(str(exc)) from exc

    piv = np.abs(lu.U.diagonal())
    if piv.min() < 1e-12 * piv.max():
        raise SingularSystemError("vanishing pivot in LU factorization")

    if check_rcond:
        if n >= 4:
            norm_a = spla.onenormest(A)
            inv = spla.LinearOperator(
                (n, n), matvec=lu.solve,
                rmatvec=lambda v: lu.solve(v, trans="H"), dtype=A.dtype)
            norm_inv = spla.onenormest(inv)
        else:
            dense = A.toarray()
            norm_a = np.linalg.norm(dense, 1)
            try:
                norm_inv = np.linalg.norm(np.linalg.inv(dense), 1)
            except np.linalg.LinAlgError as exc:
                raise SingularSystemError(str(exc)) from exc
        if norm_a * norm_inv > 1e14:
            raise SingularSystemError(
                f"estimated rcond {1.0 / (norm_a * norm_inv):.2e} below 1e-14")

    x = lu.solve(b)
    scale = (sp.linalg.norm(A) * np.linalg.norm(x) + np.linalg.norm(b))
    if np.linalg.norm(A @ x - b) > 1e-10 * scale:
        raise SingularSystemError("direct solve residual check failed")
    return x.astype(complex, copy=False)


# ---------------------------------------------------------------------------
# evaluation and functionals


def evaluate_solution(snapshot: Snapshot, points) -> np.ndarray:
    """Evaluate the P1 solution at points inside the domain.

    Vertex coordinates return the nodal value; points on edges interpolate
    linearly.  Points outside every element (barycentric tolerance 1e-12)
    raise ``ValueError``.
    """
    mesh = snapshot.mesh
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    vals = snapshot.full_values()
    p = mesh.corner_coords()
    out = np.empty(len(pts), dtype=complex)

    # barycentric coordinates w.r.t. all elements, chunked over points
    v0 = p[:, 0]
    T = np.stack([p[:, 1] - v0, p[:, 2] - v0], axis=-1)  # (nt, 2, 2)
    det = T[:, 0, 0] * T[:, 1, 1] - T[:, 0, 1] * T[:, 1, 0]
    inv = np.empty_like(T)
    inv[:, 0, 0] = T[:, 1, 1]
    inv[:, 0, 1] = -T[:, 0, 1]
    inv[:, 1, 0] = -T[:, 1, 0]
    inv[:, 1, 1] = T[:, 0, 0]
    inv /= det[:, None, None]

    tol = 1e-12
    for i, q in enumerate(pts):
        d = q - v0
        lam12 = np.einsum("tij,tj->ti", inv, d)
        lam0 = 1.0 - lam12.sum(axis=1)
        ok = (lam0 >= -tol) & (lam12[:, 0] >= -tol) & (lam12[:, 1] >= -tol)
        hits = np.where(ok)[0]
        if len(hits) == 0:
            raise ValueError(f"point {q} lies outside the mesh")
        t = hits[0]
        lam = np.array([lam0[t], lam12[t, 0], lam12[t, 1]])
        out[i] = lam @ vals[mesh.triangles[t]]
    return out if np.asarray(points).ndim > 1 else out[0]


@dataclass(frozen=True)
class BoundaryFunctional:
    """Linear functional ``u -> integral over a curve of u * weight``.

    ``weight`` maps arclength positions along the curve to complex values
    and should be piecewise polynomial of degree <= 2 for the integration
    to be exact; ``None`` means the constant 1.
    """

    curve: Curve
    weight: object = None


def apply_linear_functional(snapshot: Snapshot, functional) -> complex:
    """Exact integral of the solution trace against the functional weight.

    ``functional`` may be a :class:`BoundaryFunctional` or a bare
    :class:`~helmrom.geometry.Curve` (weight 1).
    """
    if not isinstance(functional, BoundaryFunctional):
        functional = BoundaryFunctional(functional)
    tr = _traces.extract_trace(snapshot.mesh, snapshot.full_values(),
                               functional.curve)
    return _traces.integrate_against(tr, functional.weight)


def apply_quadratic_functional(snapshot: Snapshot, curve: Curve) -> float:
    """Exact integral of ``|u|^2`` along a boundary curve."""
    tr = _traces.extract_trace(snapshot.mesh, snapshot.full_values(), curve)
    val = _traces.integrate_product(tr, tr)
    return float(val.real)


def snapshot_trace(snapshot: Snapshot, curve: Curve) -> _traces.Trace:
    """Trace of the snapshot along a curve."""
    return _traces.extract_trace(snapshot.mesh, snapshot.full_values(), curve)


# ---------------------------------------------------------------------------
# serialization


def _encode_complex(a: np.ndarray) -> str:
    buf = np.ascontiguousarray(a, dtype="<c16").tobytes()
    return base64.b64encode(buf).decode("ascii")


def _decode_complex(s: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(s), dtype="<c16").copy()


def save_snapshot(snapshot: Snapshot, path, mesh_path=None) -> None:
    """Write a snapshot as JSON with base64 coefficients.

    The mesh goes to ``mesh_path`` (default: same name with a ``.mesh.json``
    suffix) and is referenced by relative path.
    """
    path = os.fspath(path)
    if mesh_path is None:
        mesh_path = path[:-5] if path.endswith(".json") else path
        mesh_path += ".mesh.json"
    save_mesh(snapshot.mesh, mesh_path)
    dov = snapshot.dof_of_vertex
    payload = {
        "format": "helmrom-snapshot-1",
        "z": [snapshot.z.real, snapshot.z.imag],
        "estimator": snapshot.estimator,
        "status": snapshot.status,
        "mesh_file": os.path.relpath(mesh_path, os.path.dirname(path) or "."),
        "coefficients": _encode_complex(snapshot.coefficients),
        "dof_of_vertex": None if dov is None else dov.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_snapshot(path, geometry: Geometry | None = None) -> Snapshot:
    path = os.fspath(path)
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != "helmrom-snapshot-1":
        raise ValueError("not a snapshot payload")
    mesh_file = os.path.join(os.path.dirname(path) or ".", payload["mesh_file"])
    mesh = load_mesh(mesh_file, geometry)
    dov = payload.get("dof_of_vertex")
    return Snapshot(
        mesh=mesh,
        coefficients=_decode_complex(payload["coefficients"]),
        z=complex(payload["z"][0], payload["z"][1]),
        estimator=payload["estimator"],
        status=payload["status"],
        dof_of_vertex=None if dov is None else np.asarray(dov, dtype=np.int64),
    )
