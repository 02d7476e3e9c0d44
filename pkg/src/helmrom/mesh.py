"""Conforming triangle meshes refined by newest-vertex bisection.

Every mesh descends from the coarse triangulation of its
:class:`~helmrom.geometry.Geometry` through a sequence of edge bisections.
Each element remembers its coarse ancestor and the bit string of bisection
choices that produced it, which makes meshes from the same geometry
overlayable without any geometric searching.

Conventions
-----------
Triangles are stored counterclockwise as ``(v0, v1, v2)`` with the
refinement edge ``(v0, v1)`` (the edge opposite the newest vertex ``v2``).
Bisecting through the midpoint ``m`` of ``(v0, v1)`` produces

* child ``0``: ``(v2, v0, m)``
* child ``1``: ``(v1, v2, m)``

both counterclockwise, with ``m`` as their newest vertex and the parent's
remaining edges as their refinement edges.  Midpoints are computed as
``0.5 * (a + b)``; since IEEE addition is commutative the coordinates come
out bit-identical in every mesh that creates the same edge midpoint.
"""

from __future__ import annotations

import json

import numpy as np

from . import geometry as _geometry
from .geometry import Geometry, InvalidGeometryError

__all__ = ["Mesh", "create_initial_mesh", "refine", "element_lineage",
           "mesh_to_json", "mesh_from_json", "save_mesh", "load_mesh"]


class Mesh:
    """Immutable conforming triangle mesh with bisection lineage.

    Attributes
    ----------
    geometry : Geometry
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array
        Counterclockwise; refinement edge is ``(v0, v1)``.
    roots : (nt,) int array
        Index of each element's ancestor in the initial triangulation.
    lineages : tuple of str
        Bit string of bisection choices from the ancestor (empty for
        initial elements).
    boundary_edges : (nb, 2) int array
        Oriented with the domain on the left, so the outward normal of the
        edge ``a -> b`` is ``(b - a)`` rotated clockwise.
    boundary_labels : (nb,) array of str
        Geometry segment name per boundary edge.
    """

    def __init__(self, geometry, vertices, triangles, roots, lineages,
                 boundary_edges, boundary_labels):
        self.geometry = geometry
        self.vertices = np.asarray(vertices, dtype=float)
        self.triangles = np.asarray(triangles, dtype=np.int64)
        self.roots = np.asarray(roots, dtype=np.int64)
        self.lineages = tuple(lineages)
        self.boundary_edges = np.asarray(boundary_edges, dtype=np.int64)
        self.boundary_labels = np.asarray(boundary_labels)
        self._cache: dict = {}

    # -- basic queries ---------------------------------------------------

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def generations(self) -> np.ndarray:
        """Bisection depth of each element."""
        return np.fromiter((len(s) for s in self.lineages), dtype=np.int64,
                           count=len(self.lineages))

    def corner_coords(self) -> np.ndarray:
        """(nt, 3, 2) element corner coordinates."""
        return self.vertices[self.triangles]

    def signed_areas(self) -> np.ndarray:
        p = self.corner_coords()
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    def areas(self) -> np.ndarray:
        key = "areas"
        if key not in self._cache:
            self._cache[key] = self.signed_areas()
        return self._cache[key]

    def domain_area(self) -> float:
        return float(self.areas().sum())

    def diameters(self) -> np.ndarray:
        """Longest edge length per element."""
        key = "diameters"
        if key not in self._cache:
            p = self.corner_coords()
            e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]])
            self._cache[key] = np.sqrt((e ** 2).sum(-1)).max(axis=0)
        return self._cache[key]

    def edge_structure(self):
        """Unique edges and adjacency, cached.

        Returns
        -------
        edges : (ne, 2) int array, each row sorted ascending
        tri_edges : (nt, 3) int array
            Edge id of local edges ``(v0,v1), (v1,v2), (v2,v0)``.
        edge_tris : (ne, 2) int array
            Adjacent element ids, -1 for missing (boundary) neighbor.
        """
        key = "edges"
        if key not in self._cache:
            t = self.triangles
            raw = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
            raw_sorted = np.sort(raw, axis=1)
            edges, inv = np.unique(raw_sorted, axis=0, return_inverse=True)
            tri_edges = inv.reshape(3, -1).T
            edge_tris = -np.ones((len(edges), 2), dtype=np.int64)
            tri_ids = np.tile(np.arange(len(t)), 3)
            order = np.argsort(inv, kind="stable")
            eid_sorted = inv[order]
            tid_sorted = tri_ids[order]
            boundaries = np.searchsorted(eid_sorted, np.arange(len(edges)))
            counts = np.bincount(eid_sorted, minlength=len(edges))
            if counts.max(initial=0) > 2:
                raise InvalidGeometryError("non-manifold edge in mesh")
            first = tid_sorted[boundaries]
            edge_tris[:, 0] = first
            two = counts == 2
            edge_tris[two, 1] = tid_sorted[boundaries[two] + 1]
            self._cache[key] = (edges, tri_edges, edge_tris)
        return self._cache[key]

    def boundary_vertex_mask(self, labels=None) -> np.ndarray:
        """Vertices touching boundary edges (optionally only given labels)."""
        mask = np.zeros(self.num_vertices, dtype=bool)
        if len(self.boundary_edges) == 0:
            return mask
        if labels is None:
            sel = slice(None)
        else:
            sel = np.isin(self.boundary_labels, list(labels))
        mask[self.boundary_edges[sel].ravel()] = True
        return mask

    # -- refinement -------------------------------------------------------

    def refine(self, marked) -> "Mesh":
        return refine(self, marked)

    def refine_uniform(self, levels: int = 1) -> "Mesh":
        m = self
        for _ in range(levels):
            m = refine(m, np.arange(m.num_triangles))
        return m

    def __repr__(self):
        return (f"Mesh({self.geometry.name!r}, {self.num_vertices} vertices, "
                f"{self.num_triangles} triangles)")


# ---------------------------------------------------------------------------


def create_initial_mesh(geometry: Geometry) -> Mesh:
    """Validate a geometry and build its initial mesh.

    Triangles are reoriented counterclockwise, and each element's
    refinement edge is set to its longest edge (ties broken by the lowest
    sorted vertex-index pair).  Every boundary edge must lie on exactly one
    geometry segment, which becomes its label.
    """
    verts = np.array(geometry.vertices, dtype=float)
    tris = np.array(geometry.triangles, dtype=np.int64)
    if tris.min(initial=0) < 0 or tris.max(initial=-1) >= len(verts):
        raise InvalidGeometryError("triangle index out of range")

    # orient counterclockwise
    p = verts[tris]
    s = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
         - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    if np.any(s == 0.0):
        raise InvalidGeometryError("degenerate (zero area) triangle")
    flip = s < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]

    # rotate so the refinement edge (longest, ties by lowest index pair)
    # comes first
    for k in range(len(tris)):
        t = tris[k]
        best = None
        for rot in range(3):
            a, b = t[rot], t[(rot + 1) % 3]
            length = np.hypot(*(verts[b] - verts[a]))
            key = (-length, min(a, b), max(a, b))
            if best is None or key < best[0]:
                best = (key, rot)
        rot = best[1]
        tris[k] = np.roll(t, -rot)

    mesh = Mesh(geometry, verts, tris,
                roots=np.arange(len(tris)),
                lineages=("",) * len(tris),
                boundary_edges=np.empty((0, 2), dtype=np.int64),
                boundary_labels=np.empty(0, dtype=object))

    edges, tri_edges, edge_tris = mesh.edge_structure()
    boundary = np.where(edge_tris[:, 1] < 0)[0]
    b_edges = []
    b_labels = []
    for e in boundary:
        t = edge_tris[e, 0]
        # recover the oriented edge as traversed by the (ccw) triangle
        tv = tris[t]
        for a, b in ((tv[0], tv[1]), (tv[1], tv[2]), (tv[2], tv[0])):
            if {a, b} == set(edges[e]):
                break
        label = geometry.label_edge(verts[a], verts[b])
        if label is None:
            raise InvalidGeometryError(
                f"boundary edge {verts[a]}-{verts[b]} not on any segment")
        b_edges.append((a, b))
        b_labels.append(label)

    return Mesh(geometry, verts, tris, np.arange(len(tris)), ("",) * len(tris),
                np.asarray(b_edges, dtype=np.int64), np.asarray(b_labels, dtype=object))


def refine(mesh: Mesh, marked) -> Mesh:
    """Coarsest conforming bisection refinement splitting all marked elements.

    Marked elements are bisected through their refinement edge; the closure
    iteratively marks the refinement edge of any element owning a marked
    edge, so the result is conforming.  Each element's generation grows by
    at most two per call.
    """
    marked = np.asarray(marked, dtype=np.int64)
    if marked.size == 0:
        return mesh
    if marked.min() < 0 or marked.max() >= mesh.num_triangles:
        raise IndexError("marked element index out of range")

    edges, tri_edges, _ = mesh.edge_structure()
    ne = len(edges)
    edge_marked = np.zeros(ne, dtype=bool)
    edge_marked[tri_edges[marked, 0]] = True

    # closure: an element with any marked edge must have its refinement
    # edge marked; iterate to a fixed point
    while True:
        has_marked = edge_marked[tri_edges].any(axis=1)
        need = has_marked & ~edge_marked[tri_edges[:, 0]]
        if not need.any():
            break
        edge_marked[tri_edges[need, 0]] = True

    # one midpoint per marked edge, created in edge-id order
    mids = np.where(edge_marked)[0]
    mid_vertex = -np.ones(ne, dtype=np.int64)
    mid_vertex[mids] = mesh.num_vertices + np.arange(len(mids))
    new_coords = 0.5 * (mesh.vertices[edges[mids, 0]] + mesh.vertices[edges[mids, 1]])
    verts = np.vstack([mesh.vertices, new_coords])

    t = mesh.triangles
    m01 = mid_vertex[tri_edges[:, 0]]
    m12 = mid_vertex[tri_edges[:, 1]]
    m20 = mid_vertex[tri_edges[:, 2]]
    split0 = edge_marked[tri_edges[:, 0]]
    split1 = edge_marked[tri_edges[:, 1]]
    split2 = edge_marked[tri_edges[:, 2]]

    out_tris = []
    out_roots = []
    out_lin = []

    def emit(sel, cols, suffix):
        if not sel.any():
            return
        out_tris.append(np.column_stack(cols(sel)))
        out_roots.append(mesh.roots[sel])
        idx = np.where(sel)[0]
        out_lin.extend([mesh.lineages[i] + suffix for i in idx])

    keep = ~split0
    emit(keep, lambda s: (t[s, 0], t[s, 1], t[s, 2]), "")

    # child 0 = (v2, v0, m01): refinement edge (v2, v0); split further if
    # the parent edge (v2, v0) is marked
    c0_keep = split0 & ~split2
    c0_split = split0 & split2
    emit(c0_keep, lambda s: (t[s, 2], t[s, 0], m01[s]), "0")
    emit(c0_split, lambda s: (m01[s], t[s, 2], m20[s]), "00")
    emit(c0_split, lambda s: (t[s, 0], m01[s], m20[s]), "01")

    # child 1 = (v1, v2, m01): refinement edge (v1, v2)
    c1_keep = split0 & ~split1
    c1_split = split0 & split1
    emit(c1_keep, lambda s: (t[s, 1], t[s, 2], m01[s]), "1")
    emit(c1_split, lambda s: (m01[s], t[s, 1], m12[s]), "10")
    emit(c1_split, lambda s: (t[s, 2], m01[s], m12[s]), "11")

    tris = np.vstack(out_tris)
    roots = np.concatenate(out_roots)

    # split boundary edges whose midpoint was created, keeping orientation
    b = mesh.boundary_edges
    if len(b):
        b_sorted = np.sort(b, axis=1)
        pos = np.searchsorted(
            edges.view([("a", edges.dtype), ("b", edges.dtype)]).ravel(),
            b_sorted.copy().view([("a", b.dtype), ("b", b.dtype)]).ravel())
        bmid = mid_vertex[pos]
        whole = bmid < 0
        halves_a = np.column_stack([b[~whole, 0], bmid[~whole]])
        halves_b = np.column_stack([bmid[~whole], b[~whole, 1]])
        b_edges = np.vstack([b[whole], halves_a, halves_b])
        b_labels = np.concatenate([mesh.boundary_labels[whole],
                                   mesh.boundary_labels[~whole],
                                   mesh.boundary_labels[~whole]])
    else:
        b_edges, b_labels = b, mesh.boundary_labels

    return Mesh(mesh.geometry, verts, tris, roots, out_lin, b_edges, b_labels)


def element_lineage(mesh: Mesh, index: int) -> tuple[int, str]:
    """Coarse ancestor index and bisection bit string of an element.

    Replaying the bit string from the ancestor's corners (child 0 of
    ``(a, b, c)`` is ``(c, a, m)``, child 1 is ``(b, c, m)``, with
    ``m = 0.5 * (a + b)``) reproduces the element's corner coordinates
    bit-for-bit.
    """
    return int(mesh.roots[index]), mesh.lineages[index]


def replay_lineage(corners, bits: str) -> np.ndarray:
    """Corner coordinates reached from ``corners`` by the bisection bits."""
    a, b, c = (np.asarray(x, dtype=float) for x in corners)
    for bit in bits:
        m = 0.5 * (a + b)
        if bit == "0":
            a, b, c = c, a, m
        else:
            a, b, c = b, c, m
    return np.stack([a, b, c])


# ---------------------------------------------------------------------------
# serialization


def mesh_to_json(mesh: Mesh) -> dict:
    """JSON-ready dict; floats survive the round trip losslessly."""
    return {
        "format": "helmrom-mesh-1",
        "geometry": mesh.geometry.name,
        "vertices": mesh.vertices.tolist(),
        "triangles": [
            {"v": [int(v) for v in tri], "refinement_edge": 0,
             "root": int(r), "lineage": lin}
            for tri, r, lin in zip(mesh.triangles, mesh.roots, mesh.lineages)
        ],
        "boundary_edges": [
            {"v": [int(a), int(b)], "label": str(lab)}
            for (a, b), lab in zip(mesh.boundary_edges, mesh.boundary_labels)
        ],
    }


_PRESETS = {
    "triangle": _geometry.triangle_geometry,
    "plate": _geometry.plate_geometry,
    "cavity": _geometry.cavity_geometry,
    "square": _geometry.square_geometry,
}


def mesh_from_json(payload: dict, geometry: Geometry | None = None) -> Mesh:
    if payload.get("format") != "helmrom-mesh-1":
        raise ValueError("not a mesh payload")
    if geometry is None:
        name = payload["geometry"]
        if name not in _PRESETS:
            raise ValueError(f"geometry {name!r} is not a preset; pass it explicitly")
        geometry = _PRESETS[name]()
    tris = payload["triangles"]
    tri_idx = []
    for trec in tris:
        v = trec["v"]
        r = trec.get("refinement_edge", 0)
        # normalize to the (v0, v1) refinement-edge convention
        v = v[r:] + v[:r]
        tri_idx.append(v)
    return Mesh(
        geometry,
        np.asarray(payload["vertices"], dtype=float),
        np.asarray(tri_idx, dtype=np.int64),
        np.asarray([trec["root"] for trec in tris], dtype=np.int64),
        tuple(trec["lineage"] for trec in tris),
        np.asarray([rec["v"] for rec in payload["boundary_edges"]],
                   dtype=np.int64).reshape(-1, 2),
        np.asarray([rec["label"] for rec in payload["boundary_edges"]],
                   dtype=object),
    )


def save_mesh(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        json.dump(mesh_to_json(mesh), fh)


def load_mesh(path, geometry: Geometry | None = None) -> Mesh:
    with open(path) as fh:
        return mesh_from_json(json.load(fh), geometry)
