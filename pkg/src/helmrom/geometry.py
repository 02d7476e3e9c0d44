"""Domain geometry: named boundary segments and initial triangulations.

A :class:`Geometry` couples a coarse conforming triangulation with a
partition of the domain boundary into named polyline segments.  Boundary
conditions, output functionals, and trace curves all refer to segments by
name, so meshes produced by refinement keep a pointer to the geometry they
descend from.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

__all__ = [
    "Segment",
    "Curve",
    "Geometry",
    "InvalidGeometryError",
    "triangle_geometry",
    "plate_geometry",
    "cavity_geometry",
    "square_geometry",
    "polygon_geometry",
    "conforming_triangulation",
    "CAVITY_SCATTERER",
]


class InvalidGeometryError(ValueError):
    """Raised when a triangulation or boundary labeling is inconsistent."""


@dataclass(frozen=True)
class Segment:
    """Named piece of the domain boundary: an ordered open polyline.

    The orientation of the polyline fixes the arclength parametrization
    used for boundary traces and curve integrals.
    """

    name: str
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.points) < 2:
            raise InvalidGeometryError(f"segment {self.name!r} needs >= 2 points")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)

    @property
    def piece_lengths(self) -> np.ndarray:
        pts = self.array
        return np.hypot(*(pts[1:] - pts[:-1]).T)

    @property
    def length(self) -> float:
        return float(self.piece_lengths.sum())


@dataclass(frozen=True)
class Curve:
    """Ordered tuple of segment names used as an integration domain."""

    segments: tuple[str, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("curve needs at least one segment")


class Geometry:
    """Coarse triangulation plus named boundary segments.

    Parameters
    ----------
    name : str
        Identifier, also stored in serialized meshes.
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array
        Conforming triangulation of the domain.  Orientation and
        refinement-edge conventions are normalized by
        ``mesh.create_initial_mesh``.
    segments : sequence of Segment
        Must cover the triangulation boundary exactly; every boundary edge
        of the triangulation has to lie inside a single polyline piece.
    """

    def __init__(self, name, vertices, triangles, segments):
        self.name = name
        self.vertices = np.asarray(vertices, dtype=float)
        self.triangles = np.asarray(triangles, dtype=np.int64)
        self.segments = tuple(segments)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise InvalidGeometryError("vertices must be (nv, 2)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise InvalidGeometryError("triangles must be (nt, 3)")
        names = [s.name for s in self.segments]
        if len(set(names)) != len(names):
            raise InvalidGeometryError("duplicate segment names")
        self._by_name = {s.name: s for s in self.segments}

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Geometry):
            return NotImplemented
        return (self.name == other.name
                and np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.triangles, other.triangles)
                and self.segments == other.segments)

    def __hash__(self):
        # consistent with __eq__ so equal geometries share cached meshes
        return hash((self.name, self.vertices.shape[0], self.triangles.shape[0]))

    def segment(self, name: str) -> Segment:
        try:
            return self._by_name[name]
        except KeyError:
            raise InvalidGeometryError(f"unknown boundary segment {name!r}") from None

    def curve_length(self, curve: Curve) -> float:
        return sum(self.segment(n).length for n in curve.segments)

    # -- boundary point bookkeeping -------------------------------------

    def label_edge(self, pa, pb) -> str | None:
        """Segment name whose polyline contains the edge ``pa - pb``, or None."""
        mid = 0.5 * (np.asarray(pa) + np.asarray(pb))
        for seg in self.segments:
            if (_piece_of_point(seg, pa) is not None
                    and _piece_of_point(seg, pb) is not None
                    and _piece_of_point(seg, mid) is not None):
                return seg.name
        return None

    def segment_params(self, name: str, points: np.ndarray) -> np.ndarray:
        """Arclength of boundary points along segment ``name``.

        The parameter of a point is computed from the segment data and the
        point coordinates alone, so identical coordinates yield identical
        parameters no matter which mesh they came from.
        """
        seg = self.segment(name)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(len(pts))
        offsets = np.concatenate([[0.0], np.cumsum(seg.piece_lengths)])
        for i, p in enumerate(pts):
            k = _piece_of_point(seg, p)
            if k is None:
                raise InvalidGeometryError(
                    f"point {p} does not lie on segment {name!r}")
            a = seg.array[k]
            out[i] = offsets[k] + math.hypot(p[0] - a[0], p[1] - a[1])
        return out


def _piece_of_point(seg: Segment, p, tol=1e-9) -> int | None:
    """Index of the polyline piece of ``seg`` containing ``p``, or None.

    A point sitting exactly on a shared knot belongs to the earlier piece.
    """
    pts = seg.array
    p = np.asarray(p, dtype=float)
    for k in range(len(pts) - 1):
        a, b = pts[k], pts[k + 1]
        d = b - a
        L2 = d @ d
        t = ((p - a) @ d) / L2
        if -tol <= t <= 1.0 + tol:
            # distance from the supporting line
            off = abs((p[0] - a[0]) * d[1] - (p[1] - a[1]) * d[0]) / math.sqrt(L2)
            if off <= tol * max(1.0, math.sqrt(L2)):
                return k
    return None


# ---------------------------------------------------------------------------
# presets


def triangle_geometry() -> Geometry:
    """Right isosceles triangle 0 < x2 < x1 < pi/2, split in two.

    Boundary segments: ``bottom`` (the leg on the x1-axis), ``right`` (the
    vertical leg), ``hypotenuse``.
    """
    h = math.pi / 2
    verts = [(0.0, 0.0), (h, 0.0), (h, h), (h / 2, h / 2)]
    tris = [(0, 1, 3), (1, 2, 3)]
    segs = (
        Segment("bottom", ((0.0, 0.0), (h, 0.0))),
        Segment("right", ((h, 0.0), (h, h))),
        Segment("hypotenuse", ((h, h), (0.0, 0.0))),
    )
    return Geometry("triangle", verts, tris, segs)


def plate_geometry() -> Geometry:
    """Rectangle ]0,1/2[ x ]0,1[ minus the notch ]0,1/4[ x ]0.2,0.45[.

    The notch reaches the left wall, so the domain is simply connected but
    non-convex.  Segments: ``bottom`` (driven edge), ``top`` (clamped),
    ``right``, ``left_upper``, ``left_lower``, and ``notch``.
    """
    xs = [0.0, 0.25, 0.5]
    ys = [0.0, 0.2, 0.45, 0.725, 1.0]
    verts = [(x, y) for y in ys for x in xs]
    idx = lambda i, j: j * 3 + i

    tris = []
    for j in range(4):
        for i in range(2):
            if (i, j) == (0, 1):
                continue  # the notch cell
            a, b = idx(i, j), idx(i + 1, j)
            d, e = idx(i, j + 1), idx(i + 1, j + 1)
            tris.append((a, b, e))
            tris.append((a, e, d))
    segs = (
        Segment("bottom", ((0.0, 0.0), (0.5, 0.0))),
        Segment("right", ((0.5, 0.0), (0.5, 1.0))),
        Segment("top", ((0.5, 1.0), (0.0, 1.0))),
        Segment("left_upper", ((0.0, 1.0), (0.0, 0.45))),
        Segment("notch", ((0.0, 0.45), (0.25, 0.45), (0.25, 0.2), (0.0, 0.2))),
        Segment("left_lower", ((0.0, 0.2), (0.0, 0.0))),
    )
    return Geometry("plate", verts, tris, segs)


#: Vertices of the C-shaped sound-hard scatterer inside the unit square,
#: listed counterclockwise around the obstacle.
CAVITY_SCATTERER = (
    (0.379408389392194, 0.343932372542188),
    (0.370591610607806, 0.356067627457812),
    (0.613979026519516, 0.532898935898998),
    (0.613979026519516, 0.632722284235161),
    (0.379408389392194, 0.462296740540848),
    (0.370591610607806, 0.474431995456472),
    (0.629408389392194, 0.662473392204685),
    (0.629408389392194, 0.525568004543528),
)


def cavity_geometry() -> Geometry:
    """Unit square minus a thin C-shaped scatterer.

    The coarse triangulation is shipped as package data (it is produced
    once by a conforming-Delaunay construction; see ``tools/`` in the
    source tree).  Segments: ``outer`` (the square, impedance boundary),
    ``trap`` (the three scatterer walls that bound the trapping region),
    and ``hull`` (the remaining scatterer walls).
    """
    payload = json.loads(
        resources.files("helmrom.data").joinpath("cavity_t0.json").read_text())
    verts = np.asarray(payload["vertices"], dtype=float)
    tris = np.asarray(payload["triangles"], dtype=np.int64)
    c = CAVITY_SCATTERER
    segs = (
        Segment("outer", ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0))),
        Segment("trap", (c[1], c[2], c[3], c[4])),
        Segment("hull", (c[4], c[5], c[6], c[7], c[0], c[1])),
    )
    return Geometry("cavity", verts, tris, segs)


def square_geometry() -> Geometry:
    """Unit square split along the main diagonal; single segment ``wall``."""
    verts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    tris = [(0, 1, 2), (0, 2, 3)]
    segs = (Segment("wall", ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0))),)
    return Geometry("square", verts, tris, segs)


# ---------------------------------------------------------------------------
# user polygons


def polygon_geometry(name, outer, holes=(), segments=None) -> Geometry:
    """Geometry for a polygon with optional polygonal holes.

    Parameters
    ----------
    outer : (n, 2) array-like
        Outer boundary, counterclockwise, not closed.
    holes : sequence of array-like
        Hole boundaries.
    segments : sequence of Segment, optional
        Boundary partition; by default one closed segment per loop, named
        ``outer`` and ``hole0``, ``hole1``, ...
    """
    outer = np.asarray(outer, dtype=float)
    holes = [np.asarray(h, dtype=float) for h in holes]
    verts, tris = conforming_triangulation(outer, holes)
    if segments is None:
        segments = [Segment("outer", tuple(map(tuple, np.vstack([outer, outer[:1]]))))]
        for i, h in enumerate(holes):
            segments.append(Segment(f"hole{i}", tuple(map(tuple, np.vstack([h, h[:1]])))))
    return Geometry(name, verts, tris, segments)


def point_in_polygon(p, poly) -> bool:
    """Ray-casting point-in-polygon test (boundary points unspecified)."""
    x, y = p
    poly = np.asarray(poly, dtype=float)
    inside = False
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        if (y0 > y) != (y1 > y):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if x < xc:
                inside = not inside
    return inside


def _segment_distance(p, a, b) -> float:
    """Euclidean distance from point ``p`` to the segment ``a``--``b``."""
    ab = np.asarray(b, dtype=float) - a
    t = float(np.dot(p - a, ab)) / max(float(np.dot(ab, ab)), 1e-300)
    t = min(1.0, max(0.0, t))
    return math.hypot(*(a + t * ab - p))


def conforming_triangulation(outer, holes=(), max_rounds=64, max_edge=None,
                             seed_spacing=None):
    """Triangulate a polygon with holes so every input edge is resolved.

    Runs unconstrained Delaunay on the loop vertices and repeatedly inserts
    midpoints of constraint edges that are not yet covered by Delaunay
    edges.  Triangles are then filtered by their centroid.  Intended for
    coarse initial triangulations, not for mesh generation proper.

    ``max_edge`` pre-splits constraint edges to at most that length;
    ``seed_spacing`` sprinkles a grid of interior points (kept clear of
    the constraints) to avoid slivers next to thin features.
    """
    from scipy.spatial import Delaunay

    loops = [np.asarray(outer, dtype=float)] + [np.asarray(h, dtype=float) for h in holes]
    scale = max(np.ptp(loops[0][:, 0]), np.ptp(loops[0][:, 1]))
    tol = 1e-9 * scale

    points: list[tuple[float, float]] = []

    def add_point(p):
        for q in points:
            if abs(q[0] - p[0]) <= tol and abs(q[1] - p[1]) <= tol:
                return
        points.append((float(p[0]), float(p[1])))

    constraints = []
    for loop in loops:
        for i in range(len(loop)):
            a, b = loop[i], loop[(i + 1) % len(loop)]
            constraints.append((tuple(a), tuple(b)))
            add_point(a)
    for a, b in constraints:
        a, b = np.asarray(a), np.asarray(b)
        add_point(a)
        if max_edge is not None:
            n = int(np.ceil(math.hypot(*(b - a)) / max_edge))
            for k in range(1, n):
                add_point(a + (k / n) * (b - a))

    if seed_spacing is not None:
        lo = loops[0].min(axis=0)
        hi = loops[0].max(axis=0)
        nx = int(np.ceil((hi[0] - lo[0]) / seed_spacing))
        ny = int(np.ceil((hi[1] - lo[1]) / seed_spacing))
        segs = []
        for loop in loops:
            for i in range(len(loop)):
                segs.append((loop[i], loop[(i + 1) % len(loop)]))
        for ix in range(1, nx):
            for iy in range(1, ny):
                p = np.array([lo[0] + ix * (hi[0] - lo[0]) / nx,
                              lo[1] + iy * (hi[1] - lo[1]) / ny])
                if not point_in_polygon(p, loops[0]):
                    continue
                if any(point_in_polygon(p, h) for h in loops[1:]):
                    continue
                d = min(_segment_distance(p, a, b) for a, b in segs)
                if d > 0.45 * seed_spacing:
                    add_point(p)

    tri = None
    for _ in range(max_rounds):
        pts = np.asarray(points)
        tri = Delaunay(pts)
        edges = set()
        for s in tri.simplices:
            for u, v in ((s[0], s[1]), (s[1], s[2]), (s[2], s[0])):
                edges.add((min(u, v), max(u, v)))
        new_pts = []
        for a, b in constraints:
            a = np.asarray(a)
            b = np.asarray(b)
            d = b - a
            L = math.hypot(*d)
            # points lying on the constraint, ordered along it
            t = ((pts - a) @ d) / (L * L)
            off = np.abs((pts[:, 0] - a[0]) * d[1] - (pts[:, 1] - a[1]) * d[0]) / L
            on = np.where((off <= tol) & (t >= -tol / L) & (t <= 1 + tol / L))[0]
            on = on[np.argsort(t[on])]
            for u, v in zip(on[:-1], on[1:]):
                if (min(u, v), max(u, v)) not in edges:
                    new_pts.append(0.5 * (pts[u] + pts[v]))
        if not new_pts:
            break
        for p in new_pts:
            add_point(p)
    else:
        raise InvalidGeometryError("constraint recovery did not converge")

    pts = np.asarray(points)
    keep = []
    for s in tri.simplices:
        c = pts[s].mean(axis=0)
        if not point_in_polygon(c, loops[0]):
            continue
        if any(point_in_polygon(c, h) for h in loops[1:]):
            continue
        keep.append(s)
    if not keep:
        raise InvalidGeometryError("empty triangulation after filtering")
    tris = np.asarray(keep, dtype=np.int64)

    used = np.unique(tris)
    remap = -np.ones(len(pts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return pts[used], remap[tris]
