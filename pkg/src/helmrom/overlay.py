"""Cross-mesh inner products through overlays of bisection meshes.

Snapshots taken at different frequencies live on different adaptively
refined meshes.  All meshes descend from the same initial triangulation by
newest-vertex bisection, so any two of them have a common refinement whose
elements are exactly the union of the two binary forests' leaves.  Within
an overlay element both snapshots are linear, which makes every entry of a
Gram matrix an exact integral of a product of polynomials.

Lineages (bisection paths as '0'/'1' strings) identify elements uniquely,
and midpoint coordinates are reproduced bit-for-bit by replaying the
bisections, so no geometric tolerance enters anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import Curve
from .mesh import Mesh, create_initial_mesh
from . import traces as _traces

__all__ = [
    "InnerProductSpec",
    "MeshOverlay",
    "overlay_pair",
    "cross_inner_product",
    "assemble_gramian",
    "assemble_gramians",
    "assemble_qoi_gramian",
    "trace_common_grid",
    "save_gramian",
    "load_gramian",
]

_KINDS = ("h1_full", "h1_semi", "l2_domain", "l2_curve")

# leaves per replay chunk; bounds peak memory of corner/value arrays
_CHUNK = 1 << 20


@dataclass(frozen=True)
class InnerProductSpec:
    """Inner product used for Gram matrices of snapshots.

    ``kind`` is one of ``h1_full`` (default for frequency-response
    surrogates), ``h1_semi``, ``l2_domain``, or ``l2_curve``; the last one
    integrates traces along ``curve`` and is what quadratic boundary
    outputs use.
    """

    kind: str = "h1_full"
    curve: Curve | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown inner product kind {self.kind!r}")
        if self.kind == "l2_curve" and self.curve is None:
            raise ValueError("l2_curve inner product needs a curve")
        if self.kind != "l2_curve" and self.curve is not None:
            raise ValueError(f"{self.kind} inner product takes no curve")


@dataclass(frozen=True)
class MeshOverlay:
    """Common refinement of two meshes, one row per overlay element.

    ``lineages`` are bisection paths relative to the initial
    triangulation, ``parent_a``/``parent_b`` index the element of either
    mesh containing each overlay element.
    """

    mesh_a: Mesh
    mesh_b: Mesh
    roots: np.ndarray
    lineages: np.ndarray
    parent_a: np.ndarray
    parent_b: np.ndarray

    def __len__(self) -> int:
        return len(self.roots)


@lru_cache(maxsize=8)
def _initial_mesh(geometry) -> Mesh:
    return create_initial_mesh(geometry)


def _leaf_table(mesh: Mesh, width: int):
    """Lineages as fixed-width bytes plus element ids, sorted by root."""
    arr = np.array([s.encode() for s in mesh.lineages], dtype=f"S{width}")
    order = np.lexsort((arr, mesh.roots))
    return mesh.roots[order], arr[order], order


def overlay_pair(mesh_a: Mesh, mesh_b: Mesh) -> MeshOverlay:
    """Common refinement of two meshes descending from the same roots."""
    if mesh_a.geometry is not mesh_b.geometry and \
            mesh_a.geometry != mesh_b.geometry:
        raise ValueError("meshes do not share an initial triangulation")
    width = max(1, max((len(s) for s in mesh_a.lineages), default=0),
                max((len(s) for s in mesh_b.lineages), default=0))
    ra, la, ea = _leaf_table(mesh_a, width)
    rb, lb, eb = _leaf_table(mesh_b, width)
    n_roots = int(max(ra.max(initial=-1), rb.max(initial=-1))) + 1

    roots_out, lin_out, pa_out, pb_out = [], [], [], []
    for r in range(n_roots):
        a0, a1 = np.searchsorted(ra, [r, r + 1])
        b0, b1 = np.searchsorted(rb, [r, r + 1])
        sa, ia = la[a0:a1], ea[a0:a1]
        sb, ib = lb[b0:b1], eb[b0:b1]
        union = np.unique(np.concatenate([sa, sb]))
        # a node is interior iff its sorted successor extends it
        interior = np.zeros(len(union), dtype=bool)
        if len(union) > 1:
            interior[:-1] = np.char.startswith(union[1:], union[:-1])
        leaves = union[~interior]
        # the containing element of either mesh is the last leaf <= lineage
        pa = np.searchsorted(sa, leaves, side="right") - 1
        pb = np.searchsorted(sb, leaves, side="right") - 1
        if pa.min(initial=0) < 0 or pb.min(initial=0) < 0 or \
                not np.char.startswith(leaves, sa[pa]).all() or \
                not np.char.startswith(leaves, sb[pb]).all():
            raise ValueError("meshes do not share an initial triangulation")
        roots_out.append(np.full(len(leaves), r, dtype=np.int64))
        lin_out.append(leaves)
        pa_out.append(ia[pa])
        pb_out.append(ib[pb])

    return MeshOverlay(mesh_a, mesh_b,
                       np.concatenate(roots_out),
                       np.concatenate(lin_out).astype(f"S{width}"),
                       np.concatenate(pa_out), np.concatenate(pb_out))


def _replay_chunk(overlay: MeshOverlay, sel, values_a, values_b):
    """Corners and per-side nodal values of overlay elements ``sel``.

    Replays the bisection paths level by level: corners start from the
    initial triangulation, values are injected once the path reaches the
    containing element of the respective mesh (inside it the snapshot is
    linear, so midpoint values are endpoint averages, bit for bit the
    same arithmetic as the mesh refinement).
    """
    lins = overlay.lineages[sel]
    n, width = len(lins), overlay.lineages.dtype.itemsize
    bits = lins.view(np.uint8).reshape(n, width)
    lens = np.count_nonzero(bits, axis=1)

    geo = overlay.mesh_a.geometry
    # seed from the canonical initial mesh (roots are reoriented there)
    initial = _initial_mesh(geo)
    corners = initial.vertices[initial.triangles][overlay.roots[sel]]
    corners = np.ascontiguousarray(corners)

    out = []
    for mesh, vals, parents in ((overlay.mesh_a, values_a, overlay.parent_a),
                                (overlay.mesh_b, values_b, overlay.parent_b)):
        plen = np.array([len(mesh.lineages[e]) for e in parents[sel]])
        tri_vals = np.asarray(vals, dtype=complex)[mesh.triangles[parents[sel]]]
        out.append((plen, tri_vals))
    (plen_a, inj_a), (plen_b, inj_b) = out

    va = np.full((n, 3), np.nan, dtype=complex)
    vb = np.full((n, 3), np.nan, dtype=complex)
    for d in range(int(lens.max(initial=0)) + 1):
        for plen, inj, v in ((plen_a, inj_a, va), (plen_b, inj_b, vb)):
            hit = plen == d
            if hit.any():
                v[hit] = inj[hit]
        act = lens > d
        if not act.any():
            break
        one = bits[act, d] == ord("1")
        for arr in (corners, va, vb):
            sub = arr[act]
            mid = 0.5 * (sub[:, 0] + sub[:, 1])
            child = np.where(one[:, None, None] if sub.ndim == 3 else one[:, None],
                             np.stack([sub[:, 1], sub[:, 2], mid], axis=1),
                             np.stack([sub[:, 2], sub[:, 0], mid], axis=1))
            arr[act] = child
    return corners, va, vb


def _pair_sums(overlay: MeshOverlay, values_a, values_b):
    """Exact ``(integral of a conj(b), integral of grad a . conj(grad b))``."""
    l2 = 0.0 + 0.0j
    h1 = 0.0 + 0.0j
    n = len(overlay)
    for lo in range(0, n, _CHUNK):
        sel = slice(lo, min(lo + _CHUNK, n))
        corners, va, vb = _replay_chunk(overlay, sel, values_a, values_b)
        x, y = corners[..., 0], corners[..., 1]
        b = y[:, [1, 2, 0]] - y[:, [2, 0, 1]]
        c = x[:, [2, 0, 1]] - x[:, [1, 2, 0]]
        area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
                      - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
        cb = vb.conj()
        l2 += np.sum(area / 12.0 * (va.sum(1) * cb.sum(1)
                                    + np.einsum("ij,ij->i", va, cb)))
        # P1 gradients: grad = (sum v_i b_i, sum v_i c_i) / (2 area)
        gax = np.einsum("ij,ij->i", va, b)
        gay = np.einsum("ij,ij->i", va, c)
        gbx = np.einsum("ij,ij->i", cb, b)
        gby = np.einsum("ij,ij->i", cb, c)
        h1 += np.sum((gax * gbx + gay * gby) / (4.0 * area))
    return l2, h1


def cross_inner_product(snap_a, snap_b, spec: InnerProductSpec,
                        overlay: MeshOverlay | None = None) -> complex:
    """Exact inner product of two snapshots on different meshes.

    Conjugate-linear in the second argument:
    ``integral of u_a * conj(u_b)`` in the requested inner product.
    """
    if spec.kind == "l2_curve":
        ta = _traces.extract_trace(snap_a.mesh, snap_a.full_values(), spec.curve)
        tb = _traces.extract_trace(snap_b.mesh, snap_b.full_values(), spec.curve)
        return _traces.integrate_product(ta, tb)
    if overlay is None:
        overlay = overlay_pair(snap_a.mesh, snap_b.mesh)
    l2, h1 = _pair_sums(overlay, snap_a.full_values(), snap_b.full_values())
    if spec.kind == "l2_domain":
        return complex(l2)
    if spec.kind == "h1_semi":
        return complex(h1)
    return complex(l2 + h1)


def assemble_gramians(snapshots, specs) -> list[np.ndarray]:
    """Gram matrices of snapshots for several inner products at once.

    ``G[i, j] = <u_j, u_i>`` so that ``q^H G q = ||sum_j q_j u_j||^2``.
    The pairwise mesh overlays are shared across all overlay-based inner
    products, which is the expensive part of the assembly.
    """
    specs = list(specs)
    snaps = list(snapshots)
    s = len(snaps)
    mats = [np.zeros((s, s), dtype=complex) for _ in specs]
    need_overlay = [sp for sp in specs if sp.kind != "l2_curve"]

    for j, sj in enumerate(snaps):
        for i in range(j + 1):
            si = snaps[i]
            overlay = None
            l2 = h1 = None
            if need_overlay:
                overlay = overlay_pair(si.mesh, sj.mesh)
                l2, h1 = _pair_sums(overlay, si.full_values(), sj.full_values())
            for spec, g in zip(specs, mats):
                if spec.kind == "l2_curve":
                    val = cross_inner_product(si, sj, spec)
                elif spec.kind == "l2_domain":
                    val = complex(l2)
                elif spec.kind == "h1_semi":
                    val = complex(h1)
                else:
                    val = complex(l2 + h1)
                # val = <u_i, u_j>; store so that G[i, j] = <u_j, u_i>
                g[j, i] = val
                g[i, j] = np.conj(val)
    return mats


def assemble_gramian(snapshots, spec: InnerProductSpec = InnerProductSpec()) \
        -> np.ndarray:
    """Gram matrix for a single inner product; see ``assemble_gramians``."""
    return assemble_gramians(snapshots, [spec])[0]


def assemble_qoi_gramian(snapshots, curve: Curve) -> np.ndarray:
    """Gram matrix of snapshot traces along the output curve.

    This is the ``l2_curve`` Gram matrix evaluated on a shared breakpoint
    grid, the ingredient of quadratic-output surrogates.
    """
    params, values = trace_common_grid(snapshots, curve)
    dt = np.diff(params)
    # 2-point Gauss per interval is exact for products of linear traces
    xi = 0.5 * (1.0 - 1.0 / np.sqrt(3.0)), 0.5 * (1.0 + 1.0 / np.sqrt(3.0))
    q = np.concatenate([values[:, :-1] + x * np.diff(values, axis=1) for x in xi],
                       axis=1)
    w = np.concatenate([0.5 * dt, 0.5 * dt])
    # G[i, j] = <u_j, u_i> so that q^H G q = ||sum_j q_j u_j||^2
    return (q.conj() * w) @ q.T


def trace_common_grid(snapshots, curve: Curve):
    """Merge the trace breakpoints of all snapshots along a curve.

    Returns ``(params, values)`` with ``values[i]`` the i-th snapshot's
    trace on the shared grid.  Breakpoint parameters are bit-identical
    across meshes, so the merge is exact and resampling loses nothing.
    """
    trs = [_traces.extract_trace(s.mesh, s.full_values(), curve)
           for s in snapshots]
    params = _traces.merge_params(trs)
    values = np.stack([t.resample(params).values for t in trs])
    return params, values


def save_gramian(g: np.ndarray, path) -> None:
    """Write a Gram matrix as JSON (row-major, re/im interleaved)."""
    import json

    g = np.asarray(g, dtype=complex)
    flat = np.empty(2 * g.size)
    flat[0::2] = g.real.ravel()
    flat[1::2] = g.imag.ravel()
    with open(path, "w") as fh:
        json.dump({"format": "helmrom-gramian-1", "shape": list(g.shape),
                   "data": flat.tolist()}, fh)


def load_gramian(path) -> np.ndarray:
    """Read a Gram matrix written by :func:`save_gramian`."""
    import json

    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "helmrom-gramian-1":
        raise ValueError("not a gramian file")
    flat = np.asarray(doc["data"], dtype=float)
    return (flat[0::2] + 1j * flat[1::2]).reshape(doc["shape"])
