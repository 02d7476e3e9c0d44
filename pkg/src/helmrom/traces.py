"""Boundary traces of piecewise-linear functions.

A trace is the restriction of a P1 function to a curve made of boundary
segments, stored as breakpoints in a global arclength parameter together
with nodal values.  Breakpoint parameters are computed from vertex
coordinates and the geometry data alone, so breakpoints shared by several
meshes coincide bit-for-bit and can be merged by exact comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Curve, Geometry, InvalidGeometryError

__all__ = ["Trace", "extract_trace", "merge_params", "integrate_product",
           "integrate_against", "CurveNotResolvedError"]


class CurveNotResolvedError(ValueError):
    """Raised when a curve is not covered by mesh edges."""


@dataclass
class Trace:
    """Piecewise-linear function of the arclength along a curve."""

    curve: Curve
    params: np.ndarray   # (n,) strictly increasing breakpoints
    values: np.ndarray   # (n,) complex nodal values
    length: float

    def __call__(self, s):
        """Evaluate at arclength positions ``s`` by linear interpolation."""
        s = np.asarray(s, dtype=float)
        re = np.interp(s, self.params, self.values.real)
        im = np.interp(s, self.params, self.values.imag)
        return re + 1j * im

    def resample(self, params) -> "Trace":
        """Re-express on a finer breakpoint set (must contain the own one)."""
        return Trace(self.curve, np.asarray(params, dtype=float),
                     self(params), self.length)


def curve_offsets(geometry: Geometry, curve: Curve) -> np.ndarray:
    """Cumulative arclength offset of each segment of the curve."""
    lens = [geometry.segment(name).length for name in curve.segments]
    return np.concatenate([[0.0], np.cumsum(lens)])


def extract_trace(mesh, values, curve: Curve) -> Trace:
    """Trace of nodal ``values`` (full vertex vector) along ``curve``.

    The curve must consist of boundary segments of the mesh geometry; the
    mesh resolves them by construction.  Consecutive segments must join
    head to tail, giving a single global arclength parameter.
    """
    geometry = mesh.geometry
    offsets = curve_offsets(geometry, curve)
    values = np.asarray(values)

    pieces = []
    for name, off in zip(curve.segments, offsets[:-1]):
        sel = np.where(mesh.boundary_labels == name)[0]
        if len(sel) == 0:
            raise CurveNotResolvedError(f"no boundary edges labeled {name!r}")
        edges = mesh.boundary_edges[sel]
        vids = np.unique(edges)
        params = geometry.segment_params(name, mesh.vertices[vids]) + off
        order = np.argsort(params)
        vids, params = vids[order], params[order]
        # sanity: the edges must tile the segment
        lens = np.abs(
            geometry.segment_params(name, mesh.vertices[edges[:, 1]])
            - geometry.segment_params(name, mesh.vertices[edges[:, 0]]))
        if not np.isclose(lens.sum(), geometry.segment(name).length,
                          rtol=1e-9, atol=0.0):
            raise CurveNotResolvedError(f"segment {name!r} not tiled by edges")
        pieces.append((params, values[vids]))

    params = np.concatenate([p for p, _ in pieces])
    vals = np.concatenate([v for _, v in pieces])
    # segments share their junction points; keep the first occurrence
    params, idx = np.unique(params, return_index=True)
    vals = vals[idx]
    return Trace(curve, params, np.asarray(vals, dtype=complex),
                 float(offsets[-1]))


def merge_params(traces) -> np.ndarray:
    """Union of the breakpoint sets of several traces (exact merge)."""
    return np.unique(np.concatenate([t.params for t in traces]))


def integrate_product(a: Trace, b: Trace) -> complex:
    """Exact integral of ``a * conj(b)`` along the shared curve.

    Both factors are piecewise linear; on the merged breakpoints the
    product is quadratic per interval and two-point Gauss is exact.
    """
    s = np.unique(np.concatenate([a.params, b.params]))
    return _gauss_product(s, a(s), np.conj(b(s)))


def integrate_against(t: Trace, weight=None) -> complex:
    """Exact integral of ``t`` times a weight of polynomial degree <= 2.

    ``weight`` maps arclength positions to complex values; ``None`` means
    the constant 1.  Uses two-point Gauss per interval, exact for the
    resulting cubic integrand.
    """
    s = t.params
    h = np.diff(s)
    g = 0.5 / np.sqrt(3.0)
    mid = 0.5 * (s[:-1] + s[1:])
    x1 = mid - g * h
    x2 = mid + g * h
    f1 = t(x1) if weight is None else t(x1) * weight(x1)
    f2 = t(x2) if weight is None else t(x2) * weight(x2)
    return complex(0.5 * np.sum(h * (f1 + f2)))


def _gauss_product(s, fa, fb):
    # two-point Gauss on each interval of the common grid
    h = np.diff(s)
    g = 0.5 / np.sqrt(3.0)
    mid = 0.5 * (s[:-1] + s[1:])
    va = _interp_c(s, fa)
    vb = _interp_c(s, fb)
    x1 = mid - g * h
    x2 = mid + g * h
    return complex(0.5 * np.sum(h * (va(x1) * vb(x1) + va(x2) * vb(x2))))


def _interp_c(xp, fp):
    def f(x):
        return np.interp(x, xp, fp.real) + 1j * np.interp(x, xp, fp.imag)
    return f
