"""Closed-form reference solution for the triangle benchmark.

On the right triangle 0 < x2 < x1 < pi/2 with homogeneous Dirichlet
conditions on the bottom leg and Neumann conditions elsewhere, the
Laplacian has eigenvalues ``m^2 + n^2`` over odd pairs ``m <= n`` with
eigenfunctions built from ``sin(m x1) sin(n x2)``.  The response to the
constant unit load is the expansion

    u(z)(x) = sum over odd m, n of
              16 / (pi^2 m n (m^2 + n^2 - z)) sin(m x1) sin(n x2)

and its integral over the vertical leg x1 = pi/2 is

    y(z) = sum over odd m, n of
           16 sin(m pi / 2) / (pi^2 m n^2 (m^2 + n^2 - z)).

All sums are truncated at ``m, n <= truncation`` (default 201); the
truncation error can be estimated with :func:`series_tail_estimate`.
"""

from __future__ import annotations

import numpy as np

__all__ = ["triangle_eigenvalues", "triangle_eigenfunction",
           "triangle_exact_solution", "triangle_exact_gradient",
           "triangle_exact_qoi", "series_tail_estimate",
           "triangle_energy_error", "DEFAULT_TRUNCATION"]

DEFAULT_TRUNCATION = 201


def _odd(limit: int) -> np.ndarray:
    return np.arange(1, limit + 1, 2, dtype=float)


def _coeff_matrix(z, limit: int) -> np.ndarray:
    m = _odd(limit)
    lam = m[:, None] ** 2 + m[None, :] ** 2
    denom = np.pi ** 2 * np.outer(m, m) * (lam - z)
    if np.any(denom == 0.0):
        raise ZeroDivisionError(f"z = {z} is an eigenvalue of the series")
    return 16.0 / denom


def triangle_eigenvalues(upper: float) -> list[tuple[float, int]]:
    """Sorted ``(eigenvalue, multiplicity)`` pairs up to ``upper``.

    Eigenvalues are ``m^2 + n^2`` over odd ``m <= n``; multiplicities
    count the number of such representations.
    """
    limit = int(np.ceil(np.sqrt(upper))) + 2
    counts: dict[int, int] = {}
    for m in range(1, limit + 1, 2):
        for n in range(m, limit + 1, 2):
            lam = m * m + n * n
            if lam <= upper:
                counts[lam] = counts.get(lam, 0) + 1
    return [(float(lam), counts[lam]) for lam in sorted(counts)]


def triangle_eigenfunction(m: int, n: int, points) -> np.ndarray:
    """L2-normalized eigenfunction for the odd pair ``m <= n``."""
    if m % 2 == 0 or n % 2 == 0 or m > n:
        raise ValueError("need odd m <= n")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x1, x2 = pts[:, 0], pts[:, 1]
    if m == n:
        return (4.0 * np.sqrt(2.0) / np.pi) * np.sin(m * x1) * np.sin(m * x2)
    return (4.0 / np.pi) * (np.sin(m * x1) * np.sin(n * x2)
                            + np.sin(n * x1) * np.sin(m * x2))


def _eval_series(z, points, limit, mode):
    """Shared evaluator; ``mode`` selects value, d/dx1 or d/dx2."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m = _odd(limit)
    C = _coeff_matrix(z, limit)
    real = np.isrealobj(C)
    out = np.empty(len(pts), dtype=float if real else complex)
    # chunked separable evaluation: sum_{m,n} C[m,n] a_m(x1) b_n(x2)
    chunk = 20000
    for s in range(0, len(pts), chunk):
        x1 = pts[s:s + chunk, 0]
        x2 = pts[s:s + chunk, 1]
        ang1 = np.outer(x1, m)
        ang2 = np.outer(x2, m)
        if mode == "value":
            A, B = np.sin(ang1), np.sin(ang2)
        elif mode == "dx1":
            A, B = np.cos(ang1) * m, np.sin(ang2)
        else:
            A, B = np.sin(ang1), np.cos(ang2) * m
        out[s:s + chunk] = ((A @ C) * B).sum(axis=1)
    return out


def triangle_exact_solution(z, points, truncation: int = DEFAULT_TRUNCATION):
    """Truncated series evaluation of the exact response at ``points``."""
    zc = complex(z)
    zz = zc.real if zc.imag == 0.0 else zc
    return _eval_series(zz, points, truncation, "value")


def triangle_exact_gradient(z, points, truncation: int = DEFAULT_TRUNCATION):
    """Gradient of the truncated series, shape ``(npoints, 2)``."""
    zc = complex(z)
    zz = zc.real if zc.imag == 0.0 else zc
    g1 = _eval_series(zz, points, truncation, "dx1")
    g2 = _eval_series(zz, points, truncation, "dx2")
    return np.stack([g1, g2], axis=1)


def triangle_exact_qoi(z, truncation: int = DEFAULT_TRUNCATION):
    """Integral of the exact response over the vertical leg."""
    zc = complex(z)
    zz = zc.real if zc.imag == 0.0 else zc
    m = _odd(truncation)
    sign = np.where(((m - 1) / 2).astype(int) % 2 == 0, 1.0, -1.0)
    lam = m[:, None] ** 2 + m[None, :] ** 2
    denom = np.pi ** 2 * np.outer(m, m ** 2) * (lam.T - zz)
    if np.any(denom == 0.0):
        raise ZeroDivisionError(f"z = {z} is an eigenvalue of the series")
    terms = 16.0 * sign[:, None] / denom
    val = terms.sum()
    return complex(val) if np.iscomplexobj(terms) else float(val)


def series_tail_estimate(z, truncation: int = DEFAULT_TRUNCATION,
                         extension: int = 4001) -> float:
    """Estimate of the series mass dropped by the truncation.

    Sums ``16 / (pi^2 m n |m^2 + n^2 - z|)`` over odd pairs with
    ``max(m, n)`` beyond the truncation up to ``extension``, plus an
    integral-comparison bound ``(16 / pi^2) * 4 / extension^2`` for the
    rest.  Valid for ``|z|`` well below ``truncation^2``.
    """
    r = abs(complex(z))
    m_all = _odd(extension)
    lam = m_all[:, None] ** 2 + m_all[None, :] ** 2
    mass = 16.0 / (np.pi ** 2 * np.outer(m_all, m_all) * np.abs(lam - r))
    inside = (m_all <= truncation)[:, None] & (m_all <= truncation)[None, :]
    tail = float(mass[~inside].sum())
    return tail + (16.0 / np.pi ** 2) * 4.0 / extension ** 2


def triangle_energy_error(snapshot, truncation: int = DEFAULT_TRUNCATION) -> float:
    """Energy norm ``||grad(u - u_h)||`` of a triangle-benchmark snapshot.

    Uses the edge-midpoint rule per element, which integrates the P1 part
    exactly and the smooth series part to second order.
    """
    mesh = snapshot.mesh
    values = snapshot.full_values()
    p = mesh.corner_coords()
    x, y = p[..., 0], p[..., 1]
    b = y[:, [1, 2, 0]] - y[:, [2, 0, 1]]
    c = x[:, [2, 0, 1]] - x[:, [1, 2, 0]]
    area = mesh.areas()
    uloc = values[mesh.triangles]
    grad_h = np.stack([(uloc * b).sum(axis=1), (uloc * c).sum(axis=1)],
                      axis=1) / (2.0 * area)[:, None]

    mids = 0.5 * (p[:, [1, 2, 0]] + p[:, [2, 0, 1]])  # (nt, 3, 2)
    g = triangle_exact_gradient(snapshot.z, mids.reshape(-1, 2), truncation)
    g = g.reshape(len(p), 3, 2)
    diff = g - grad_h[:, None, :]
    err2 = ((np.abs(diff) ** 2).sum(axis=2) * (area / 3.0)[:, None]).sum(axis=1)
    return float(np.sqrt(err2.sum()))
