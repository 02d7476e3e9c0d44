"""One-sided Jacobi SVD for small dense complex matrices.

The rational-approximation builders need the right singular vector of the
smallest singular value of short-and-wide or tall-and-skinny Loewner-type
matrices.  The one-sided Jacobi iteration computes all singular values to
high relative accuracy, which matters because the smallest one is often
many orders of magnitude below the largest.
"""

from __future__ import annotations

import numpy as np

__all__ = ["jacobi_svd", "min_right_singular_vector"]


def _sym_schur2(a: float, b: float, cc: complex):
    """Rotation diagonalizing the Hermitian 2x2 [[a, cc], [conj(cc), b]].

    Returns ``(c, s, phase)`` with ``c, s`` real and ``phase`` the unit
    complex factor absorbed into the rotation.
    """
    phase = cc / abs(cc)
    r = abs(cc)
    tau = (b - a) / (2.0 * r)
    if tau >= 0.0:
        t = 1.0 / (tau + np.hypot(1.0, tau))
    else:
        t = -1.0 / (-tau + np.hypot(1.0, tau))
    c = 1.0 / np.hypot(1.0, t)
    s = t * c
    return c, s, phase


def jacobi_svd(a, tol: float = 1e-12, max_sweeps: int = 60):
    """Singular value decomposition by one-sided Jacobi rotations.

    Parameters
    ----------
    a : (m, n) array_like
        Matrix to decompose.  Internally the problem is transposed when
        ``m < n`` so the working matrix is tall.
    tol : float
        Convergence threshold on ``|<a_i, a_j>| / (|a_i| |a_j|)``.

    Returns
    -------
    u : (m, n) ndarray
        Left singular vectors; columns with a zero singular value are zero.
    sigma : (n,) ndarray
        Singular values, descending.  For ``m < n`` at least ``n - m`` of
        them vanish and the matching rows of ``vh`` span the null space.
    vh : (n, n) ndarray
        Full unitary basis of right singular vectors (rows).
    """
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    n = a.shape[1]

    w = a.copy()
    v = np.eye(n, dtype=complex)
    scale = np.max(np.abs(w), initial=0.0)
    if scale == 0.0:
        return np.zeros_like(w), np.zeros(n), v
    w /= scale
    for _ in range(max_sweeps):
        rotated = False
        norms2 = np.einsum("ij,ij->j", w.conj(), w).real
        # columns this far below the largest cannot influence the result
        # and their pairwise products would underflow
        floor = norms2.max() * 1e-280
        for i in range(n - 1):
            for j in range(i + 1, n):
                if norms2[i] <= floor or norms2[j] <= floor:
                    continue
                cc = np.vdot(w[:, i], w[:, j])
                if abs(cc) <= tol * np.sqrt(norms2[i]) * np.sqrt(norms2[j]):
                    continue
                rotated = True
                c, s, phase = _sym_schur2(norms2[i], norms2[j], cc)
                wi = w[:, i].copy()
                w[:, i] = c * wi - s * np.conj(phase) * w[:, j]
                w[:, j] = s * wi + c * np.conj(phase) * w[:, j]
                vi = v[:, i].copy()
                v[:, i] = c * vi - s * np.conj(phase) * v[:, j]
                v[:, j] = s * vi + c * np.conj(phase) * v[:, j]
                norms2[i] = np.einsum("i,i->", w[:, i].conj(), w[:, i]).real
                norms2[j] = np.einsum("i,i->", w[:, j].conj(), w[:, j]).real
        if not rotated:
            break

    norms = np.sqrt(np.einsum("ij,ij->j", w.conj(), w).real)
    order = np.argsort(-norms, kind="stable")
    norms = norms[order]
    w = w[:, order]
    v = v[:, order]
    u = np.zeros_like(w)
    for j in range(n):
        if norms[j] > 0.0:
            u[:, j] = w[:, j] / norms[j]
    return u, scale * norms, v.conj().T


def min_right_singular_vector(a, tol: float = 1e-12) -> np.ndarray:
    """Unit right singular vector of the smallest singular value of ``a``.

    The returned vector's first entry of magnitude above ``1e-12`` is made
    real and positive, which fixes the free phase deterministically.
    """
    _, sigma, vh = jacobi_svd(a, tol=tol)
    q = vh[-1].conj()
    for entry in q:
        if abs(entry) > 1e-12:
            q = q * (np.conj(entry) / abs(entry))
            break
    return q / np.linalg.norm(q)
