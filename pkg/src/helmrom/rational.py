"""Barycentric rational surrogates for frequency-response maps.

A surrogate of type [N/N] is stored in barycentric form: support points
``zeta_0..zeta_N``, denominator weights ``q`` with unit Euclidean norm,
and numerator coefficients.  For a scalar target the numerator is a plain
vector ``p``; for a function-valued target it is a matrix ``P`` whose
column ``i`` expands the numerator coefficient ``p_i`` in the snapshot
basis, ``p_i = sum_j P[j, i] u(z_j)``.  Evaluation is

    ( sum_i p_i / (z - zeta_i) ) / ( sum_i q_i / (z - zeta_i) )

so wherever ``q_i != 0`` the value at ``zeta_i`` is ``p_i / q_i``.

Three builders are provided.  ``build_sri`` fits a scalar interpolant
through the first ``N + 1`` samples and picks ``q`` as the minimal right
singular vector of the Loewner matrix of the remaining samples.
``build_vsri`` does the same for snapshot-valued data, replacing the
scalar samples by the columns of an orthonormalized-snapshot factor ``R``
with ``G = R^H R``; the Loewner matrix is stacked over the rows of ``R``.
``build_vsri_general`` drops the requirement that the support points are
sample points: interpolation is enforced only where a support point
coincides with a sample, and the remaining numerator coefficients are
eliminated through the normal equations of the least-squares objective,
leaving a small dense minimization for ``q`` alone.  ``build_mri`` instead
minimizes the norm of the leading numerator coefficient over all
interpolants through every sample, which amounts to the minimal
eigenvector of the snapshot Gramian.

All builders are pure functions and deterministic: samples are handled in
ascending order of the real part and the first nonzero entry of ``q`` is
rotated to the positive real axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .svd import min_right_singular_vector
from .fem import apply_linear_functional

__all__ = [
    "TooFewSamplesError", "PoleEvaluationError",
    "BarycentricRational", "QuadraticSurrogate", "OrthonormalizedSnapshots",
    "min_right_singular_vector", "orthonormalize",
    "build_sri", "build_vsri", "build_vsri_general", "build_mri",
    "evaluate", "poles", "extract_functional_surrogate",
    "build_quadratic_surrogate", "evaluate_quadratic",
    "save_surrogate", "load_surrogate",
]

_NEAR_SUPPORT = 1e-13
_POLE_REL = 1e-14


class TooFewSamplesError(ValueError):
    """Fewer samples than the degree requires (S < 2N + 1)."""


class PoleEvaluationError(ArithmeticError):
    """Evaluation requested at (numerically) a pole of the surrogate."""


@dataclass(frozen=True)
class BarycentricRational:
    """Rational surrogate in barycentric form.

    ``coeffs`` is the numerator: a vector of length ``N + 1`` for scalar
    surrogates, else an ``S x (N + 1)`` matrix over the snapshot basis.
    ``snapshots`` keeps handles to the snapshots backing the columns (empty
    for scalar surrogates or when the surrogate was built from a Gramian
    alone); ``sample_points`` records the sample locations in the same
    row order as ``coeffs``.
    """

    supports: np.ndarray
    weights: np.ndarray
    coeffs: np.ndarray
    snapshots: tuple = ()
    sample_points: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "supports",
                           np.asarray(self.supports, dtype=complex))
        object.__setattr__(self, "weights",
                           np.asarray(self.weights, dtype=complex))
        object.__setattr__(self, "coeffs",
                           np.asarray(self.coeffs, dtype=complex))
        if self.sample_points is not None:
            object.__setattr__(self, "sample_points",
                               np.asarray(self.sample_points, dtype=complex))
        n1 = len(self.supports)
        if self.weights.shape != (n1,):
            raise ValueError("weights and supports disagree in length")
        if self.coeffs.shape[-1] != n1:
            raise ValueError("numerator has wrong number of columns")
        nrm = np.linalg.norm(self.weights)
        if abs(nrm - 1.0) > 1e-13:
            raise ValueError("denominator weights must have unit norm")
        if len(np.unique(self.supports)) != n1:
            raise ValueError("support points must be pairwise distinct")

    @property
    def degree(self) -> int:
        return len(self.supports) - 1

    @property
    def is_scalar(self) -> bool:
        return self.coeffs.ndim == 1

    def __call__(self, z, basis=None):
        return evaluate(self, z, basis)


@dataclass(frozen=True)
class QuadraticSurrogate:
    """Surrogate for the squared norm of a function-valued surrogate.

    Stores the numerator matrix, weights and supports of the underlying
    surrogate together with the Gram matrix of the snapshots in the norm
    being squared; ``evaluate_quadratic`` combines them without ever
    reconstructing the snapshots.
    """

    supports: np.ndarray
    weights: np.ndarray
    coeffs: np.ndarray
    gramian: np.ndarray

    def __post_init__(self):
        for name in ("supports", "weights", "coeffs", "gramian"):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=complex))

    def __call__(self, z) -> float:
        return evaluate_quadratic(self, z)


@dataclass(frozen=True)
class OrthonormalizedSnapshots:
    """Trapezoidal factor ``R`` with ``G = R^H R`` and the pivot order.

    ``r_factor`` has shape ``rank x S`` with columns in the original
    snapshot order; ``r_factor[:, pivots]`` is upper trapezoidal.
    """

    r_factor: np.ndarray
    rank: int
    pivots: np.ndarray


def _ascending(z: np.ndarray) -> np.ndarray:
    """Deterministic sample order: by real part, ties by imaginary part."""
    return np.lexsort((z.imag, z.real))


def _fix_phase(q: np.ndarray, *mats):
    """Rotate the first nonzero weight onto the positive real axis."""
    idx = np.nonzero(np.abs(q) > 1e-12)[0]
    if len(idx):
        ph = q[idx[0]] / abs(q[idx[0]])
        q = q * np.conj(ph)
        mats = tuple(m * np.conj(ph) for m in mats)
    return (q, *mats)


def orthonormalize(gramian, tol: float = 1e-12) -> OrthonormalizedSnapshots:
    """Pivoted Cholesky factorization ``G = R^H R`` of a Gram matrix.

    Pivots are chosen greedily by largest remaining diagonal; the
    factorization stops once the best pivot falls below ``tol`` times the
    largest initial diagonal, which makes the number of accepted pivots a
    numerical rank.  A remaining diagonal more negative than
    ``1e-10 * trace`` is rejected as not positive semidefinite.
    """
    g = np.asarray(gramian, dtype=complex)
    s = g.shape[0]
    if g.shape != (s, s):
        raise ValueError("gramian must be square")
    d = g.diagonal().real.copy()
    scale = max(d.max(initial=0.0), 0.0)
    floor = -1e-10 * max(np.abs(d).sum(), 1.0e-300)
    rows = np.zeros((s, s), dtype=complex)
    pivots = np.empty(s, dtype=np.int64)
    rank = 0
    for t in range(s):
        k = int(np.argmax(d))
        if d[k] <= tol * scale:
            if d.min() < floor:
                raise ValueError("gramian is not positive semidefinite")
            break
        pivots[rank] = k
        row = g[k, :] - rows[:rank, k].conj() @ rows[:rank, :]
        row /= np.sqrt(d[k])
        rows[rank] = row
        d -= np.abs(row) ** 2
        d[k] = 0.0  # residual at a consumed pivot is exactly zero
        rank += 1
    return OrthonormalizedSnapshots(rows[:rank].copy(), rank,
                                    pivots[:rank].copy())


def _loewner(z: np.ndarray, r: np.ndarray, n: int) -> np.ndarray:
    """Stacked Loewner matrix of the non-support samples.

    ``r`` is the (rows x S) data matrix (a single row of scalar samples or
    the orthonormalized-snapshot factor); supports are the first ``n + 1``
    columns.  Row block ``j`` holds ``(r[:, j] - r[:, i]) / (z_j - z_i)``.
    """
    rest = r[:, n + 1:][:, :, None] - r[:, :n + 1][:, None, :]
    dz = z[n + 1:, None] - z[None, :n + 1]
    return (rest / dz[None, :, :]).transpose(1, 0, 2).reshape(-1, n + 1)


def _check_sample_count(s: int, n: int) -> None:
    if n < 0:
        raise ValueError("degree must be nonnegative")
    if s < 2 * n + 1:
        raise TooFewSamplesError(
            "need at least 2N + 1 = %d samples, got %d" % (2 * n + 1, s))


def build_sri(samples, n: int) -> BarycentricRational:
    """Scalar rational interpolant through the first ``n + 1`` samples.

    ``samples`` is a sequence of ``(z_j, y_j)`` pairs.  The samples are
    sorted ascending; the leading ``n + 1`` become support points and the
    weights minimize the Loewner least-squares residual of the rest.
    """
    pairs = list(samples)
    z = np.asarray([p[0] for p in pairs], dtype=complex)
    y = np.asarray([p[1] for p in pairs], dtype=complex)
    _check_sample_count(len(z), n)
    order = _ascending(z)
    z, y = z[order], y[order]
    if len(np.unique(z)) != len(z):
        raise ValueError("sample points must be pairwise distinct")
    q = min_right_singular_vector(_loewner(z, y[None, :], n))
    return BarycentricRational(z[:n + 1], q, q * y[:n + 1],
                               sample_points=z)


def build_vsri(snapshots, gramian, n: int) -> BarycentricRational:
    """Snapshot-valued rational interpolant (vectorized Loewner fit).

    The scalar samples of :func:`build_sri` are replaced by the columns of
    the factor ``R`` of the snapshot Gramian, stacking one Loewner block
    per row of ``R``; the numerator keeps the interpolation form
    ``p_i = q_i u(zeta_i)``.
    """
    snapshots = list(snapshots)
    z = np.asarray([s.z for s in snapshots], dtype=complex)
    _check_sample_count(len(z), n)
    order = _ascending(z)
    z = z[order]
    snapshots = [snapshots[i] for i in order]
    g = np.asarray(gramian, dtype=complex)[np.ix_(order, order)]
    ortho = orthonormalize(g)
    if ortho.rank == 0:
        raise ValueError("snapshot gramian has rank zero")
    q = min_right_singular_vector(_loewner(z, ortho.r_factor, n))
    p = np.zeros((len(z), n + 1), dtype=complex)
    p[np.arange(n + 1), np.arange(n + 1)] = q
    return BarycentricRational(z[:n + 1], q, p, snapshots=tuple(snapshots),
                               sample_points=z)


def build_vsri_general(sample_points, supports, n: int,
                       gramian) -> BarycentricRational:
    """Snapshot-valued rational fit with arbitrary support points.

    Support points that coincide exactly with a sample point keep the
    interpolation constraint ``p_i = q_i u(zeta_i)``; all other numerator
    columns are eliminated through the normal equations, so the returned
    numerator matrix is affine in ``q`` and the weights again come from a
    minimal right singular vector.  Row order of the numerator follows
    ``sample_points``, column order follows ``supports``.
    """
    z = np.asarray(sample_points, dtype=complex)
    zeta = np.asarray(supports, dtype=complex)
    if len(zeta) != n + 1:
        raise ValueError("expected n + 1 support points")
    if len(np.unique(zeta)) != len(zeta):
        raise ValueError("support points must be pairwise distinct")
    if len(np.unique(z)) != len(z):
        raise ValueError("sample points must be pairwise distinct")
    _check_sample_count(len(z), n)
    s_count = len(z)

    # canonical order: matched support/sample pairs first
    match_i, match_j = [], []
    for i, zi in enumerate(zeta):
        hit = np.nonzero(z == zi)[0]
        if len(hit):
            match_i.append(i)
            match_j.append(int(hit[0]))
    s = len(match_i)
    taken_i, taken_j = set(match_i), set(match_j)
    perm_i = np.array(match_i + [i for i in range(n + 1)
                                 if i not in taken_i], dtype=np.int64)
    perm_j = np.array(match_j + [j for j in range(s_count)
                                 if j not in taken_j], dtype=np.int64)
    zs = z[perm_j]
    zt = zeta[perm_i]

    g = np.asarray(gramian, dtype=complex)[np.ix_(perm_j, perm_j)]
    ortho = orthonormalize(g)
    if ortho.rank == 0:
        raise ValueError("snapshot gramian has rank zero")
    r = ortho.r_factor

    c = 1.0 / (zs[s:, None] - zt[None, :])  # (S - s) x (n + 1) Cauchy
    h = np.zeros((n + 1, s_count, n + 1), dtype=complex)
    for i in range(s):
        h[i, i, i] = 1.0
    if s <= n:
        chc = c.conj().T @ c
        try:
            d = np.linalg.inv(chc[s:, s:])
        except np.linalg.LinAlgError:
            raise ValueError("free support points too close to the samples")
        # normal-equation rows, one block per numerator row
        a = np.zeros((s_count, n + 1 - s, n + 1), dtype=complex)
        for jp in range(s):
            a[jp, :, jp] = -chc[s:, jp]
        a[s:] = np.einsum("jr,jc->jrc", c[:, s:].conj(), c)
        h[s:] = np.einsum("dr,jrc->djc", d, a)

    rh = np.einsum("tj,ijc->itc", r, h)
    blocks = np.einsum("tj,jc->jtc", r[:, s:], c) \
        - np.einsum("jk,ktc->jtc", c, rh)
    q = min_right_singular_vector(blocks.reshape(-1, n + 1))
    p = np.einsum("ijc,c->ji", h, q)

    # undo the canonical reordering, then re-fix the phase
    q_out = np.empty(n + 1, dtype=complex)
    q_out[perm_i] = q
    p_out = np.empty((s_count, n + 1), dtype=complex)
    p_out[np.ix_(perm_j, perm_i)] = p
    q_out, p_out = _fix_phase(q_out, p_out)
    return BarycentricRational(zeta, q_out, p_out, sample_points=z)


def build_mri(snapshots, gramian) -> BarycentricRational:
    """Minimal rational interpolant through every sample.

    All sample points act as support points and the weights are the
    minimal eigenvector of the snapshot Gramian, i.e. the coefficient
    combination of smallest norm; the numerator interpolates,
    ``p_i = q_i u(zeta_i)``.
    """
    snapshots = list(snapshots)
    if not snapshots:
        raise ValueError("need at least one snapshot")
    z = np.asarray([s.z for s in snapshots], dtype=complex)
    order = _ascending(z)
    z = z[order]
    snapshots = [snapshots[i] for i in order]
    g = np.asarray(gramian, dtype=complex)[np.ix_(order, order)]
    q = min_right_singular_vector(g)
    return BarycentricRational(z, q, np.diag(q), snapshots=tuple(snapshots),
                               sample_points=z)


def _barycentric_terms(r, z: complex):
    """Cauchy weights at ``z`` or the interpolation column at a support.

    Returns ``(c, i)``: away from the supports ``c`` holds
    ``1 / (z - zeta)`` and ``i`` is ``None``; within the near-support
    tolerance ``c`` is ``None`` and ``i`` the support index.
    """
    d = np.asarray(z, dtype=complex) - r.supports
    near = np.abs(d) < _NEAR_SUPPORT * (1.0 + np.abs(r.supports))
    if near.any():
        return None, int(np.argmin(np.abs(d)))
    return 1.0 / d, None


def evaluate(r: BarycentricRational, z, basis=None):
    """Value of a surrogate at ``z``.

    Scalar surrogates return a complex number.  Snapshot-valued surrogates
    return the coefficient vector over the snapshot basis, or, when
    ``basis`` holds per-snapshot rows of values on a common grid, the
    combined values on that grid.  At a support point the interpolated
    value ``p_i / q_i`` is returned exactly; hitting a pole raises
    :class:`PoleEvaluationError`.
    """
    if r.is_scalar and basis is not None:
        raise ValueError("scalar surrogate has no snapshot basis")
    c, i = _barycentric_terms(r, z)
    if i is not None:
        if r.weights[i] == 0.0:
            raise PoleEvaluationError("support point %s carries zero weight"
                                      % r.supports[i])
        val = r.coeffs[..., i] / r.weights[i]
    else:
        den = r.weights @ c
        if abs(den) <= _POLE_REL * np.abs(r.weights * c).sum():
            raise PoleEvaluationError("denominator vanishes at z = %s" % z)
        val = (r.coeffs @ c) / den
    if basis is not None:
        return val @ np.asarray(basis)
    return val if val.ndim else complex(val)


def poles(r: BarycentricRational) -> np.ndarray:
    """Finite roots of the denominator, via an arrowhead pencil.

    The barycentric denominator ``pi(z) sum_i q_i / (z - zeta_i)`` is the
    determinant (up to a constant) of an arrowhead pencil of size
    ``N + 2``; two of its generalized eigenvalues are always infinite and
    are discarded, so at most ``N`` poles are reported.
    """
    n1 = len(r.supports)
    a = np.zeros((n1 + 1, n1 + 1), dtype=complex)
    a[0, 1:] = r.weights
    a[1:, 0] = 1.0
    a[np.arange(1, n1 + 1), np.arange(1, n1 + 1)] = r.supports
    b = np.eye(n1 + 1, dtype=complex)
    b[0, 0] = 0.0
    alpha, beta = sla.eig(a, b, right=False, homogeneous_eigvals=True)
    keep = np.abs(beta) > 1e-13
    vals = alpha[keep] / beta[keep]
    return vals[np.lexsort((vals.imag, vals.real))]


def extract_functional_surrogate(r: BarycentricRational,
                                 functional) -> BarycentricRational:
    """Scalar surrogate of a linear functional of a snapshot surrogate.

    Applies the functional to every snapshot and contracts the numerator
    matrix with the resulting samples; supports and weights are unchanged,
    so the extraction commutes with evaluation.
    """
    if r.is_scalar:
        raise ValueError("surrogate is already scalar")
    if not r.snapshots:
        raise ValueError("surrogate carries no snapshot handles")
    y = np.asarray([apply_linear_functional(s, functional)
                    for s in r.snapshots], dtype=complex)
    return BarycentricRational(r.supports, r.weights, r.coeffs.T @ y,
                               sample_points=r.sample_points)


def build_quadratic_surrogate(r: BarycentricRational,
                              qoi_gramian) -> QuadraticSurrogate:
    """Surrogate of the squared norm of ``r`` in the Gramian's norm."""
    if r.is_scalar:
        raise ValueError("quadratic outputs need a snapshot-valued surrogate")
    g = np.asarray(qoi_gramian, dtype=complex)
    if g.shape != (r.coeffs.shape[0],) * 2:
        raise ValueError("gramian size does not match the snapshot count")
    return QuadraticSurrogate(r.supports, r.weights, r.coeffs, g)


def evaluate_quadratic(qs: QuadraticSurrogate, z) -> float:
    """Nonnegative value of a quadratic-output surrogate at ``z``.

    Sesquilinearity turns the squared norm of the evaluated surrogate into
    a Gramian quadratic form in the snapshot coefficients; tiny negative
    roundoff is clamped to zero.
    """
    c, i = _barycentric_terms(qs, z)
    if i is not None:
        if qs.weights[i] == 0.0:
            raise PoleEvaluationError("support point %s carries zero weight"
                                      % qs.supports[i])
        w = qs.coeffs[:, i] / qs.weights[i]
        return max(float((w.conj() @ qs.gramian @ w).real), 0.0)
    den = qs.weights @ c
    if abs(den) <= _POLE_REL * np.abs(qs.weights * c).sum():
        raise PoleEvaluationError("denominator vanishes at z = %s" % z)
    w = qs.coeffs @ c
    num = float((w.conj() @ qs.gramian @ w).real)
    return max(num, 0.0) / abs(den) ** 2


def _c_pack(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=complex)
    return {"shape": list(a.shape), "re": a.real.ravel().tolist(),
            "im": a.imag.ravel().tolist()}


def _c_unpack(doc) -> np.ndarray:
    a = np.asarray(doc["re"], dtype=float) \
        + 1j * np.asarray(doc["im"], dtype=float)
    return a.reshape(doc["shape"])


def save_surrogate(path, surrogate, inner_product=None) -> None:
    """Write a surrogate as JSON.

    Together with the trace-common-grid values of its snapshots the file
    allows offline evaluation without any mesh machinery; the optional
    ``inner_product`` spec is stored verbatim for provenance.
    """
    if isinstance(surrogate, QuadraticSurrogate):
        doc = {"kind": "quadratic", "gramian": _c_pack(surrogate.gramian)}
    elif surrogate.is_scalar:
        doc = {"kind": "scalar"}
    else:
        doc = {"kind": "snapshot"}
    doc["format"] = "helmrom-surrogate-1"
    doc["supports"] = _c_pack(surrogate.supports)
    doc["weights"] = _c_pack(surrogate.weights)
    doc["coeffs"] = _c_pack(surrogate.coeffs)
    sp = getattr(surrogate, "sample_points", None)
    if sp is not None:
        doc["sample_points"] = _c_pack(sp)
    if inner_product is not None:
        curve = inner_product.curve
        doc["inner_product"] = {
            "kind": inner_product.kind,
            "curve": None if curve is None else list(curve.segments)}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_surrogate(path):
    """Read a surrogate written by :func:`save_surrogate`."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "helmrom-surrogate-1":
        raise ValueError("not a surrogate file")
    supports = _c_unpack(doc["supports"])
    weights = _c_unpack(doc["weights"])
    coeffs = _c_unpack(doc["coeffs"])
    if doc["kind"] == "quadratic":
        return QuadraticSurrogate(supports, weights, coeffs,
                                  _c_unpack(doc["gramian"]))
    sp = _c_unpack(doc["sample_points"]) if "sample_points" in doc else None
    return BarycentricRational(supports, weights, coeffs, sample_points=sp)
