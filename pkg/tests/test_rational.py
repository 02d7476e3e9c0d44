"""Barycentric rational surrogates: builders, poles, evaluation, algebra."""

from types import SimpleNamespace

import numpy as np
import pytest

import oracles
from helmrom.rational import (BarycentricRational, PoleEvaluationError,
                              QuadraticSurrogate, TooFewSamplesError,
                              build_mri, build_quadratic_surrogate, build_sri,
                              build_vsri, build_vsri_general, evaluate,
                              evaluate_quadratic, extract_functional_surrogate,
                              load_surrogate, orthonormalize, poles,
                              save_surrogate)


def rational_of_type(rng, n, width=10.0):
    """Random scalar rational of exact type [n / n] in pole-residue form."""
    p = rng.uniform(0.0, width, n) + 1j * rng.uniform(0.3, 1.0, n)
    res = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    off = complex(rng.standard_normal() + 1j * rng.standard_normal())
    return (lambda z: off + sum(r / (z - pk) for r, pk in zip(res, p))), p


def vector_rational(rng, n, dim, width=10.0):
    """Vector-valued rational with n simple poles and random residues."""
    p = rng.uniform(0.0, width, n) + 1j * rng.uniform(0.3, 1.0, n)
    res = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))

    def f(z):
        return sum(r / (z - pk) for r, pk in zip(res, p))

    return f, p


def euclidean_snapshots(zs, f):
    """Fake snapshot handles plus the Gramian of Euclidean vectors."""
    y = np.stack([f(z) for z in zs])                    # (S, dim)
    snaps = [SimpleNamespace(z=complex(z)) for z in zs]
    # G[i, j] = <u_j, u_i> = u_i^H u_j
    return snaps, y, y.conj() @ y.T


# ---------------------------------------------------------------------------
# invariants of the barycentric container


def test_container_validation():
    sup = np.array([0.0, 1.0], dtype=complex)
    q = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
    r = BarycentricRational(sup, q, q * np.array([2.0, 3.0]))
    assert r.degree == 1 and r.is_scalar
    with pytest.raises(ValueError):
        BarycentricRational(sup, np.array([1.0, 1.0]), q)  # not unit norm
    with pytest.raises(ValueError):
        BarycentricRational(np.array([1.0, 1.0]), q, q)  # repeated supports
    with pytest.raises(ValueError):
        BarycentricRational(sup, q, np.ones(3))  # shape mismatch


def test_value_at_support_is_ratio():
    sup = np.array([0.0, 2.0], dtype=complex)
    q = np.array([0.6, 0.8], dtype=complex)
    r = BarycentricRational(sup, q, q * np.array([5.0, -1.0]))
    assert r(0.0) == pytest.approx(5.0)
    assert r(2.0) == pytest.approx(-1.0)
    # nearby values approach the support value continuously
    assert r(2.0 + 1e-9) == pytest.approx(-1.0, rel=1e-6)


def test_pole_evaluation_raises():
    # equal weights on supports {0, 2}: denominator 1/z + 1/(z-2) = 0 at z = 1
    sup = np.array([0.0, 2.0], dtype=complex)
    q = np.array([1.0, 1.0]) / np.sqrt(2.0)
    r = BarycentricRational(sup, q, q * np.array([1.0, -1.0]))
    with pytest.raises(PoleEvaluationError):
        r(1.0)
    assert np.isfinite(r(1.0 + 1e-5))


# ---------------------------------------------------------------------------
# scalar rational interpolation


def test_sri_recovers_exact_rationals():
    rng = np.random.default_rng(100)
    for n in range(1, 7):
        f, true_poles = rational_of_type(rng, n)
        zs = np.linspace(0.0, 10.0, 2 * n + 1)
        r = build_sri([(z, f(z)) for z in zs], n)
        zt = rng.uniform(0.2, 9.8, 50)
        vals = np.array([r(z) for z in zt])
        ref = np.array([f(z) for z in zt])
        assert np.abs((vals - ref) / ref).max() < 1e-9
        got = poles(r)
        for p in true_poles:
            assert np.abs(got - p).min() < 1e-7


def test_sri_interpolates_supports_even_with_noise():
    rng = np.random.default_rng(101)
    zs = np.linspace(0.0, 5.0, 11)
    ys = rng.standard_normal(11) + 1j * rng.standard_normal(11)
    r = build_sri(list(zip(zs, ys)), 5)
    assert (r.sample_points == np.sort(zs)).all()
    for z, y in zip(zs[:6], ys[:6]):
        assert r(z) == pytest.approx(y, rel=1e-12)


def test_sri_weights_minimize_loewner_residual():
    rng = np.random.default_rng(102)
    n, s = 4, 13
    zs = np.sort(rng.uniform(0.0, 10.0, s))
    ys = rng.standard_normal(s) + 1j * rng.standard_normal(s)
    r = build_sri(list(zip(zs, ys)), n)
    # independent Loewner matrix
    L = np.array([[(ys[j] - ys[i]) / (zs[j] - zs[i]) for i in range(n + 1)]
                  for j in range(n + 1, s)])
    best = np.linalg.norm(L @ r.weights)
    for _ in range(50):
        dq = r.weights + 1e-3 * (rng.standard_normal(n + 1)
                                 + 1j * rng.standard_normal(n + 1))
        dq /= np.linalg.norm(dq)
        assert np.linalg.norm(L @ dq) >= best - 1e-12
    # and the true optimum is the smallest singular value
    assert best == pytest.approx(np.linalg.svd(L, compute_uv=False)[-1],
                                 abs=1e-12)


def test_sri_sample_count_guard():
    zs = np.linspace(0.0, 1.0, 6)
    samples = [(z, 1.0) for z in zs]
    with pytest.raises(TooFewSamplesError):
        build_sri(samples, 3)  # needs 2*3+1 = 7
    with pytest.raises(ValueError):
        build_sri([(0.0, 1.0)] * 7, 3)  # repeated sample points


def test_sri_constant_target():
    zs = np.linspace(1.0, 2.0, 5)
    r = build_sri([(z, 3.0 + 4.0j) for z in zs], 2)
    assert r(1.37) == pytest.approx(3.0 + 4.0j, rel=1e-12)
    assert len(poles(r)) <= 2


# ---------------------------------------------------------------------------
# Gramian orthonormalization


def test_orthonormalize_factor_reproduces_gramian():
    rng = np.random.default_rng(103)
    y = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
    g = y.conj().T @ y
    ortho = orthonormalize(g)
    assert ortho.rank == 4
    r = ortho.r_factor
    assert np.allclose(r.conj().T @ r, g, atol=1e-12 * np.abs(g).max())


def test_orthonormalize_detects_rank():
    rng = np.random.default_rng(104)
    y = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
    y = np.concatenate([y, y[:, :2]], axis=1)  # two repeated snapshots
    g = y.conj().T @ y
    ortho = orthonormalize(g)
    assert ortho.rank == 3
    r = ortho.r_factor
    assert np.allclose(r.conj().T @ r, g, atol=1e-11 * np.abs(g).max())
    with pytest.raises(ValueError):
        orthonormalize(-np.eye(3))  # not positive semidefinite


# ---------------------------------------------------------------------------
# snapshot-valued builders on synthetic data


def test_vsri_recovers_vector_rational_poles():
    rng = np.random.default_rng(105)
    n = 4
    f, true_poles = vector_rational(rng, n, dim=7)
    zs = np.linspace(0.0, 10.0, 2 * n + 1)
    snaps, y, g = euclidean_snapshots(zs, f)
    r = build_vsri(snaps, g, n)
    assert not r.is_scalar
    got = poles(r)
    for p in true_poles:
        assert np.abs(got - p).min() < 1e-8
    # evaluation in the snapshot basis reproduces the function off-sample
    for z in rng.uniform(0.5, 9.5, 10):
        val = evaluate(r, z, basis=y)
        ref = f(z)
        assert np.linalg.norm(val - ref) < 1e-8 * np.linalg.norm(ref)


def test_mri_recovers_orthonormal_residue_targets():
    rng = np.random.default_rng(106)
    for n in (2, 4, 7):
        dim = n + 3
        basis_q, _ = np.linalg.qr(rng.standard_normal((dim, n))
                                  + 1j * rng.standard_normal((dim, n)))
        # well-separated poles: clustered ones degrade the small-eigenvalue
        # gap of the Gramian and with it the recovery accuracy
        p = np.linspace(0.5, 9.5, n) + 1j * rng.uniform(0.3, 1.0, n)

        def f(z):
            return basis_q @ (1.0 / (z - p))

        zs = np.linspace(0.0, 10.0, n + 1)
        snaps, y, g = euclidean_snapshots(zs, f)
        r = build_mri(snaps, g)
        assert r.degree == n
        got = poles(r)
        for pk in p:
            assert np.abs(got - pk).min() < 1e-8
        for z in rng.uniform(0.5, 9.5, 10):
            val = evaluate(r, z, basis=y)
            ref = f(z)
            assert np.linalg.norm(val - ref) < 1e-8 * np.linalg.norm(ref)


def test_mri_interpolates_every_sample():
    rng = np.random.default_rng(107)
    zs = np.linspace(0.0, 3.0, 6)
    # dim > S so the Gramian is definite and the weight vector has no zeros
    y = rng.standard_normal((6, 8)) + 1j * rng.standard_normal((6, 8))
    snaps = [SimpleNamespace(z=complex(z)) for z in zs]
    r = build_mri(snaps, y.conj() @ y.T)
    for j, z in enumerate(zs):
        val = evaluate(r, z, basis=y)
        assert np.allclose(val, y[j], atol=1e-10 * np.abs(y).max())


def test_vsri_general_matches_collocation_when_supports_are_samples():
    rng = np.random.default_rng(108)
    n = 3
    f, _ = vector_rational(rng, n, dim=6)
    zs = np.linspace(0.0, 10.0, 2 * n + 1)
    snaps, y, g = euclidean_snapshots(zs, f)
    coll = build_vsri(snaps, g, n)
    gen = build_vsri_general(zs, zs[:n + 1], n, g)
    assert abs(np.vdot(gen.weights, coll.weights)) >= 1.0 - 1e-10
    assert np.abs(gen.coeffs - coll.coeffs).max() < 1e-10


def test_vsri_general_with_free_supports():
    rng = np.random.default_rng(109)
    n = 3
    f, true_poles = vector_rational(rng, n, dim=8)
    zs = np.linspace(0.0, 10.0, 9)
    snaps, y, g = euclidean_snapshots(zs, f)
    # supports strictly between the samples: no interpolation constraints
    sup = np.array([0.7, 3.3, 6.1, 9.4], dtype=complex)
    r = build_vsri_general(zs, sup, n, g)
    got = poles(r)
    for p in true_poles:
        assert np.abs(got - p).min() < 1e-7
    # mixed: two supports match samples exactly
    sup = np.array([zs[0], zs[4], 2.2, 7.7], dtype=complex)
    r = build_vsri_general(zs, sup, n, g)
    got = poles(r)
    for p in true_poles:
        assert np.abs(got - p).min() < 1e-7


def test_vsri_general_validation():
    zs = np.linspace(0.0, 1.0, 7)
    g = np.eye(7, dtype=complex)
    with pytest.raises(ValueError):
        build_vsri_general(zs, np.array([0.1, 0.1, 0.2, 0.3]), 3, g)
    with pytest.raises(TooFewSamplesError):
        build_vsri_general(zs[:6], zs[:4], 3, np.eye(6, dtype=complex))


# ---------------------------------------------------------------------------
# pole computation details


def test_poles_of_known_barycentric():
    # antisymmetric weights on {0, 2}: the denominator's node polynomial
    # (q0 + q1) z - (q0*2 + q1*0) is the constant -2/sqrt(2) -- no finite pole
    sup = np.array([0.0, 2.0], dtype=complex)
    q = np.array([1.0, -1.0]) / np.sqrt(2.0)
    r = BarycentricRational(sup, q, q * np.array([1.0, 1.0]))
    assert len(poles(r)) == 0
    # equal weights: node polynomial 2z - 2, single pole at z = 1
    q2 = np.array([1.0, 1.0]) / np.sqrt(2.0)
    r2 = BarycentricRational(sup, q2, q2)
    assert poles(r2) == pytest.approx([1.0])


def test_poles_sorted_by_real_then_imag():
    rng = np.random.default_rng(110)
    f, true_poles = rational_of_type(rng, 5)
    zs = np.linspace(0.0, 10.0, 11)
    r = build_sri([(z, f(z)) for z in zs], 5)
    got = poles(r)
    key = np.lexsort((got.imag, got.real))
    assert (key == np.arange(len(got))).all()


# ---------------------------------------------------------------------------
# functional extraction and quadratic outputs


def test_extraction_commutes_with_evaluation():
    rng = np.random.default_rng(111)
    n = 3
    f, _ = vector_rational(rng, n, dim=5)
    zs = np.linspace(0.0, 10.0, 2 * n + 1)
    snaps, y, g = euclidean_snapshots(zs, f)
    r = build_vsri(snaps, g, n)
    # a linear functional of Euclidean snapshots: weight vector w
    w = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    ys = y @ w
    scalar = BarycentricRational(r.supports, r.weights, r.coeffs.T @ ys,
                                 sample_points=r.sample_points)
    for z in rng.uniform(0.5, 9.5, 8):
        direct = evaluate(r, z, basis=y) @ w
        assert scalar(z) == pytest.approx(direct, rel=1e-12)


def test_extract_functional_surrogate_requires_snapshots():
    sup = np.array([0.0, 1.0], dtype=complex)
    q = np.array([1.0, 1.0]) / np.sqrt(2.0)
    scalar = BarycentricRational(sup, q, q)
    with pytest.raises(ValueError):
        extract_functional_surrogate(scalar, None)
    vector = BarycentricRational(sup, q, np.eye(2, dtype=complex))
    with pytest.raises(ValueError):
        extract_functional_surrogate(vector, None)


def test_quadratic_surrogate_identity():
    # the Gramian quadratic form equals the squared norm of the combined
    # snapshot vector, for any coefficients
    rng = np.random.default_rng(112)
    n = 3
    f, _ = vector_rational(rng, n, dim=6)
    zs = np.linspace(0.0, 10.0, 2 * n + 1)
    snaps, y, g = euclidean_snapshots(zs, f)
    r = build_vsri(snaps, g, n)
    qs = build_quadratic_surrogate(r, g)
    for z in rng.uniform(0.5, 9.5, 10):
        got = evaluate_quadratic(qs, z)
        direct = np.linalg.norm(evaluate(r, z, basis=y)) ** 2
        assert got == pytest.approx(direct, rel=1e-10)
    # at a support point as well
    got = evaluate_quadratic(qs, zs[1])
    assert got == pytest.approx(np.linalg.norm(f(zs[1])) ** 2, rel=1e-8)


def test_quadratic_surrogate_validation_and_clamp():
    sup = np.array([0.0, 1.0], dtype=complex)
    q = np.array([1.0, 1.0]) / np.sqrt(2.0)
    vector = BarycentricRational(sup, q, np.eye(2, dtype=complex))
    with pytest.raises(ValueError):
        build_quadratic_surrogate(vector, np.eye(3))
    scalar = BarycentricRational(sup, q, q)
    with pytest.raises(ValueError):
        build_quadratic_surrogate(scalar, np.eye(2))
    qs = build_quadratic_surrogate(vector, np.zeros((2, 2)))
    assert evaluate_quadratic(qs, 0.25) == 0.0  # z = 0.5 would be the pole


# ---------------------------------------------------------------------------
# serialization


def test_scalar_surrogate_roundtrip(tmp_path):
    rng = np.random.default_rng(113)
    f, _ = rational_of_type(rng, 3)
    zs = np.linspace(0.0, 10.0, 7)
    r = build_sri([(z, f(z)) for z in zs], 3)
    path = tmp_path / "scalar.json"
    save_surrogate(path, r)
    back = load_surrogate(path)
    assert isinstance(back, BarycentricRational)
    assert (back.supports == r.supports).all()
    assert (back.weights == r.weights).all()
    assert (back.coeffs == r.coeffs).all()
    assert (back.sample_points == r.sample_points).all()


def test_quadratic_surrogate_roundtrip(tmp_path):
    rng = np.random.default_rng(114)
    n = 2
    f, _ = vector_rational(rng, n, dim=4)
    zs = np.linspace(0.0, 10.0, 2 * n + 1)
    snaps, y, g = euclidean_snapshots(zs, f)
    qs = build_quadratic_surrogate(build_vsri(snaps, g, n), g)
    path = tmp_path / "quad.json"
    save_surrogate(path, qs)
    back = load_surrogate(path)
    assert isinstance(back, QuadraticSurrogate)
    assert (back.gramian == qs.gramian).all()
    for z in (0.3, 4.4, 8.8):
        assert evaluate_quadratic(back, z) == evaluate_quadratic(qs, z)


def test_load_rejects_unknown_payload(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format": "something-else"}')
    with pytest.raises(ValueError):
        load_surrogate(path)
