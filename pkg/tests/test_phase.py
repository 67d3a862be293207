import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import corrupted_phase
from ghk.errors import DomainError, RankError, SampleLookupError
from ghk.phase import (PhaseSamples, RealPolynomial, affine_recover, multi_indices, mult_derivative,
                       poly_phase_recover, stencil_set, wrap)


def test_wrap():
    np.testing.assert_allclose(wrap([0.2, 0.7, -0.6, 1.5]), [0.2, -0.3, 0.4, -0.5])


def test_multi_indices():
    assert multi_indices(2, 2) == [(2, 0), (1, 1), (0, 2)]
    assert multi_indices(3, 0) == [(0, 0, 0)]


def test_polynomial_ops_and_json():
    p = RealPolynomial(2, 2, {(1, 1): 0.5, (0, 0): 1.25})
    q = RealPolynomial(2, 2, {(2, 0): -1.0})
    x = np.array([[1.0, 2.0], [0.5, -1.0]])
    np.testing.assert_allclose((p + q)(x), p(x) + q(x))
    np.testing.assert_allclose((p - q)(x), p(x) - q(x))
    assert p.canonical().coef((0, 0)) == 0.25
    r = RealPolynomial.from_json(p.to_json())
    assert r.coeffs == p.coeffs
    assert p.max_coef_diff(r.canonical()) == 0.0
    with pytest.raises(DomainError):
        RealPolynomial(1, 1, {(2,): 1.0})


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 4))
def test_multiplicative_derivative_annihilates(seed, k):
    rng = np.random.default_rng(seed)
    P = RealPolynomial.random(1, k - 1, rng)
    s = PhaseSamples.on_grid(P, [0.0], 1.0, 0.05)
    hs = [[0.05 * int(rng.integers(1, 4))] for _ in range(k)]
    x = [-0.5]
    assert abs(mult_derivative(s, x, hs) - 1) < 1e-9


def test_sample_lookup_miss():
    s = PhaseSamples.on_grid(lambda p: p[:, 0], [0.0], 1.0, 0.1)
    with pytest.raises(SampleLookupError):
        s.value_at([0.05])
    with pytest.raises(DomainError):
        PhaseSamples([[2.0]], [0.1], [0.0], 1.0)


def test_affine_recover_with_outliers():
    rng = np.random.default_rng(0)
    v, b = np.array([0.3, -1.2]), 0.4
    x = rng.uniform(-1, 1, (300, 2))
    y = rng.uniform(-1, 1, (300, 2))
    ax = x @ v + b
    by = y @ v + 0.1
    gxy = (x + y) @ v + b + 0.1
    bad = rng.random(300) < 0.1
    # gross outliers, well outside the 3 K tau refinement window
    ax[bad] += rng.choice([-1, 1], bad.sum()) * rng.uniform(1, 5, bad.sum())
    L = affine_recover(x, y, ax, by, gxy, tau=0.05)
    np.testing.assert_allclose(L.v, v, atol=1e-10)
    assert L.b == pytest.approx(b, abs=1e-10)
    assert 0.85 <= L.inlier_fraction <= 0.95


def test_affine_recover_rank():
    with pytest.raises(RankError):
        affine_recover(np.zeros((1, 2)), np.zeros((1, 2)), [0.0], [0.0], [0.0], 0.1)


def test_stencil_set():
    H = stencil_set(2, 2)
    assert len(H) == 5
    assert np.all(H >= 0) and np.all(H.sum(axis=1) >= 1) and np.all(H.sum(axis=1) <= 2)


@pytest.mark.parametrize("k,n", [(1, 1), (2, 1), (3, 1), (4, 1), (2, 2), (3, 2), (4, 2)])
def test_noiseless_recovery(k, n):
    for seed in range(3):
        P0 = RealPolynomial.random(n, k - 1, np.random.default_rng(seed))
        s = PhaseSamples.on_grid(P0, np.zeros(n), 1.0, 0.05 if n == 2 else 0.02)
        r = poly_phase_recover(s, k)
        assert r.poly.max_coef_diff(P0) <= 1e-8
        assert r.inlier_fraction == 1.0


def test_recovery_seed_reproducible():
    P0, s = corrupted_phase(3, 1, 4, 0.02)
    a = poly_phase_recover(s, 3, stride=5, seed=1)
    b = poly_phase_recover(s, 3, stride=5, seed=1)
    assert a.poly.coeffs == b.poly.coeffs


def test_save_load(tmp_path):
    P0, s = corrupted_phase(2, 2, 0, 0.1)
    s.save(tmp_path / "s.bin")
    t = PhaseSamples.load(tmp_path / "s.bin")
    np.testing.assert_array_equal(t.points, s.points)
    np.testing.assert_array_equal(t.values, s.values)
    (tmp_path / "bad.bin").write_bytes((tmp_path / "s.bin").read_bytes()[:-8])
    with pytest.raises(DomainError):
        PhaseSamples.load(tmp_path / "bad.bin")


def test_affine_recover_uniform_noise_corpus():
    rng = np.random.default_rng(1)
    v, b = np.array([0.7, -0.4]), 0.2
    m = 10_000
    x = rng.uniform(-0.5, 0.5, (m, 2))
    y = rng.uniform(-0.5, 0.5, (m, 2))
    ax, by, gxy = x @ v + b, y @ v, (x + y) @ v + b
    bad = rng.random(m) < 0.1
    ax[bad] = rng.uniform(-2, 2, bad.sum())
    L = affine_recover(x, y, ax, by, gxy, tau=1e-3)
    assert np.max(np.abs(L.v - v)) <= 1e-2


def test_affine_recover_zero():
    x = np.random.default_rng(0).uniform(-1, 1, (50, 1))
    z = np.zeros(50)
    L = affine_recover(x, x, z, z, z, tau=0.01)
    assert np.all(L.v == 0) and L.b == 0


def test_constant_phase():
    s = PhaseSamples.on_grid(lambda p: np.full(len(p), 0.37), [0.0], 1.0, 0.05)
    for k in (1, 2, 3):
        r = poly_phase_recover(s, k)
        assert r.poly.coef((0,)) == pytest.approx(0.37, abs=1e-12)
        assert all(abs(c) < 1e-10 for g, c in r.poly.coeffs.items() if sum(g) > 0)


def test_gauge_and_integer_invariance():
    rng = np.random.default_rng(8)
    psi = RealPolynomial.random(2, 2, rng)
    Q = RealPolynomial.random(2, 2, rng)
    s1 = PhaseSamples.on_grid(psi, np.zeros(2), 1.0, 0.05)
    s2 = PhaseSamples.on_grid(psi + Q, np.zeros(2), 1.0, 0.05)
    r1, r2 = poly_phase_recover(s1, 3), poly_phase_recover(s2, 3)
    assert (r2.poly - r1.poly).max_coef_diff(Q) <= 1e-8
    shifted = PhaseSamples(s1.points, s1.values + rng.integers(-5, 5, s1.values.size), s1.center, 1.0)
    r3 = poly_phase_recover(shifted, 3)
    assert r3.poly.max_coef_diff(r1.poly) <= 1e-12


def test_recovered_polynomial_annihilated_and_linear():
    rng = np.random.default_rng(2)
    P0 = RealPolynomial.random(1, 3, rng)
    s = PhaseSamples.on_grid(P0, [0.0], 1.0, 0.02)
    r = poly_phase_recover(s, 4)
    fitted = PhaseSamples.on_grid(r.poly, [0.0], 1.0, 0.02)
    for x in (-0.9, -0.3, 0.1):
        assert abs(mult_derivative(fitted, [x], [[0.02], [0.04], [0.06], [0.02]]) - 1) <= 1e-10
    # zero intercepts in the linear fits of the inductive step
    assert r.intercepts and max(abs(b) for b in r.intercepts) <= 1e-9
