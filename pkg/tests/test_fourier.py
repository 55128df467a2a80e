import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusbif.fourier import (
    Fourier1D, Fourier2D, ModePolynomialMap,
    inner_product_1d, inner_product_2d, product_1d, product_2d,
)
from oracles import (
    quad_inner_1d, quad_inner_2d,
    dense_product_modes_1d, dense_product_modes_2d,
    fd_derivative,
)


def random_1d(rng, M, n):
    a = rng.standard_normal((M + 1, n))
    b = rng.standard_normal((M + 1, n))
    b[0] = 0.0
    return Fourier1D(a, b)


def random_2d(rng, L, M, n):
    c = rng.standard_normal((2 * L + 1, 2 * M + 1, n)) \
        + 1j * rng.standard_normal((2 * L + 1, 2 * M + 1, n))
    return Fourier2D(c)  # constructor symmetrizes


# ---------------------------------------------------------------- one angle

def test_grid_round_trip_exact():
    rng = np.random.default_rng(0)
    z = random_1d(rng, 7, 3)
    for N in (15, 16, 32, 33):
        back = Fourier1D.from_grid(z.grid_values(N), 7)
        assert np.allclose(back.a, z.a, atol=1e-12)
        assert np.allclose(back.b, z.b, atol=1e-12)


def test_evaluate_matches_direct_sum():
    rng = np.random.default_rng(1)
    z = random_1d(rng, 5, 2)
    theta = 0.731
    direct = z.a[0].copy()
    for m in range(1, 6):
        direct += z.a[m] * np.cos(m * theta) + z.b[m] * np.sin(m * theta)
    assert np.allclose(z.evaluate(theta), direct, atol=1e-14)


def test_grid_values_match_evaluate():
    rng = np.random.default_rng(2)
    z = random_1d(rng, 6, 2)
    N = 32
    thetas = 2 * np.pi * np.arange(N) / N
    assert np.allclose(z.grid_values(N), z.evaluate(thetas), atol=1e-12)


def test_inner_product_against_quadrature():
    rng = np.random.default_rng(3)
    z1 = random_1d(rng, 6, 3)
    z2 = random_1d(rng, 4, 3)
    N = 64
    exact = inner_product_1d(z1, z2)
    quad = quad_inner_1d(z1.grid_values(N), z2.grid_values(N))
    assert abs(exact - quad) < 1e-12


def test_inner_product_is_parseval():
    rng = np.random.default_rng(4)
    z = random_1d(rng, 8, 2)
    expect = np.sum(z.a[0] ** 2) + 0.5 * (np.sum(z.a[1:] ** 2) + np.sum(z.b[1:] ** 2))
    assert abs(inner_product_1d(z, z) - expect) < 1e-12
    N = 64
    assert abs(inner_product_1d(z, z) - quad_inner_1d(z.grid_values(N), z.grid_values(N))) < 1e-12


def test_product_matches_dense_convolution():
    rng = np.random.default_rng(5)
    z1 = random_1d(rng, 5, 2)
    z2 = random_1d(rng, 3, 2)
    prod = product_1d(z1, z2)
    assert prod.max_mode == 8

    def two_sided(z):
        M = z.max_mode
        c = z.complex_modes()
        full = np.zeros((2 * M + 1, z.dim), dtype=complex)
        full[M] = c[0]
        for m in range(1, M + 1):
            full[M + m] = c[m]
            full[M - m] = np.conj(c[m])
        return full

    dense = dense_product_modes_1d(two_sided(z1), two_sided(z2))
    got = two_sided(prod)
    assert np.allclose(got, dense, atol=1e-12)


def test_product_scalar_times_vector():
    rng = np.random.default_rng(6)
    s = random_1d(rng, 4, 1)
    v = random_1d(rng, 3, 3)
    prod = product_1d(s, v)
    N = 32
    assert np.allclose(prod.grid_values(N), s.grid_values(N) * v.grid_values(N), atol=1e-12)


def test_differentiate_against_finite_difference():
    rng = np.random.default_rng(7)
    z = random_1d(rng, 6, 2)
    dz = z.differentiate()
    for theta in (0.3, 1.7, 4.1):
        fd = fd_derivative(lambda t: z.evaluate(float(t)), theta)
        assert np.allclose(dz.evaluate(theta), fd, atol=1e-8)


def test_truncate_and_pad():
    rng = np.random.default_rng(8)
    z = random_1d(rng, 6, 2)
    t = z.truncate(3)
    assert t.max_mode == 3
    assert np.allclose(t.a, z.a[:4])
    p = t.pad(6)
    assert p.max_mode == 6
    assert np.allclose(p.a[4:], 0.0)
    # truncating to the same count is the identity
    same = z.truncate(6)
    assert np.allclose(same.a, z.a) and np.allclose(same.b, z.b)


def test_json_round_trip_1d():
    rng = np.random.default_rng(9)
    z = random_1d(rng, 5, 3)
    back = Fourier1D.from_json(z.to_json())
    assert np.array_equal(back.a, z.a)
    assert np.array_equal(back.b, z.b)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 5), st.integers(0, 5),
       st.floats(-3, 3, allow_nan=False), st.floats(-3, 3, allow_nan=False))
def test_product_bilinear(m1, m2, c1, c2):
    rng = np.random.default_rng(m1 * 7 + m2 + 11)
    z1 = random_1d(rng, m1, 1)
    z2 = random_1d(rng, m2, 1)
    w = random_1d(rng, m2, 1)
    left = product_1d(z1, c1 * z2 + c2 * w)
    right = c1 * product_1d(z1, z2) + c2 * product_1d(z1, w)
    assert np.allclose(left.a, right.a, atol=1e-10)
    assert np.allclose(left.b, right.b, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6))
def test_product_commutes(m1, m2):
    rng = np.random.default_rng(m1 * 31 + m2)
    z1 = random_1d(rng, m1, 2)
    z2 = random_1d(rng, m2, 2)
    p, q = product_1d(z1, z2), product_1d(z2, z1)
    assert np.allclose(p.a, q.a, atol=1e-12)
    assert np.allclose(p.b, q.b, atol=1e-12)


# ---------------------------------------------------------------- two angles

def test_2d_round_trip_exact():
    rng = np.random.default_rng(10)
    z = random_2d(rng, 3, 4, 2)
    for (N1, N2) in ((8, 16), (7, 9), (16, 16)):
        back = Fourier2D.from_grid(z.grid_values(N1, N2), 3, 4)
        assert np.allclose(back.c, z.c, atol=1e-12)


def test_2d_grid_is_real_and_matches_evaluate():
    rng = np.random.default_rng(11)
    z = random_2d(rng, 2, 3, 2)
    N1, N2 = 8, 8
    vals = z.grid_values(N1, N2)
    assert vals.dtype == float
    for i in (0, 3):
        for j in (1, 5):
            th, ph = 2 * np.pi * i / N1, 2 * np.pi * j / N2
            assert np.allclose(vals[i, j], z.evaluate(th, ph), atol=1e-12)


def test_2d_conjugacy_enforced():
    rng = np.random.default_rng(12)
    c = rng.standard_normal((5, 7, 2)) + 1j * rng.standard_normal((5, 7, 2))
    z = Fourier2D(c)
    assert z.conjugacy_defect() < 1e-15


def test_2d_inner_product_against_quadrature():
    rng = np.random.default_rng(13)
    z1 = random_2d(rng, 2, 3, 2)
    z2 = random_2d(rng, 3, 2, 2)
    N1 = N2 = 32
    exact = inner_product_2d(z1, z2)
    quad = quad_inner_2d(z1.grid_values(N1, N2), z2.grid_values(N1, N2))
    assert abs(exact - quad) < 1e-12


def test_2d_product_matches_dense_convolution():
    rng = np.random.default_rng(14)
    z1 = random_2d(rng, 2, 2, 1)
    z2 = random_2d(rng, 1, 2, 1)
    prod = product_2d(z1, z2)
    dense = dense_product_modes_2d(z1.c, z2.c)
    assert prod.c.shape == dense.shape
    assert np.allclose(prod.c, dense, atol=1e-12)


def test_2d_differentiate():
    rng = np.random.default_rng(15)
    z = random_2d(rng, 2, 3, 1)
    dth = z.differentiate("theta")
    dph = z.differentiate("phi")
    th, ph = 0.9, 2.2
    fd_th = fd_derivative(lambda t: z.evaluate(float(t), ph), th)
    fd_ph = fd_derivative(lambda p: z.evaluate(th, float(p)), ph)
    assert np.allclose(dth.evaluate(th, ph), fd_th, atol=1e-8)
    assert np.allclose(dph.evaluate(th, ph), fd_ph, atol=1e-8)


def test_2d_mode_accessors():
    z = Fourier2D.zeros(2, 2, 1).with_mode(1, 2, np.array([0.5 - 0.25j]))
    assert np.allclose(z.mode(1, 2), 0.5 - 0.25j)
    assert np.allclose(z.mode(-1, -2), 0.5 + 0.25j)
    assert z.conjugacy_defect() < 1e-16


def test_2d_truncate_pad_json():
    rng = np.random.default_rng(16)
    z = random_2d(rng, 3, 3, 2)
    t = z.truncate(2, 1)
    assert (t.max_mode_theta, t.max_mode_phi) == (2, 1)
    assert np.allclose(t.c, z.c[1:6, 2:5])
    p = t.pad(3, 3)
    assert np.allclose(p.c[1:6, 2:5], t.c)
    back = Fourier2D.from_json(z.to_json())
    assert np.allclose(back.c, z.c)


def test_2d_norm_parseval():
    rng = np.random.default_rng(17)
    z = random_2d(rng, 2, 2, 2)
    N = 32
    quad = quad_inner_2d(z.grid_values(N, N), z.grid_values(N, N))
    assert abs(z.norm() ** 2 - quad) < 1e-12


# ------------------------------------------------------- mode/polynomial map

@pytest.mark.parametrize("m,kind", [(0, "cos"), (2, "cos"), (2, "sin"),
                                    (1, "cos"), (1, "sin"), (3, "cos"), (3, "sin")])
def test_mode_polynomial_identities(m, kind):
    phi = np.linspace(0, 2 * np.pi, 257)
    poly = ModePolynomialMap.polynomial(m, kind)
    got = poly(np.cos(phi), np.sin(phi))
    want = ModePolynomialMap.trig(m, kind, phi)
    assert np.allclose(got, want, atol=1e-12)


def test_mode_polynomial_degrees():
    assert ModePolynomialMap.degree(0, "cos") == 2
    assert ModePolynomialMap.degree(2, "sin") == 2
    assert ModePolynomialMap.degree(1, "cos") == 3
    assert ModePolynomialMap.degree(3, "sin") == 3
