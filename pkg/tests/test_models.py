import numpy as np
import pytest

from torusbif.models import (
    lorenz_system, forced_vdp_system, ks_system,
    toeplitz_antisymmetric, toeplitz_symmetric, hankel_from_modes,
)
from oracles import fd_jacobian, ks_quadratic_brute


# ------------------------------------------------------------------- lorenz

def test_lorenz_closed_form_reference():
    sys = lorenz_system(10.0, 8.0 / 3.0)
    ref = sys.reference
    assert abs(ref["lambda_star"] - 470.0 / 19.0) < 1e-12
    assert abs(ref["omega_star"] - np.sqrt((8.0 / 3.0) * (470.0 / 19.0 + 10.0))) < 1e-12
    # crossing-speed closed form is positive for these parameters
    assert ref["a_dot_real"] > 0


def test_lorenz_origin_is_stationary():
    sys = lorenz_system()
    assert np.allclose(sys.rhs(np.zeros(3), 17.3), 0.0)


def test_lorenz_equilibrium_branch_is_stationary():
    sys = lorenz_system()
    for lam in (5.0, 20.0, 24.7):
        x = sys.reference["equilibrium"](lam)
        assert np.max(np.abs(sys.rhs(x, lam))) < 1e-12


def test_lorenz_jacobians_match_fd():
    sys = lorenz_system()
    rng = np.random.default_rng(21)
    for _ in range(10):
        x = rng.standard_normal(3) * 3
        lam = float(rng.uniform(5, 30))
        J = sys.jacobian(x, lam)
        Jfd = fd_jacobian(lambda y: sys.rhs(y, lam), x)
        assert np.max(np.abs(J - Jfd)) / max(1.0, np.max(np.abs(J))) < 1e-5
        dlam = (sys.rhs(x, lam + 1e-6) - sys.rhs(x, lam - 1e-6)) / 2e-6
        assert np.max(np.abs(sys.jacobian_lambda(x, lam) - dlam)) < 1e-6


def test_lorenz_rejects_bad_parameters():
    with pytest.raises(ValueError):
        lorenz_system(sigma=3.0, b=8.0 / 3.0)  # sigma <= b+1
    with pytest.raises(ValueError):
        lorenz_system(b=-1.0)


def test_lorenz_batched_evaluation():
    sys = lorenz_system()
    rng = np.random.default_rng(22)
    xs = rng.standard_normal((7, 3))
    lam = 12.0
    batched = sys.rhs(xs, lam)
    for j in range(7):
        assert np.allclose(batched[j], sys.rhs(xs[j], lam))
    Jb = sys.jacobian(xs, lam)
    assert Jb.shape == (7, 3, 3)
    assert np.allclose(Jb[3], sys.jacobian(xs[3], lam))


# ----------------------------------------------------------------- forced vdp

def test_vdp_linear_orbit_is_exact():
    sys = forced_vdp_system(sigma=0.0, nu=0.8)
    orbit = sys.reference["linear_orbit"]
    theta = np.linspace(0, 2 * np.pi, 37)
    lam = 0.7
    v = orbit(theta, lam)
    # residual  F(v, theta) - dv/dtheta  at the closed-form response
    amp = lam / (1 - 0.8 ** 2)
    dv = np.stack([-amp * np.sin(theta), -amp * 0.8 * np.cos(theta)], axis=-1)
    resid = sys.rhs(v, theta, lam) - dv
    assert np.max(np.abs(resid)) < 1e-12


def test_vdp_linear_floquet_matrix():
    sys = forced_vdp_system(sigma=0.0, nu=0.8)
    E = sys.reference["linear_floquet_matrix"]
    assert np.allclose(E, np.array([[0, 1], [-1, 0]]) / 0.8)
    # at sigma=0 the state Jacobian is that constant matrix
    rng = np.random.default_rng(23)
    v = rng.standard_normal(2)
    assert np.allclose(sys.jacobian(v, 1.0, 0.5), E)


def test_vdp_periodicity_in_theta():
    sys = forced_vdp_system(sigma=4.0, nu=0.86)
    rng = np.random.default_rng(24)
    v = rng.standard_normal(2)
    for theta in (0.0, 0.3, 5.9):
        a = sys.rhs(v, theta, 1.2)
        b = sys.rhs(v, theta + 2 * np.pi, 1.2)
        assert np.max(np.abs(a - b)) < 1e-13


def test_vdp_odd_symmetry_under_half_turn():
    sys = forced_vdp_system(sigma=4.0, nu=0.86)
    rng = np.random.default_rng(25)
    v = rng.standard_normal(2)
    for theta in (0.1, 2.0, 4.4):
        left = sys.rhs(-v, theta + np.pi, 0.9)
        right = -sys.rhs(v, theta, 0.9)
        assert np.max(np.abs(left - right)) < 1e-12


def test_vdp_jacobians_match_fd():
    sys = forced_vdp_system(sigma=4.0, nu=0.75)
    rng = np.random.default_rng(26)
    for _ in range(10):
        v = rng.standard_normal(2) * 2
        theta = float(rng.uniform(0, 2 * np.pi))
        lam = float(rng.uniform(0, 2))
        J = sys.jacobian(v, theta, lam)
        Jfd = fd_jacobian(lambda y: sys.rhs(y, theta, lam), v)
        assert np.max(np.abs(J - Jfd)) / max(1.0, np.max(np.abs(J))) < 1e-5
        dlam = (sys.rhs(v, theta, lam + 1e-6) - sys.rhs(v, theta, lam - 1e-6)) / 2e-6
        assert np.max(np.abs(sys.jacobian_lambda(v, theta, lam) - dlam)) < 1e-6


def test_vdp_rejects_bad_nu():
    for nu in (0.0, 1.0, -0.5, 2.0):
        with pytest.raises(ValueError):
            forced_vdp_system(nu=nu)


# ------------------------------------------------------------------------ ks

def test_ks_quadratic_matches_brute_force():
    rng = np.random.default_rng(27)
    for L in (2, 5, 8):
        sys = ks_system(L)
        u = rng.standard_normal(L) + 1j * rng.standard_normal(L)
        assert np.allclose(sys.quadratic_complex(u), ks_quadratic_brute(u), atol=1e-12)


def test_ks_quadratic_L2_by_hand():
    sys = ks_system(2)
    u = np.array([0.3 - 0.2j, -1.1 + 0.7j])
    q = sys.quadratic_complex(u)
    assert np.allclose(q[0], np.conj(u[0]) * u[1], atol=1e-14)
    assert np.allclose(q[1], 0.5 * u[0] ** 2, atol=1e-14)


def test_ks_imaginary_subspace_consistency():
    # Q(i s) = -Q_s(s), so the odd subspace is invariant and the real flow
    # on it is the stated restriction.
    rng = np.random.default_rng(28)
    sys = ks_system(6)
    s = rng.standard_normal(6)
    qc = sys.quadratic_complex(1j * s)
    assert np.max(np.abs(qc.imag)) < 1e-14
    assert np.allclose(qc.real, -sys.quadratic_symmetric(s), atol=1e-12)
    lam = 13.0
    full = sys.rhs_complex(1j * s, lam)
    restricted = sys.rhs_symmetric(s, lam)
    assert np.allclose(full, 1j * restricted, atol=1e-12)


def test_ks_zero_state_is_stationary():
    sys = ks_system(8)
    assert np.allclose(sys.rhs_complex(np.zeros(8, complex), 20.0), 0.0)


def test_ks_trivial_branch_eigenvalues():
    sys = ks_system(4)
    for lam in (3.0, 4.0, 16.0, 30.0):
        eig = sys.linearization_eigenvalues_at_zero(lam)
        assert np.allclose(eig, [-4 * l ** 4 + lam * l ** 2 for l in range(1, 5)])
    # mode l loses stability exactly at lam = 4 l^2
    for l in (1, 2, 3, 4):
        assert abs(sys.linearization_eigenvalues_at_zero(4.0 * l ** 2)[l - 1]) < 1e-12


def test_ks_symmetric_jacobian_matches_fd():
    rng = np.random.default_rng(29)
    sys = ks_system(8)
    for _ in range(10):
        s = rng.standard_normal(8)
        lam = float(rng.uniform(5, 20))
        J = sys.jacobian_symmetric(s, lam)
        Jfd = fd_jacobian(lambda y: sys.rhs_symmetric(y, lam), s)
        assert np.max(np.abs(J - Jfd)) / max(1.0, np.max(np.abs(J))) < 1e-5


def test_ks_reality_of_quadratic():
    # conjugate-extending u and convolving must give modes with q_{-l} = conj(q_l)
    rng = np.random.default_rng(30)
    L = 5
    u = rng.standard_normal(L) + 1j * rng.standard_normal(L)
    w = np.concatenate([np.conj(u[::-1]), [0.0], u])
    full = 0.5 * np.convolve(w, w)
    for l in range(1, 2 * L + 1):
        assert np.allclose(full[2 * L + l], np.conj(full[2 * L - l]), atol=1e-12)


def test_ks_matrix_builders():
    s = np.array([1.0, 2.0, 3.0, 4.0])
    Ta = toeplitz_antisymmetric(s)
    assert np.allclose(Ta, np.array([
        [0, -1, -2, -3],
        [1, 0, -1, -2],
        [2, 1, 0, -1],
        [3, 2, 1, 0],
    ], dtype=float))
    Ts = toeplitz_symmetric(s)
    assert np.allclose(Ts, Ts.T)
    assert np.allclose(Ts[0], [0, 1, 2, 3])
    H = hankel_from_modes(s)
    assert np.allclose(H, np.array([
        [2, 3, 4, 0],
        [3, 4, 0, 0],
        [4, 0, 0, 0],
        [0, 0, 0, 0],
    ], dtype=float))


def test_ks_rejects_tiny_mode_count():
    with pytest.raises(ValueError):
        ks_system(1)
