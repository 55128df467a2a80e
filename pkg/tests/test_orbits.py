"""Branch continuation, crossing detection, speed estimates, frame alignment."""

import io
import math

import numpy as np
import pytest

from torusbif.fourier import Fourier1D, inner_product_1d
from torusbif.floquet import (
    floquet_decompose, matrix_series_from_grid, matrix_series_grid,
    split_invariant_subspaces,
)
from torusbif.models import (
    AutonomousSystem, forced_vdp_system, lorenz_system,
)
from torusbif.orbits import (
    AutonomousOrbitBranch, ForcedOrbitBranch, NoSignChange, StationaryBranch,
    SubspaceSwap, continue_branch, continue_subspace, crossing_speed,
    crossing_speed_study, detect_crossing, flatten_series, trim_series,
    unflatten_series,
)

from test_floquet import random_periodic_matrix


# --------------------------------------------------------------------------
# flat coordinate helpers
# --------------------------------------------------------------------------

def test_flatten_round_trip():
    rng = np.random.default_rng(0)
    z = Fourier1D(rng.standard_normal((5, 3)), rng.standard_normal((5, 3)))
    c = flatten_series(z)
    assert c.shape == (3 * 9,)
    back = unflatten_series(c, 4, 3)
    assert np.allclose(back.a, z.a) and np.allclose(back.b, z.b)


def test_trim_series_drops_negligible_tail():
    a = np.zeros((8, 1))
    b = np.zeros((8, 1))
    a[0, 0] = 1.0
    a[3, 0] = 0.5
    a[7, 0] = 1e-15
    z = trim_series(Fourier1D(a, b))
    assert z.max_mode == 3
    assert trim_series(Fourier1D(np.zeros((4, 1)), np.zeros((4, 1)))).max_mode == 0


# --------------------------------------------------------------------------
# stationary branch: Lorenz equilibria in closed form
# --------------------------------------------------------------------------

def test_stationary_branch_matches_closed_form():
    sys = lorenz_system()
    eq = sys.reference["equilibrium"]
    br = StationaryBranch(sys)
    pt = br.solve(20.0, eq(20.0) + 0.05)
    assert np.max(np.abs(pt.x - eq(20.0))) < 1e-10
    assert pt.residual_norm < 1e-11


def test_continue_branch_walks_the_equilibrium_curve():
    sys = lorenz_system()
    eq = sys.reference["equilibrium"]
    br = StationaryBranch(sys)
    start = br.solve(5.0, eq(5.0))
    log = io.StringIO()
    pts = continue_branch(br, start, 25.0, step=1.0, log=log)
    assert abs(pts[-1].lam - 25.0) < 1e-12
    for pt in pts:
        assert np.max(np.abs(pt.x - eq(pt.lam))) < 1e-9
    rows = log.getvalue().strip().splitlines()
    assert len(rows) == len(pts) - 1
    first = rows[0].split(",")
    assert len(first) == 4 and float(first[0]) > 5.0


def test_detect_crossing_lorenz_closed_form():
    sys = lorenz_system()
    ref = sys.reference
    br = StationaryBranch(sys)
    start = br.solve(15.0, ref["equilibrium"](15.0))
    ev = detect_crossing(br, start, 30.0, step=2.0)
    assert abs(ev.lam_star - ref["lambda_star"]) < 1e-7
    assert abs(ev.omega_star - ref["omega_star"]) < 1e-6
    assert abs(ev.critical_exponent.real) < 1e-10


def test_detect_crossing_step_independent():
    sys = lorenz_system()
    br = StationaryBranch(sys)
    start = br.solve(15.0, sys.reference["equilibrium"](15.0))
    ev1 = detect_crossing(br, start, 30.0, step=2.0)
    ev2 = detect_crossing(br, start, 30.0, step=0.7)
    assert abs(ev1.lam_star - ev2.lam_star) < 1e-8


def test_detect_crossing_requires_sign_change():
    sys = lorenz_system()
    br = StationaryBranch(sys)
    start = br.solve(5.0, sys.reference["equilibrium"](5.0))
    with pytest.raises(NoSignChange):
        detect_crossing(br, start, 15.0, step=2.0)


def test_crossing_speed_matches_closed_form():
    sys = lorenz_system()
    ref = sys.reference
    br = StationaryBranch(sys)
    start = br.solve(15.0, ref["equilibrium"](15.0))
    ev = crossing_speed_study(br, detect_crossing(br, start, 30.0, step=2.0))
    assert abs(ev.a_dot_real - ref["a_dot_real"]) < 1e-7
    errs = [abs(re - ref["a_dot_real"]) for _, re, _ in ev.speed_table]
    # centered differences: error should fall by ~100x per decade of h
    assert errs[0] / max(errs[1], 1e-14) > 25
    re01, im01 = crossing_speed(br, ev, 0.01)
    assert abs(re01 - ev.speed_table[1][1]) < 1e-14


# --------------------------------------------------------------------------
# forced orbit branch: van der Pol response curves
# --------------------------------------------------------------------------

def test_forced_orbit_linear_case_closed_form():
    sys = forced_vdp_system(sigma=0.0, nu=0.8)
    orbit_ref = sys.reference["linear_orbit"]
    br = ForcedOrbitBranch(sys, max_mode=6, nonlinearity_degree=1)
    lam = 1.0
    guess = Fourier1D.zeros(6, 2)
    pt = br.solve(lam, guess)
    theta = np.linspace(0, 2 * np.pi, 17)[:-1]
    vals = pt.orbit.evaluate(theta)
    expect = orbit_ref(theta, lam)
    assert np.max(np.abs(vals - expect)) < 1e-10
    # wrapped rotation exponents: +/- i(1/nu - 1)
    mus = np.sort_complex(pt.exponents)
    assert np.allclose(mus.real, 0.0, atol=1e-9)
    assert abs(np.max(mus.imag) - (1 / 0.8 - 1)) < 1e-9


def test_forced_orbit_nonlinear_residual_on_fine_grid():
    sys = forced_vdp_system(sigma=4.0, nu=0.8)
    br = ForcedOrbitBranch(sys, max_mode=24)
    start = br.solve(0.0, Fourier1D.zeros(24, 2))
    assert start.orbit.norm() < 1e-12       # the zero response is exact
    pts = continue_branch(br, start, 0.3, step=0.1)
    pt = pts[-1]
    N = 512
    theta = 2 * np.pi * np.arange(N) / N
    vals = pt.orbit.grid_values(N)
    dvals = pt.orbit.differentiate().grid_values(N)
    ode_residual = sys.rhs(vals, theta, pt.lam) - dvals
    assert np.max(np.abs(ode_residual)) < 1e-9
    assert pt.orbit.norm() > 0.1            # genuinely nonzero response


def _vdp_linear_guess(nu, lam, M=24):
    a = np.zeros((M + 1, 2))
    b = np.zeros((M + 1, 2))
    amp = lam / (1.0 - nu ** 2)
    a[1, 0] = amp
    b[1, 1] = -amp * nu
    return Fourier1D(a, b)


def test_forced_orbit_crossing_vdp():
    nu = 0.86
    br = ForcedOrbitBranch(forced_vdp_system(sigma=0.4, nu=nu), max_mode=24)
    start = br.solve(0.3, _vdp_linear_guess(nu, 0.3))
    ev = detect_crossing(br, start, 1.2, step=0.05)
    assert abs(ev.critical_exponent.real) < 1e-10
    assert abs(ev.lam_star - 0.4349) < 5e-4
    assert abs(ev.omega_star - 0.1092) < 5e-4
    re, im = crossing_speed(br, ev, 1e-4)
    assert abs(re - (-3.3492)) < 5e-4
    assert abs(im - (-1.9037)) < 5e-4


def test_amplitude_pinned_solve_matches_plain():
    # pinning the mean square of a component at the value a plain solve
    # produces must recover the same orbit with the parameter as unknown
    nu = 0.8
    br = ForcedOrbitBranch(forced_vdp_system(sigma=0.4, nu=nu), max_mode=24)
    pt = br.solve(0.5, _vdp_linear_guess(nu, 0.5))
    comp = pt.orbit.component(0)
    ms = inner_product_1d(comp, comp)
    pinned = br.solve_with_amplitude(ms, 0, 0.45, pt)
    assert abs(pinned.lam - 0.5) < 1e-8
    diff = pinned.orbit - pt.orbit
    assert diff.norm() < 1e-8


# --------------------------------------------------------------------------
# autonomous orbit branch: amplitude-dependent rotation in closed form
# --------------------------------------------------------------------------

def _circle_system(c=0.25):
    def rhs(x, lam):
        x1, y1 = x[..., 0], x[..., 1]
        r2 = x1 ** 2 + y1 ** 2
        om = 1.0 + c * r2
        return np.stack([x1 * (lam - r2) - om * y1,
                         y1 * (lam - r2) + om * x1], axis=-1)

    def jac(x, lam):
        x1, y1 = x[..., 0], x[..., 1]
        r2 = x1 ** 2 + y1 ** 2
        J = np.empty(np.shape(x)[:-1] + (2, 2))
        J[..., 0, 0] = lam - r2 - 2 * x1 * x1 - 2 * c * x1 * y1
        J[..., 0, 1] = -2 * x1 * y1 - (1 + c * r2) - 2 * c * y1 * y1
        J[..., 1, 0] = -2 * x1 * y1 + (1 + c * r2) + 2 * c * x1 * x1
        J[..., 1, 1] = lam - r2 - 2 * y1 * y1 + 2 * c * x1 * y1
        return J

    def jl(x, lam):
        return np.stack([x[..., 0], x[..., 1]], axis=-1)

    return AutonomousSystem(name="circle", dim=2, rhs=rhs, jacobian=jac,
                            jacobian_lambda=jl, reference={"c": c})


def test_autonomous_orbit_closed_form():
    c = 0.25
    sys = _circle_system(c)
    lam = 0.5
    Om = 1.0 + c * lam
    M = 8
    a = np.zeros((M + 1, 2))
    b = np.zeros((M + 1, 2))
    a[1, 0] = math.sqrt(lam)
    b[1, 1] = math.sqrt(lam)
    guess = Fourier1D(a, b)
    br = AutonomousOrbitBranch(sys, max_mode=M)
    pt = br.solve(lam, (guess, 1.0 / Om + 0.02))
    assert abs(pt.period_scale - 1.0 / Om) < 1e-10
    theta = np.linspace(0, 2 * np.pi, 33)[:-1]
    circ = np.stack([math.sqrt(lam) * np.cos(theta),
                     math.sqrt(lam) * np.sin(theta)], axis=-1)
    assert np.max(np.abs(pt.orbit.evaluate(theta) - circ)) < 1e-9
    mus = np.sort(pt.exponents.real)
    assert abs(mus[-1]) < 1e-8                       # phase direction
    assert abs(mus[0] - (-2 * lam / Om)) < 1e-8      # radial contraction
    # continuation step keeps the closed form
    pt2 = continue_branch(br, pt, 0.7, step=0.1)[-1]
    assert abs(pt2.period_scale - 1.0 / (1 + c * 0.7)) < 1e-9
    amp = math.sqrt(pt2.orbit.evaluate(np.array([0.0]))[0] @
                    pt2.orbit.evaluate(np.array([0.0]))[0])
    assert abs(amp - math.sqrt(0.7)) < 1e-8


# --------------------------------------------------------------------------
# frame alignment along a branch
# --------------------------------------------------------------------------

def _split_frame(seed, drift=0.0, n=4):
    """Periodic coefficient matrix with a designed spectrum, decomposed and
    split; `drift` perturbs it smoothly (same branch, nearby parameter)."""
    rng = np.random.default_rng(seed)
    B = np.zeros((n, n))
    B[0, 0] = B[1, 1] = 0.02 + drift
    B[0, 1], B[1, 0] = -1.3, 1.3
    B[2, 2] = -0.8 + 0.5 * drift
    B[3, 3] = -2.0 - 0.3 * drift
    V = rng.standard_normal((n, n)) + np.eye(n)
    while np.linalg.cond(V) > 50:
        V = rng.standard_normal((n, n)) + np.eye(n)
    A0 = V @ B @ np.linalg.inv(V)
    Aper = random_periodic_matrix(rng, n, 2, amplitude=0.05 + 0.02 * drift)
    a = Aper.a.copy()
    a[0] = A0.ravel()
    A = Fourier1D(a, Aper.b)
    F = floquet_decompose(A)
    return A, split_invariant_subspaces(F)


def test_continue_subspace_identity_alignment():
    A, S = _split_frame(7)
    out = continue_subspace(S, S)
    assert np.max(np.abs(out.E - S.E)) < 1e-12
    assert np.max(np.abs(out.P.a - S.P.pad(out.P.max_mode).a)) < 1e-10
    assert np.max(np.abs(out.P.b - S.P.pad(out.P.max_mode).b)) < 1e-10


def test_continue_subspace_preserves_residual():
    A1, S1 = _split_frame(7)
    A2, S2 = _split_frame(7, drift=0.05)
    aligned = continue_subspace(S1, S2)
    # alignment is a similarity: the defining relation still holds for A2
    assert aligned.residual(A2) < 1e-8
    assert abs(aligned.alpha_real - S2.alpha_real) < 1e-14
    # aligned frame is closer to the previous one than an arbitrary rotation
    c1p = S1.columns([0])
    c1a = aligned.columns([0])
    assert inner_product_1d(c1p, c1a) > 0


def test_continue_subspace_rejects_unrelated_frames():
    _, S1 = _split_frame(7)
    _, S2 = _split_frame(123, drift=0.0)
    with pytest.raises(SubspaceSwap):
        continue_subspace(S1, S2, min_overlap=0.99)


def test_continue_subspace_sign_fix_for_real_columns():
    A, S = _split_frame(7)
    flipped = S.replace_column(2, -S.columns([2]))
    fixed = continue_subspace(S, flipped)
    c = fixed.columns([2])
    ref = S.columns([2])
    assert inner_product_1d(c, ref) > 0
    assert fixed.residual(A) < 1e-8
