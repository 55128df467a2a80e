"""Continuation in the system parameter of stationary points and periodic
orbits, with their spectral stability data; detection of oscillatory
critical crossings by secant iteration; centered-difference crossing
speeds; and smooth alignment of invariant-subspace frames along a branch.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .fourier import Fourier1D, inner_product_1d
from .floquet import (
    FloquetDecomposition, SubspaceDecomposition,
    floquet_decompose, matrix_series_from_grid,
)

__all__ = [
    "FoldDetected",
    "NewtonDivergence",
    "NoSignChange",
    "SecantStall",
    "SubspaceSwap",
    "StationaryBranchPoint",
    "PeriodicOrbitPoint",
    "CrossingEvent",
    "StationaryBranch",
    "ForcedOrbitBranch",
    "AutonomousOrbitBranch",
    "continue_branch",
    "continue_through_family",
    "detect_crossing",
    "crossing_speed",
    "crossing_speed_study",
    "continue_subspace",
    "trim_series",
    "flatten_series",
    "unflatten_series",
]


class FoldDetected(RuntimeError):
    """The branch linearization became singular: parameter continuation
    in this direction is leaving its valid regime."""


class NewtonDivergence(RuntimeError):
    """Newton iteration failed to converge."""


class NoSignChange(RuntimeError):
    """The monitored quantity never changed sign over the scanned range."""


class SecantStall(RuntimeError):
    """Secant refinement of a crossing exceeded its iteration budget."""


class SubspaceSwap(RuntimeError):
    """Frame overlap between consecutive parameter values fell below the
    acceptance threshold (step too large, or branches reordered)."""


# --------------------------------------------------------------------------
# small series utilities
# --------------------------------------------------------------------------

def trim_series(z: Fourier1D, tol: float = 1e-13) -> Fourier1D:
    """Drop trailing modes whose coefficients are negligible relative to
    the largest one (keeps results exact to ~tol while shrinking work)."""
    mags = np.maximum(np.max(np.abs(z.a), axis=1), np.max(np.abs(z.b), axis=1))
    top = mags.max()
    if top == 0.0:
        return z.truncate(0)
    keep = np.nonzero(mags > tol * top)[0]
    return z.truncate(int(keep[-1]) if keep.size else 0)


def flatten_series(z: Fourier1D) -> np.ndarray:
    """Coefficient vector: all cosine rows, then sine rows for modes >= 1."""
    return np.concatenate([z.a.ravel(), z.b[1:].ravel()])


def unflatten_series(c: np.ndarray, max_mode: int, dim: int) -> Fourier1D:
    na = (max_mode + 1) * dim
    a = c[:na].reshape(max_mode + 1, dim)
    b = np.zeros((max_mode + 1, dim))
    if max_mode:
        b[1:] = c[na:].reshape(max_mode, dim)
    return Fourier1D(a, b)


def _inner_weight_vector(ref: Fourier1D) -> np.ndarray:
    """Flat vector w with <z, ref> = w . flatten(z) for all z (same modes)."""
    wa = ref.a.copy()
    wa[1:] *= 0.5
    wb = 0.5 * ref.b[1:]
    return np.concatenate([wa.ravel(), wb.ravel()])


# --------------------------------------------------------------------------
# branch points and events
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StationaryBranchPoint:
    lam: float
    x: np.ndarray
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    residual_norm: float
    newton_iterations: int


@dataclass(frozen=True)
class PeriodicOrbitPoint:
    lam: float
    orbit: Fourier1D
    period_scale: float | None          # autonomous time rescale; None if forced
    coefficient_matrix: Fourier1D       # linearization about the orbit
    floquet: FloquetDecomposition
    residual_norm: float
    newton_iterations: int

    @property
    def exponents(self) -> np.ndarray:
        return self.floquet.exponents


@dataclass(frozen=True)
class CrossingEvent:
    lam_star: float
    omega_star: float
    critical_exponent: complex           # Re ~ 0, Im = omega_star
    point: object                        # branch point at lam_star
    a_dot_real: float | None = None
    a_dot_imag: float | None = None
    speed_table: tuple | None = None     # ((h, re, im), ...) when studied


# --------------------------------------------------------------------------
# branches
# --------------------------------------------------------------------------

class StationaryBranch:
    """Newton continuation of F(x, lam) = 0 for an autonomous system."""

    def __init__(self, system, newton_tol: float = 1e-11, max_iter: int = 25,
                 cond_limit: float = 1e13):
        self.system = system
        self.newton_tol = newton_tol
        self.max_iter = max_iter
        self.cond_limit = cond_limit

    def solve(self, lam: float, warm) -> StationaryBranchPoint:
        x = np.array(warm.x if isinstance(warm, StationaryBranchPoint) else warm,
                     dtype=float)
        sys = self.system
        for it in range(self.max_iter):
            r = sys.rhs(x, lam)
            if np.max(np.abs(r)) < self.newton_tol:
                J = sys.jacobian(x, lam)
                return StationaryBranchPoint(
                    lam=float(lam), x=x, jacobian=J,
                    eigenvalues=np.linalg.eigvals(J),
                    residual_norm=float(np.max(np.abs(r))),
                    newton_iterations=it)
            J = sys.jacobian(x, lam)
            if np.linalg.cond(J) > self.cond_limit:
                raise FoldDetected(f"singular linearization at lam={lam:.6g}")
            x = x - np.linalg.solve(J, r)
        raise NewtonDivergence(f"no convergence at lam={lam:.6g} "
                               f"(residual {np.max(np.abs(sys.rhs(x, lam))):.2e})")

    def monitor_pair(self, point, prev_mu):
        return _track_complex_pair(point.eigenvalues, prev_mu)


def _track_complex_pair(values: np.ndarray, prev_mu: complex | None,
                        imag_floor: float = 1e-9) -> complex | None:
    """The followed complex exponent (Im > 0), matched to the previous one
    by proximity; without history, the least stable pair."""
    cand = values[values.imag > imag_floor]
    if cand.size == 0:
        return None
    if prev_mu is None:
        return complex(cand[np.argmax(cand.real)])
    return complex(cand[np.argmin(np.abs(cand - prev_mu))])


class _SpectralOrbitSolver:
    """Shared Galerkin plumbing for periodic-orbit Newton solves."""

    def __init__(self, dim: int, max_mode: int, nonlinearity_degree: int = 3):
        self.dim = dim
        self.max_mode = max_mode
        N = 2 * nonlinearity_degree * max_mode + 2
        g = 1
        while g < N:
            g *= 2
        self.grid = max(g, 32)
        self.theta = 2 * np.pi * np.arange(self.grid) / self.grid
        self.ndof = dim * (2 * max_mode + 1)
        # grid samples of every scalar basis function (mode profile only)
        M = max_mode
        profs = [np.ones(self.grid)]
        for m in range(1, M + 1):
            profs.append(np.cos(m * self.theta))
        for m in range(1, M + 1):
            profs.append(np.sin(m * self.theta))
        self.profiles = np.array(profs)          # (2M+1, N)
        # dof k -> (profile index, component): layout matches flatten_series
        self.dof_profile = np.empty(self.ndof, dtype=int)
        self.dof_comp = np.empty(self.ndof, dtype=int)
        k = 0
        for m in range(M + 1):
            for i in range(dim):
                self.dof_profile[k] = m
                self.dof_comp[k] = i
                k += 1
        for m in range(1, M + 1):
            for i in range(dim):
                self.dof_profile[k] = M + m
                self.dof_comp[k] = i
                k += 1
        # derivative of each dof in flat coordinates (build once)
        D = np.zeros((self.ndof, self.ndof))
        for k in range(self.ndof):
            e = np.zeros(self.ndof)
            e[k] = 1.0
            D[:, k] = flatten_series(unflatten_series(e, M, dim).differentiate())
        self.derivative_matrix = D

    def project(self, grid_vals: np.ndarray) -> np.ndarray:
        return flatten_series(Fourier1D.from_grid(grid_vals, self.max_mode))

    def jacobian_action_matrix(self, Jgrid: np.ndarray) -> np.ndarray:
        """Flat matrix of z -> projection of Jgrid(theta) z(theta)."""
        out = np.empty((self.ndof, self.ndof))
        for k in range(self.ndof):
            gv = Jgrid[:, :, self.dof_comp[k]] * self.profiles[self.dof_profile[k]][:, None]
            out[:, k] = self.project(gv)
        return out


class ForcedOrbitBranch:
    """Newton continuation of 2pi-periodic responses of a forced system:
    F(v(theta), theta, lam) - v'(theta) = 0 in Galerkin form."""

    def __init__(self, system, max_mode: int = 24, newton_tol: float = 1e-11,
                 max_iter: int = 25, nonlinearity_degree: int = 3,
                 floquet_options: dict | None = None, trim_tol: float = 1e-13):
        self.system = system
        self.solver = _SpectralOrbitSolver(system.dim, max_mode, nonlinearity_degree)
        self.newton_tol = newton_tol
        self.max_iter = max_iter
        self.floquet_options = floquet_options or {}
        self.trim_tol = trim_tol

    def from_time_integration(self, lam: float, v0=None, settle_periods: int = 80,
                              rtol: float = 1e-9, atol: float = 1e-11) -> PeriodicOrbitPoint:
        """Reach an attracting response orbit by settling integration, then
        polish it with the Galerkin Newton solve."""
        from scipy.integrate import solve_ivp
        sv = self.solver
        if v0 is None:
            v0 = np.full(sv.dim, 0.1)
        T = 2 * np.pi
        sol = solve_ivp(lambda t, v: self.system.rhs(v, np.asarray(t % T), lam),
                        (0.0, settle_periods * T), np.asarray(v0, dtype=float),
                        rtol=rtol, atol=atol, dense_output=True)
        if sol.status != 0:
            raise NewtonDivergence(f"settling integration failed at lam={lam:.6g}")
        ts = sol.t[-1] - T + T * np.arange(sv.grid) / sv.grid
        guess = Fourier1D.from_grid(sol.sol(ts).T, sv.max_mode)
        return self.solve(lam, guess)

    def _residual(self, c: np.ndarray, lam: float) -> np.ndarray:
        sv = self.solver
        v = unflatten_series(c, sv.max_mode, sv.dim)
        vals = v.grid_values(sv.grid)
        F = self.system.rhs(vals, sv.theta, lam)
        return sv.project(F) - sv.derivative_matrix @ c

    def solve(self, lam: float, warm) -> PeriodicOrbitPoint:
        sv = self.solver
        if isinstance(warm, PeriodicOrbitPoint):
            guess = warm.orbit
        else:
            guess = warm
        c = flatten_series(guess.truncate(sv.max_mode).pad(sv.max_mode))
        for it in range(self.max_iter):
            r = self._residual(c, lam)
            if np.max(np.abs(r)) < self.newton_tol:
                return self._finish(c, lam, float(np.max(np.abs(r))), it)
            v = unflatten_series(c, sv.max_mode, sv.dim)
            vals = v.grid_values(sv.grid)
            Jg = self.system.jacobian(vals, sv.theta, lam)
            Jac = sv.jacobian_action_matrix(Jg) - sv.derivative_matrix
            try:
                step = np.linalg.solve(Jac, r)
            except np.linalg.LinAlgError as exc:
                raise FoldDetected(f"singular orbit linearization at lam={lam:.6g}") from exc
            c = c - step
        raise NewtonDivergence(f"orbit Newton stalled at lam={lam:.6g} "
                               f"(residual {np.max(np.abs(self._residual(c, lam))):.2e})")

    def _finish(self, c, lam, res, it) -> PeriodicOrbitPoint:
        sv = self.solver
        v = unflatten_series(c, sv.max_mode, sv.dim)
        vals = v.grid_values(sv.grid)
        Jg = self.system.jacobian(vals, sv.theta, lam)
        A = trim_series(matrix_series_from_grid(Jg, min(2 * sv.max_mode,
                                                        (sv.grid - 1) // 2)),
                        self.trim_tol)
        F = floquet_decompose(A, **self.floquet_options)
        return PeriodicOrbitPoint(lam=float(lam), orbit=v, period_scale=None,
                                  coefficient_matrix=A, floquet=F,
                                  residual_norm=res, newton_iterations=it)

    def solve_with_amplitude(self, mean_square: float, component: int,
                             lam_guess: float, warm) -> PeriodicOrbitPoint:
        """Solve for the orbit with the parameter as an extra unknown,
        pinned instead by the mean square of one state component.  Useful to
        transport an orbit through model-family ramps where the branch folds
        in the parameter."""
        sv = self.solver
        guess = warm.orbit if isinstance(warm, PeriodicOrbitPoint) else warm
        c = flatten_series(guess.truncate(sv.max_mode).pad(sv.max_mode))
        lam = float(lam_guess)
        # gradient weights of <v_comp^2> in flat coordinates
        wmask = np.zeros(sv.ndof)
        for k in range(sv.ndof):
            if sv.dof_comp[k] == component:
                wmask[k] = 2.0 if sv.dof_profile[k] == 0 else 1.0
        for it in range(self.max_iter):
            v = unflatten_series(c, sv.max_mode, sv.dim)
            comp = v.component(component)
            amp_res = inner_product_1d(comp, comp) - mean_square
            r = self._residual(c, lam)
            if max(np.max(np.abs(r)), abs(amp_res)) < self.newton_tol:
                return self._finish(c, lam, float(np.max(np.abs(r))), it)
            vals = v.grid_values(sv.grid)
            Jg = self.system.jacobian(vals, sv.theta, lam)
            Jac = np.zeros((sv.ndof + 1, sv.ndof + 1))
            Jac[:sv.ndof, :sv.ndof] = sv.jacobian_action_matrix(Jg) - sv.derivative_matrix
            Jac[:sv.ndof, -1] = sv.project(
                self.system.jacobian_lambda(vals, sv.theta, lam))
            Jac[-1, :sv.ndof] = wmask * c
            rhs = np.concatenate([r, [amp_res]])
            try:
                step = np.linalg.solve(Jac, rhs)
            except np.linalg.LinAlgError as exc:
                raise FoldDetected(f"singular bordered system at lam={lam:.6g}") from exc
            c = c - step[:-1]
            lam = lam - step[-1]
        raise NewtonDivergence(f"amplitude-pinned Newton stalled near lam={lam:.6g}")

    def monitor_pair(self, point, prev_mu):
        return _track_complex_pair(point.exponents, prev_mu)


class AutonomousOrbitBranch:
    """Newton continuation of periodic orbits of an autonomous system on
    rescaled time:  T F(v(theta), lam) - v'(theta) = 0  with an integral
    phase condition against the reference orbit's derivative."""

    def __init__(self, system, max_mode: int = 24, newton_tol: float = 1e-11,
                 max_iter: int = 25, nonlinearity_degree: int = 3,
                 floquet_options: dict | None = None, trim_tol: float = 1e-13):
        self.system = system
        self.solver = _SpectralOrbitSolver(system.dim, max_mode, nonlinearity_degree)
        self.newton_tol = newton_tol
        self.max_iter = max_iter
        self.floquet_options = floquet_options or {}
        self.trim_tol = trim_tol

    def solve(self, lam: float, warm) -> PeriodicOrbitPoint:
        sv = self.solver
        if isinstance(warm, PeriodicOrbitPoint):
            guess, T = warm.orbit, warm.period_scale
        else:
            guess, T = warm  # (Fourier1D, period scale)
        phase_ref = guess.truncate(sv.max_mode).pad(sv.max_mode).differentiate()
        wrow = np.concatenate([_inner_weight_vector(phase_ref), [0.0]])
        c = flatten_series(guess.truncate(sv.max_mode).pad(sv.max_mode))
        u = np.concatenate([c, [float(T)]])
        for it in range(self.max_iter):
            c, T = u[:-1], u[-1]
            v = unflatten_series(c, sv.max_mode, sv.dim)
            vals = v.grid_values(sv.grid)
            Fv = self.system.rhs(vals, lam)
            r_flow = T * sv.project(Fv) - sv.derivative_matrix @ c
            r_phase = wrow[:-1] @ c
            res = max(np.max(np.abs(r_flow)), abs(r_phase))
            if res < self.newton_tol:
                return self._finish(c, T, lam, res, it)
            Jg = self.system.jacobian(vals, lam)
            Jac = np.zeros((sv.ndof + 1, sv.ndof + 1))
            Jac[:sv.ndof, :sv.ndof] = T * sv.jacobian_action_matrix(Jg) - sv.derivative_matrix
            Jac[:sv.ndof, -1] = sv.project(Fv)
            Jac[-1] = wrow
            rhs = np.concatenate([r_flow, [r_phase]])
            try:
                step = np.linalg.solve(Jac, rhs)
            except np.linalg.LinAlgError as exc:
                raise FoldDetected(f"singular orbit linearization at lam={lam:.6g}") from exc
            u = u - step
        raise NewtonDivergence(f"orbit Newton stalled at lam={lam:.6g}")

    def _finish(self, c, T, lam, res, it) -> PeriodicOrbitPoint:
        sv = self.solver
        v = unflatten_series(c, sv.max_mode, sv.dim)
        vals = v.grid_values(sv.grid)
        Jg = self.system.jacobian(vals, lam)
        A = trim_series(matrix_series_from_grid(T * Jg, min(2 * sv.max_mode,
                                                            (sv.grid - 1) // 2)),
                        self.trim_tol)
        F = floquet_decompose(A, **self.floquet_options)
        return PeriodicOrbitPoint(lam=float(lam), orbit=v, period_scale=float(T),
                                  coefficient_matrix=A, floquet=F,
                                  residual_norm=res, newton_iterations=it)

    def monitor_pair(self, point, prev_mu):
        return _track_complex_pair(point.exponents, prev_mu)


# --------------------------------------------------------------------------
# walking, crossing detection, speeds
# --------------------------------------------------------------------------

def continue_through_family(make_branch, value_start: float, value_target: float,
                            lam: float, start, step: float = 0.5,
                            min_step: float = 1e-6):
    """Warm-started orbit continuation in an auxiliary model parameter at
    fixed lam (e.g. ramping a nonlinearity strength from an exactly known
    orbit).  make_branch(value) must return a branch over the same state
    space; returns the accepted point at value_target."""
    val = value_start
    pt = make_branch(val).solve(lam, start)
    direction = 1.0 if value_target >= val else -1.0
    dv = abs(step)
    while (value_target - val) * direction > 1e-14:
        dv = min(dv, abs(value_target - val))
        try:
            nxt = make_branch(val + direction * dv).solve(lam, pt)
        except NewtonDivergence:
            dv /= 2
            if dv < min_step:
                raise
            continue
        pt = nxt
        val = val + direction * dv
        dv = min(2 * dv, abs(step))
    return pt


def continue_branch(branch, start, lam_target: float, step: float = 0.1,
                    min_step: float = 1e-8, log=None) -> list:
    """Walk a branch from an accepted point to lam_target with fixed steps,
    halving on Newton failure."""
    points = [start]
    lam = start.lam
    direction = 1.0 if lam_target >= lam else -1.0
    dl = abs(step)
    while (lam_target - lam) * direction > 1e-14:
        dl = min(dl, abs(lam_target - lam))
        try:
            pt = branch.solve(lam + direction * dl, points[-1])
        except NewtonDivergence:
            dl /= 2
            if dl < min_step:
                raise
            continue
        points.append(pt)
        lam = pt.lam
        if log is not None:
            mu = branch.monitor_pair(pt, None)
            log.write(f"{lam:.17g},{pt.residual_norm:.3e},"
                      f"{'' if mu is None else f'{mu.real:.17g}'},"
                      f"{'' if mu is None else f'{mu.imag:.17g}'}\n")
        dl = min(2 * dl, abs(step))
    return points


def detect_crossing(branch, start, lam_target: float, step: float = 0.1,
                    secant_tol: float = 1e-10, max_secant: int = 50,
                    min_step: float = 1e-8, log=None) -> CrossingEvent:
    """Scan for a sign change of the followed pair's real part, then refine
    the crossing parameter by secant iteration."""
    lam = start.lam
    direction = 1.0 if lam_target >= lam else -1.0
    dl = abs(step)
    prev_point = start
    prev_mu = branch.monitor_pair(start, None)
    while (lam_target - lam) * direction > 1e-14:
        dl_eff = min(dl, abs(lam_target - lam))
        try:
            pt = branch.solve(lam + direction * dl_eff, prev_point)
        except NewtonDivergence:
            dl /= 2
            if dl < min_step:
                raise
            continue
        mu = branch.monitor_pair(pt, prev_mu)
        if log is not None:
            log.write(f"{pt.lam:.17g},{pt.residual_norm:.3e},"
                      f"{'' if mu is None else f'{mu.real:.17g}'},"
                      f"{'' if mu is None else f'{mu.imag:.17g}'}\n")
        if prev_mu is not None and mu is not None and prev_mu.real * mu.real < 0:
            return _secant_refine(branch, prev_point, prev_mu, pt, mu,
                                  secant_tol, max_secant)
        lam = pt.lam
        prev_point, prev_mu = pt, mu
        dl = min(2 * dl, abs(step))
    raise NoSignChange(f"followed pair's real part kept its sign on "
                       f"[{start.lam:.6g}, {lam_target:.6g}]")


def _secant_refine(branch, p0, mu0, p1, mu1, tol, max_iter) -> CrossingEvent:
    la, fa, pa = p0.lam, mu0.real, p0
    lb, fb, pb = p1.lam, mu1.real, p1
    mu_ref = mu1
    for _ in range(max_iter):
        lc = lb - fb * (lb - la) / (fb - fa)
        # warm start from the nearer accepted point
        warm = pa if abs(lc - la) < abs(lc - lb) else pb
        pc = branch.solve(lc, warm)
        mu = branch.monitor_pair(pc, mu_ref)
        if mu is None:
            raise SecantStall("followed pair vanished during refinement")
        if abs(mu.real) < tol:
            return CrossingEvent(lam_star=float(lc), omega_star=float(mu.imag),
                                 critical_exponent=mu, point=pc)
        la, fa, pa = lb, fb, pb
        lb, fb, pb = lc, mu.real, pc
        mu_ref = mu
    raise SecantStall(f"no convergence in {max_iter} secant steps "
                      f"(last Re = {fb:.2e})")


def track_crossing_through_family(make_branch, value_start: float,
                                  value_target: float, event: CrossingEvent,
                                  scan_range: float = 0.35,
                                  scan_step: float = 0.02,
                                  family_step: float = 0.5,
                                  min_family_step: float = 0.01):
    """Follow a critical crossing while an auxiliary model parameter is
    ramped: at each family value the crossing parameter is re-located by a
    directed scan around the previous one.  Returns (branch, event) at
    value_target."""
    val = value_start
    while (value_target - val) * np.sign(value_target - value_start) > 1e-14:
        dv = min(family_step, abs(value_target - val))
        sgn = np.sign(value_target - value_start)
        while True:
            br = make_branch(val + sgn * dv)
            try:
                pt = br.solve(event.lam_star, event.point)
                mu = br.monitor_pair(pt, event.critical_exponent)
                if mu is None:
                    raise NoSignChange("followed pair lost at the new family value")
                up = event.lam_star + scan_range
                down = event.lam_star - scan_range
                first, second = (up, down) if mu.real > 0 else (down, up)
                try:
                    ev2 = detect_crossing(br, pt, first, step=scan_step)
                except NoSignChange:
                    ev2 = detect_crossing(br, pt, second, step=scan_step)
                break
            except (NoSignChange, NewtonDivergence, SecantStall):
                dv /= 2
                if dv < min_family_step:
                    raise
        val += sgn * dv
        event = ev2
    return make_branch(val), event


def crossing_speed(branch, event: CrossingEvent, h: float) -> tuple[float, float]:
    """Centered-difference derivative of the critical exponent in lam."""
    pp = branch.solve(event.lam_star + h, event.point)
    pm = branch.solve(event.lam_star - h, event.point)
    mu_p = branch.monitor_pair(pp, event.critical_exponent)
    mu_m = branch.monitor_pair(pm, event.critical_exponent)
    if mu_p is None or mu_m is None:
        raise NoSignChange("followed pair lost while estimating the speed")
    d = (mu_p - mu_m) / (2 * h)
    return float(d.real), float(d.imag)


def crossing_speed_study(branch, event: CrossingEvent,
                         hs=(0.1, 0.01, 0.001)) -> CrossingEvent:
    """Speed estimates over a step ladder; the finest step's values are
    stored as the event's speeds."""
    rows = []
    for h in hs:
        re, im = crossing_speed(branch, event, h)
        rows.append((float(h), re, im))
    return replace(event, a_dot_real=rows[-1][1], a_dot_imag=rows[-1][2],
                   speed_table=tuple(rows))


# --------------------------------------------------------------------------
# smooth frame continuation
# --------------------------------------------------------------------------

def _pair_overlap(c1p, c2p, c1n, c2n) -> complex:
    """Hermitian overlap of two 2-column rotation frames."""
    return complex(
        inner_product_1d(c1p, c1n) + inner_product_1d(c2p, c2n),
        inner_product_1d(c1p, c2n) - inner_product_1d(c2p, c1n))


def _block_sizes(S: SubspaceDecomposition) -> list[int]:
    sizes = [2]
    i = 0
    while i < S.n_hyperbolic:
        if abs(S.exponents[2 + i].imag) > 0:
            sizes.append(2)
            i += 2
        else:
            sizes.append(1)
            i += 1
    if S.has_zero_column:
        sizes.append(1)
    return sizes


def continue_subspace(prev: SubspaceDecomposition, new: SubspaceDecomposition,
                      min_overlap: float = 0.5) -> SubspaceDecomposition:
    """Align a freshly computed frame to the previous parameter value's:
    match hyperbolic blocks by maximal overlap, rotate each complex pair
    and flip real column signs so the frame varies smoothly.  The defining
    relation is untouched (all fixes are block similarities)."""
    if (prev.dim != new.dim or prev.has_zero_column != new.has_zero_column):
        raise SubspaceSwap("frame layouts differ between parameter values")
    sizes_p = _block_sizes(prev)
    sizes_n = _block_sizes(new)
    if sizes_p != sizes_n:
        raise SubspaceSwap(f"block layout changed: {sizes_p} -> {sizes_n}")

    n = new.dim
    starts = np.concatenate([[0], np.cumsum(sizes_n)])[:-1]

    def block_cols(S, b):
        j0 = starts[b]
        if sizes_n[b] == 1:
            return (S.columns([j0]),)
        return (S.columns([j0]), S.columns([j0 + 1]))

    # match: block 0 (critical) is pinned; others matched among same sizes
    order = [0]
    used = {0}
    for bp in range(1, len(sizes_p)):
        best, best_val = None, -1.0
        for bn in range(1, len(sizes_n)):
            if bn in used or sizes_n[bn] != sizes_p[bp]:
                continue
            cp = block_cols(prev, bp)
            cn = block_cols(new, bn)
            if sizes_p[bp] == 1:
                val = abs(inner_product_1d(cp[0], cn[0])) / (cp[0].norm() * cn[0].norm())
            else:
                h = _pair_overlap(cp[0], cp[1], cn[0], cn[1])
                np_ = np.sqrt(cp[0].norm() ** 2 + cp[1].norm() ** 2)
                nn_ = np.sqrt(cn[0].norm() ** 2 + cn[1].norm() ** 2)
                val = abs(h) / (np_ * nn_)
            if val > best_val:
                best, best_val = bn, val
        if best is None or best_val < min_overlap:
            raise SubspaceSwap(f"no matching block for previous block {bp} "
                               f"(best overlap {best_val:.3f})")
        order.append(best)
        used.add(best)

    # assemble aligned columns and E blocks
    new_cols: list[Fourier1D] = []
    E_blocks: list[np.ndarray] = []
    expo: list[complex] = []
    for bp, bn in enumerate(order):
        j0 = starts[bn]
        if sizes_n[bn] == 1:
            c = new.columns([j0])
            cp = block_cols(prev, bp)[0]
            ov = inner_product_1d(cp, c) / (cp.norm() * c.norm())
            if abs(ov) < min_overlap:
                raise SubspaceSwap(f"column overlap {abs(ov):.3f} below threshold")
            if ov < 0:
                c = -c
            new_cols.append(c)
            E_blocks.append(np.array([[new.E[j0, j0]]]))
            expo.append(new.exponents[j0])
        else:
            c1, c2 = block_cols(new, bn)
            p1, p2 = block_cols(prev, bp)
            h = _pair_overlap(p1, p2, c1, c2)
            np_ = np.sqrt(p1.norm() ** 2 + p2.norm() ** 2)
            nn_ = np.sqrt(c1.norm() ** 2 + c2.norm() ** 2)
            if abs(h) / (np_ * nn_) < min_overlap:
                raise SubspaceSwap(f"pair overlap {abs(h) / (np_ * nn_):.3f} below threshold")
            w = np.conj(h) / abs(h)
            cw, sw = w.real, w.imag
            a1 = cw * c1 - sw * c2
            a2 = sw * c1 + cw * c2
            new_cols.extend([a1, a2])
            E_blocks.append(new.E[j0:j0 + 2, j0:j0 + 2])
            expo.extend(new.exponents[j0:j0 + 2])

    M = max(c.max_mode for c in new_cols)
    a = np.zeros((M + 1, n * n))
    b = np.zeros_like(a)
    for j, c in enumerate(new_cols):
        cpad = c.pad(M)
        for r in range(n):
            a[:, r * n + j] = cpad.a[:, r]
            b[:, r * n + j] = cpad.b[:, r]
    E = np.zeros((n, n))
    pos = 0
    for blk in E_blocks:
        w_ = blk.shape[0]
        E[pos:pos + w_, pos:pos + w_] = blk
        pos += w_
    return SubspaceDecomposition(
        dim=n, alpha_real=new.alpha_real, alpha_imag=new.alpha_imag,
        E=E, P=Fourier1D(a, b), n_hyperbolic=new.n_hyperbolic,
        has_zero_column=new.has_zero_column, exponents=np.array(expo))
