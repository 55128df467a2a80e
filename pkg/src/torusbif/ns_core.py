"""Invariant 2-tori branching from a periodic orbit that loses stability
through a complex Floquet pair: structural gates, the two-angle low-mode
Galerkin solve, cubic normal-form extraction, and the high-mode torus
iteration carried out in near-identity transformed variables.

Both drive variants are covered.  For a periodically forced system the
critical orbit is an entrained response and the second angle is the drive
phase; for an autonomous system the orbit carries its own phase direction,
and an extra scalar unknown corrects the angular speed along it.  The two
paths share the grid evaluators and differ only where the time
reparametrization and the phase-direction bookkeeping enter.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .floquet import (SubspaceDecomposition, matrix_series_grid,
                      split_invariant_subspaces)
from .fourier import Fourier1D, Fourier2D, ModePolynomialMap, _grid_size
from .orbits import (AutonomousOrbitBranch, CrossingEvent, NewtonDivergence,
                     _SpectralOrbitSolver, continue_subspace, crossing_speed,
                     unflatten_series)

__all__ = [
    "GateFailure",
    "IterationDivergence",
    "DegenerateLyapunovWarning",
    "ResonanceProximity",
    "AssumptionReport",
    "NSProblem",
    "ns_problem_from_crossing",
    "check_assumptions",
    "NSGalerkinM3Solution",
    "solve_ns_m3",
    "NSNormalForm",
    "extract_ns_normal_form",
    "TorusApproximation",
    "compute_torus",
    "torus_embed",
    "torus_invariance_residual",
    "normal_form_insertion_residuals",
    "torus_dump",
]


class GateFailure(RuntimeError):
    """A structural assumption required by the torus construction fails.
    The offending report rides along as ``.report``."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class IterationDivergence(RuntimeError):
    """The torus sweep stopped contracting (or a guard tripped); the last
    ratio of successive coefficient changes rides along."""

    def __init__(self, message: str, contraction_ratio: float | None = None):
        super().__init__(message)
        self.contraction_ratio = contraction_ratio


class DegenerateLyapunovWarning(UserWarning):
    """The cubic radial coefficient is numerically indistinguishable from
    zero; branch direction and torus existence are then undecided at this
    order."""


# --------------------------------------------------------------------------
# problem container
# --------------------------------------------------------------------------

class NSProblem:
    """A torus-birth candidate pinned to its critical periodic orbit.

    Bundles the orbit branch (re-solves at nearby parameter values), the
    refined crossing data, and the invariant-subspace frame at the critical
    parameter.  Frames at other parameter values are aligned against that
    anchor, so every lam-dependent quantity behaves as a plain smooth
    function of lam with no path dependence.  Orbit re-solves always
    warm-start from the critical point itself; for the autonomous variant
    this keeps the phase pinned to one section of the orbit family.
    """

    def __init__(self, variant: str, branch, crossing: CrossingEvent,
                 frame_star: SubspaceDecomposition | None,
                 a_dot_real: float, a_dot_imag: float,
                 strong_res_tol: float = 1e-3):
        if variant not in ("forced", "autonomous"):
            raise ValueError(f"unknown variant {variant!r}")
        self.variant = variant
        self.branch = branch
        self.crossing = crossing
        self.frame_star = frame_star
        self.a_dot_real = float(a_dot_real)
        self.a_dot_imag = float(a_dot_imag)
        self.strong_res_tol = float(strong_res_tol)
        self.point_star = crossing.point
        self._points: dict[float, object] = {}
        self._frames: dict[float, SubspaceDecomposition] = {}
        self._grids: dict[tuple, "_FrameGridData"] = {}
        if self.point_star is not None:
            self._points[float(crossing.lam_star)] = self.point_star
        if frame_star is not None:
            self._frames[float(crossing.lam_star)] = frame_star

    # -- basic queries -----------------------------------------------------

    @property
    def autonomous(self) -> bool:
        return self.variant == "autonomous"

    @property
    def system(self):
        return self.branch.system

    @property
    def dim(self) -> int:
        return self.branch.system.dim

    @property
    def lam_star(self) -> float:
        return float(self.crossing.lam_star)

    @property
    def omega_star(self) -> float:
        return float(self.crossing.omega_star)

    @property
    def n_hyperbolic(self) -> int:
        return self.frame_star.n_hyperbolic

    # -- lam-dependent data ------------------------------------------------

    def point(self, lam: float):
        lam = float(lam)
        pt = self._points.get(lam)
        if pt is None:
            pt = self.branch.solve(lam, self.point_star)
            self._points[lam] = pt
        return pt

    def frame(self, lam: float) -> SubspaceDecomposition:
        lam = float(lam)
        fr = self._frames.get(lam)
        if fr is None:
            pt = self.point(lam)
            raw = split_invariant_subspaces(pt.floquet,
                                            expects_zero=self.autonomous)
            fr = continue_subspace(self.frame_star, raw)
            if self.autonomous:
                # the phase column must be the orbit's exact angular
                # derivative so the speed-correction unknown acts as a pure
                # reparametrization
                fr = fr.replace_column(self.dim - 1, pt.orbit.differentiate())
            self._frames[lam] = fr
        return fr

    def _grid_data(self, lam: float, N1: int) -> "_FrameGridData":
        key = (float(lam), int(N1))
        gd = self._grids.get(key)
        if gd is None:
            gd = _FrameGridData(self, float(lam), int(N1))
            self._grids[key] = gd
        return gd

    def coordinate_band(self) -> int:
        """Largest angular mode carried by the critical orbit or its frame."""
        return max(self.point_star.orbit.max_mode, self.frame_star.P.max_mode)


def ns_problem_from_crossing(branch, crossing: CrossingEvent,
                             strong_res_tol: float = 1e-3,
                             speed_step: float = 1e-4) -> NSProblem:
    """Assemble the torus-birth problem data from a refined crossing.

    The crossing speed is reused when the event already carries it and
    measured by centered differences otherwise.
    """
    variant = "autonomous" if isinstance(branch, AutonomousOrbitBranch) else "forced"
    if crossing.a_dot_real is not None and crossing.a_dot_imag is not None:
        a_re, a_im = crossing.a_dot_real, crossing.a_dot_imag
    else:
        a_re, a_im = crossing_speed(branch, crossing, speed_step)
    raw = split_invariant_subspaces(crossing.point.floquet,
                                    expects_zero=(variant == "autonomous"))
    if variant == "autonomous":
        raw = raw.replace_column(branch.system.dim - 1,
                                 crossing.point.orbit.differentiate())
    return NSProblem(variant, branch, crossing, raw, a_re, a_im,
                     strong_res_tol=strong_res_tol)


class _FrameGridData:
    """theta-grid samples of everything the rescaled field needs at one lam.

    Series whose band exceeds the grid are truncated to fit; their tails sit
    at the branch trim level and are far below every tolerance in play.
    """

    def __init__(self, problem: NSProblem, lam: float, N1: int):
        pt = problem.point(lam)
        fr = problem.frame(lam)
        n = problem.dim
        cap = (N1 - 1) // 2
        self.lam = lam
        self.theta = 2.0 * np.pi * np.arange(N1) / N1
        self.vstar = pt.orbit.truncate(min(pt.orbit.max_mode, cap)).grid_values(N1)
        P_series = fr.P.truncate(min(fr.P.max_mode, cap))
        self.P = matrix_series_grid(P_series, N1, n, n)
        dP = matrix_series_grid(P_series.differentiate(), N1, n, n)
        self.P_inv_dP = np.linalg.solve(self.P, dP)
        self.period_scale = pt.period_scale
        if problem.variant == "forced":
            self.rhs_star = problem.system.rhs(self.vstar, self.theta, lam)
        else:
            self.rhs_star = problem.system.rhs(self.vstar, lam)
        self.point = pt
        self.frame = fr


# --------------------------------------------------------------------------
# structural gates
# --------------------------------------------------------------------------

_STRONG_RESONANCES = (1.0 / 3.0, 0.25)


@dataclass(frozen=True)
class ResonanceProximity:
    """One low-order rational rotation number and its distance to the
    crossing frequency; ``mode_offset`` is the rotation-harmonic index whose
    coupling would resonate there."""

    numerator: int
    mode_offset: int
    value: float
    distance: float


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the structural checks behind the torus construction.

    A report, not an error: producing it never raises.  Operations further
    down the pipeline refuse to run while ``passed`` is false.
    """

    omega_star: float
    a_dot_real: float
    rotation_in_range: bool
    transversal: bool
    strong_resonance_ok: bool
    strong_resonance_distance: float
    nearest_resonances: tuple[ResonanceProximity, ...]
    strong_res_tol: float

    @property
    def passed(self) -> bool:
        return (self.rotation_in_range and self.transversal
                and self.strong_resonance_ok)

    def failure_text(self) -> str:
        parts = []
        if not self.rotation_in_range:
            parts.append(f"rotation number {self.omega_star:.6g} outside (0, 1/2)")
        if not self.transversal:
            parts.append("crossing speed vanishes (no transversality)")
        if not self.strong_resonance_ok:
            parts.append(
                f"rotation number {self.omega_star:.6g} within "
                f"{self.strong_res_tol:g} of a strong resonance "
                f"(distance {self.strong_resonance_distance:.3g})")
        return "; ".join(parts) if parts else "all gates passed"


def check_assumptions(problem) -> AssumptionReport:
    """Verify the structural assumptions at a detected crossing.

    Checks that the rotation number sits strictly inside (0, 1/2), that the
    critical pair crosses with nonzero speed, and that the rotation number
    keeps its distance from the strong resonances 1/3 and 1/4; low-order
    rational rotation numbers near the crossing are listed for inspection
    either way.
    """
    om = float(problem.omega_star)
    ar = problem.a_dot_real
    ar = float(ar) if ar is not None else float("nan")
    tol = float(getattr(problem, "strong_res_tol", 1e-3))
    in_range = 0.0 < om < 0.5
    transversal = bool(np.isfinite(ar)) and ar != 0.0
    sd = min(abs(om - v) for v in _STRONG_RESONANCES)

    # the rationals ell/(1-m) are where the harmonic-m coupling of the
    # two-angle linearization loses invertibility at cubic order
    seen: dict[float, tuple] = {}
    for m in range(-3, 5):
        if m == 1:
            continue
        q = 1 - m
        for ell in range(-4, 5):
            v = ell / q
            if not 0.0 < v <= 0.5:
                continue
            key = round(v, 12)
            rank = (abs(q), abs(ell))
            if key not in seen or rank < seen[key][0]:
                seen[key] = (rank, ResonanceProximity(ell, m, v, abs(om - v)))
    near = tuple(sorted((r for _, r in seen.values()),
                        key=lambda r: r.distance)[:5])
    return AssumptionReport(
        omega_star=om, a_dot_real=ar, rotation_in_range=in_range,
        transversal=transversal, strong_resonance_ok=sd >= tol,
        strong_resonance_distance=float(sd), nearest_resonances=near,
        strong_res_tol=tol)


def _require_gates(problem, what: str) -> AssumptionReport:
    report = check_assumptions(problem)
    if not report.passed:
        raise GateFailure(f"refusing {what}: {report.failure_text()}", report)
    return report


# --------------------------------------------------------------------------
# two-angle series plumbing
# --------------------------------------------------------------------------

_STACK_KEYS = ((0, "cos"), (1, "cos"), (1, "sin"),
               (2, "cos"), (2, "sin"), (3, "cos"), (3, "sin"))

_POLY_GRAD = {
    (0, "cos"): lambda y1, y2: (2.0 * y1, 2.0 * y2),
    (2, "cos"): lambda y1, y2: (2.0 * y1, -2.0 * y2),
    (2, "sin"): lambda y1, y2: (2.0 * y2, 2.0 * y1),
    (1, "cos"): lambda y1, y2: (3.0 * y1 * y1 + y2 * y2, 2.0 * y1 * y2),
    (1, "sin"): lambda y1, y2: (2.0 * y1 * y2, y1 * y1 + 3.0 * y2 * y2),
    (3, "cos"): lambda y1, y2: (3.0 * (y1 * y1 - y2 * y2), -6.0 * y1 * y2),
    (3, "sin"): lambda y1, y2: (6.0 * y1 * y2, 3.0 * (y1 * y1 - y2 * y2)),
}


def _two_sided_modes(z: Fourier1D) -> np.ndarray:
    """Complex coefficients indexed ell = -M..M along axis 0."""
    c = z.complex_modes()
    M = z.max_mode
    out = np.zeros((2 * M + 1, z.dim), dtype=complex)
    out[M:] = c
    if M:
        out[:M] = np.conj(c[:0:-1])
    return out


def _blocks_to_fourier2d(profiles, L: int, dim: int) -> Fourier2D:
    """Assemble a two-angle series from per-harmonic theta-profiles
    (ordered as _STACK_KEYS, rotation modes up to 3)."""
    c = np.zeros((2 * L + 1, 7, dim), dtype=complex)
    for (m, kind), prof in zip(_STACK_KEYS, profiles):
        two = _two_sided_modes(prof.pad(L))
        if m == 0:
            c[:, 3] += two
        elif kind == "cos":
            c[:, 3 + m] += 0.5 * two
            c[:, 3 - m] += 0.5 * two
        else:
            c[:, 3 + m] += -0.5j * two
            c[:, 3 - m] += 0.5j * two
    return Fourier2D(c)


def _harmonic_profile(z: Fourier2D, m: int, kind: str) -> Fourier1D:
    """theta-profile of the rotation-angle harmonic cos(m phi) / sin(m phi)."""
    L, Mp = z.max_mode_theta, z.max_mode_phi
    if m > Mp:
        return Fourier1D.zeros(0, z.dim)
    C = z.c[:, Mp + m, :]
    ks = np.arange(L + 1)
    if m == 0:
        q = C[L + ks]
    elif kind == "cos":
        q = C[L + ks] + np.conj(C[L - ks])
    else:
        q = 1j * (C[L + ks] - np.conj(C[L - ks]))
    return Fourier1D.from_complex_modes(q)


def _eval_2d(z: Fourier2D, thetas: np.ndarray, phis: np.ndarray) -> np.ndarray:
    """Pointwise samples on an arbitrary tensor grid (no projection, so no
    resolution requirement on the sample counts)."""
    L, M = z.max_mode_theta, z.max_mode_phi
    el = np.exp(1j * np.outer(thetas, np.arange(-L, L + 1)))
    em = np.exp(1j * np.outer(phis, np.arange(-M, M + 1)))
    return np.real(np.einsum("al,bm,lmn->abn", el, em, z.c))


# --------------------------------------------------------------------------
# the rescaled vector field on tensor grids
# --------------------------------------------------------------------------

def _time_factor(eps: float, eta):
    if eta is None:
        return 1.0
    eta = np.asarray(eta) if np.ndim(eta) else eta
    return 1.0 + eps * eta


def _rescaled_field_grid(problem: NSProblem, gd: _FrameGridData,
                        z: np.ndarray, eps: float, eta=None) -> np.ndarray:
    """Samples of the frame-coordinate rescaled field on the tensor grid.

    ``z`` has shape (N1, N2, n).  ``eta`` (autonomous only; scalar or an
    (N1, N2) field) scales the frame-drift term exactly as it scales the
    angular derivative in the fixed-point equations.  At eps = 0 the exact
    linear limit is returned.
    """
    N1, N2, n = z.shape
    sysm = problem.system
    fac = _time_factor(eps, eta)
    facv = fac[..., None] if np.ndim(fac) else fac
    drift = facv * np.einsum("xij,xyj->xyi", gd.P_inv_dP, z)
    if eps == 0.0:
        if problem.variant == "forced":
            Jg = sysm.jacobian(gd.vstar, gd.theta, gd.lam)
        else:
            Jg = gd.period_scale * sysm.jacobian(gd.vstar, gd.lam)
        B = np.linalg.solve(gd.P, Jg @ gd.P)
        return np.einsum("xij,xyj->xyi", B, z) - drift
    x = gd.vstar[:, None, :] + eps * np.einsum("xij,xyj->xyi", gd.P, z)
    if problem.variant == "forced":
        th = np.broadcast_to(gd.theta[:, None], (N1, N2))
        diff = sysm.rhs(x, th, gd.lam) - gd.rhs_star[:, None, :]
    else:
        diff = gd.period_scale * (sysm.rhs(x, gd.lam) - gd.rhs_star[:, None, :])
    return np.linalg.solve(gd.P[:, None], diff[..., None])[..., 0] / eps - drift


def _field_jacobian_grid(problem: NSProblem, gd: _FrameGridData,
                        z: np.ndarray, eps: float, eta=None) -> np.ndarray:
    """Pointwise state-derivative of the rescaled field, (N1, N2, n, n)."""
    N1, N2, n = z.shape
    sysm = problem.system
    fac = _time_factor(eps, eta)
    facm = fac[..., None, None] if np.ndim(fac) else fac
    if eps == 0.0:
        x = np.broadcast_to(gd.vstar[:, None, :], z.shape)
    else:
        x = gd.vstar[:, None, :] + eps * np.einsum("xij,xyj->xyi", gd.P, z)
    if problem.variant == "forced":
        th = np.broadcast_to(gd.theta[:, None], (N1, N2))
        Jg = sysm.jacobian(x, th, gd.lam)
    else:
        Jg = gd.period_scale * sysm.jacobian(x, gd.lam)
    B = np.linalg.solve(gd.P[:, None], Jg @ gd.P[:, None])
    return B - facm * gd.P_inv_dP[:, None]


# --------------------------------------------------------------------------
# the low-mode two-angle solve
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NSGalerkinM3Solution:
    """Converged two-angle Galerkin solution at rotation-harmonic cutoff 3.

    ``z`` carries the full coefficient function in frame coordinates -- the
    leading circle (cos phi, sin phi, 0, ...) plus all corrections.  ``eta``
    is the angular-speed correction of the autonomous variant (None when
    the system is forced).
    """

    eps: float
    lam: float
    omega: float
    eta: float | None
    z: Fourier2D
    residual_norm: float
    newton_iterations: int

    def harmonic(self, m: int, kind: str = "cos") -> Fourier1D:
        """theta-profile multiplying cos(m phi) (or sin with kind="sin")."""
        return _harmonic_profile(self.z, m, kind)

    def correction(self, m: int, kind: str = "cos") -> Fourier1D:
        """``harmonic`` with the leading circle removed (mode 1 only)."""
        prof = self.harmonic(m, kind)
        if m == 1:
            e = np.zeros(prof.dim)
            e[0 if kind == "cos" else 1] = 1.0
            prof = prof - Fourier1D.constant(e)
        return prof


def _circle_blocks(n: int, L: int) -> list[np.ndarray]:
    ndof1 = n * (2 * L + 1)
    blocks = [np.zeros(ndof1) for _ in _STACK_KEYS]
    blocks[1][0] = 1.0          # cos phi carries e1
    blocks[2][1] = 1.0          # sin phi carries e2
    return blocks


def solve_ns_m3(problem: NSProblem, eps: float, max_theta_mode: int = 24,
                newton_tol: float = 1e-10, max_iter: int = 40) -> NSGalerkinM3Solution:
    """Newton-solve the rescaled two-angle system truncated at rotation
    harmonics <= 3 and orbit-angle modes <= ``max_theta_mode``.

    Unknowns are the seven harmonic theta-profiles of the coefficient
    function, the parameter, the rotation frequency and (autonomous
    variant) the angular-speed correction; two scalar rows pin amplitude
    and phase of the leading rotation harmonic, and the autonomous variant
    adds a mean condition along the orbit's phase direction.  Starts from
    the leading circle at the crossing.  The residual floor scales like
    machine epsilon over eps, so very small amplitudes need a loosened
    ``newton_tol``.
    """
    _require_gates(problem, "the low-mode torus solve")
    eps = float(eps)
    if eps < 0.0:
        raise ValueError(f"amplitude must be nonnegative, got {eps}")
    n = problem.dim
    L = int(max_theta_mode)
    aut = problem.autonomous
    lam_star, omega_star = problem.lam_star, problem.omega_star

    if eps == 0.0:
        profiles = [unflatten_series(b, L, n) for b in _circle_blocks(n, L)]
        return NSGalerkinM3Solution(
            eps=0.0, lam=lam_star, omega=omega_star,
            eta=0.0 if aut else None,
            z=_blocks_to_fourier2d(profiles, L, n),
            residual_norm=0.0, newton_iterations=0)

    # alias control: the spectral solver's grid must also resolve the
    # orbit/frame band riding on top of the unknowns' band
    band = problem.coordinate_band()
    deg = max(3, -(-(L + band) // max(L, 1)))
    sv = _SpectralOrbitSolver(n, L, nonlinearity_degree=deg)
    N1 = sv.grid
    N2 = 16
    phi = 2.0 * np.pi * np.arange(N2) / N2
    trig = np.array([ModePolynomialMap.trig(m, kind, phi)
                     for m, kind in _STACK_KEYS])              # (7, N2)
    projw = trig / N2
    projw[1:] *= 2.0
    D = sv.derivative_matrix
    ndof1 = sv.ndof
    NT = 7 * ndof1
    nsc = 3 if aut else 2
    e_n_flat = np.zeros(ndof1)
    e_n_flat[n - 1] = 1.0

    blocks = _circle_blocks(n, L)
    lam, om = lam_star, omega_star
    eta = 0.0

    def z_grid_of(blks):
        Sg = np.stack([unflatten_series(b, L, n).grid_values(N1) for b in blks])
        return np.einsum("hxn,hj->xjn", Sg, trig)

    def project_field(G):
        return [sv.project(np.einsum("xyn,y->xn", G, projw[h]))
                for h in range(7)]

    def galerkin_residual(blks, zg, lam_v, om_v, eta_v):
        gd = problem._grid_data(lam_v, N1)
        G = _rescaled_field_grid(problem, gd, zg, eps,
                                 eta_v if aut else None)
        gal = project_field(G)
        tf = 1.0 + eps * eta_v if aut else 1.0
        out = []
        for h, (m, kind) in enumerate(_STACK_KEYS):
            r = gal[h] - tf * (D @ blks[h])
            if m:
                if kind == "cos":
                    r = r - om_v * m * blks[h + 1]
                else:
                    r = r + om_v * m * blks[h - 1]
            out.append(r)
        if aut:
            out[0] = out[0] - eta_v * e_n_flat
        return np.concatenate(out)

    res = np.inf
    for it in range(max_iter):
        zg = z_grid_of(blocks)
        r_gal = galerkin_residual(blocks, zg, lam, om, eta)
        r_amp = 0.5 * (blocks[1][0] + blocks[2][1]) - 1.0
        r_phase = 0.5 * (blocks[1][1] - blocks[2][0])
        scal = [r_amp, r_phase]
        if aut:
            scal.append(blocks[0][n - 1])
        res = max(np.max(np.abs(r_gal)), max(abs(s) for s in scal))
        if not np.isfinite(res):
            raise NewtonDivergence(f"residual blew up at iteration {it}")
        if res < newton_tol:
            profiles = [unflatten_series(b, L, n) for b in blocks]
            return NSGalerkinM3Solution(
                eps=eps, lam=float(lam), omega=float(om),
                eta=float(eta) if aut else None,
                z=_blocks_to_fourier2d(profiles, L, n),
                residual_norm=float(res), newton_iterations=it)

        gd = problem._grid_data(lam, N1)
        W = _field_jacobian_grid(problem, gd, zg, eps, eta if aut else None)
        tf = 1.0 + eps * eta if aut else 1.0
        Jac = np.zeros((NT + nsc, NT + nsc))
        for hp in range(7):
            wrow = projw[hp]
            for h in range(7):
                C = np.einsum("j,xjab->xab", wrow * trig[h], W)
                Jac[hp * ndof1:(hp + 1) * ndof1,
                    h * ndof1:(h + 1) * ndof1] = sv.jacobian_action_matrix(C)
        for h, (m, kind) in enumerate(_STACK_KEYS):
            sl = slice(h * ndof1, (h + 1) * ndof1)
            Jac[sl, sl] -= tf * D
            if m:
                if kind == "cos":
                    Jac[sl, (h + 1) * ndof1:(h + 2) * ndof1] -= om * m * np.eye(ndof1)
                else:
                    Jac[sl, (h - 1) * ndof1:h * ndof1] += om * m * np.eye(ndof1)

        # parameter column by centered differences (the stationary family
        # and its frame are not analytically differentiable here)
        h_fd = 1e-6 * max(1.0, abs(lam))
        rp = galerkin_residual(blocks, zg, lam + h_fd, om, eta)
        rm = galerkin_residual(blocks, zg, lam - h_fd, om, eta)
        Jac[:NT, NT] = (rp - rm) / (2.0 * h_fd)
        # frequency column
        om_col = np.zeros(NT)
        for h, (m, kind) in enumerate(_STACK_KEYS):
            if not m:
                continue
            sl = slice(h * ndof1, (h + 1) * ndof1)
            if kind == "cos":
                om_col[sl] = -m * blocks[h + 1]
            else:
                om_col[sl] = m * blocks[h - 1]
        Jac[:NT, NT + 1] = om_col
        if aut:
            # speed-correction column: the drift term, the phase-direction
            # unit load, and the eps-scaled angular derivative all carry eta
            drift = np.einsum("xij,xyj->xyi", gd.P_inv_dP, zg)
            eta_col = np.concatenate(project_field(-eps * drift))
            for h in range(7):
                sl = slice(h * ndof1, (h + 1) * ndof1)
                eta_col[sl] -= eps * (D @ blocks[h])
            eta_col[:ndof1] -= e_n_flat
            Jac[:NT, NT + 2] = eta_col

        Jac[NT, ndof1] = 0.5
        Jac[NT, 2 * ndof1 + 1] = 0.5
        Jac[NT + 1, ndof1 + 1] = 0.5
        Jac[NT + 1, 2 * ndof1] = -0.5
        if aut:
            Jac[NT + 2, n - 1] = 1.0

        rhs = np.concatenate([r_gal, scal])
        try:
            step = np.linalg.solve(Jac, rhs)
        except np.linalg.LinAlgError as exc:
            raise NewtonDivergence(
                f"singular two-angle linearization at lam={lam:.6g}") from exc
        flat = np.concatenate(blocks) - step[:NT]
        blocks = [flat[h * ndof1:(h + 1) * ndof1] for h in range(7)]
        lam -= step[NT]
        om -= step[NT + 1]
        if aut:
            eta -= step[NT + 2]

    raise NewtonDivergence(
        f"no convergence in {max_iter} iterations at eps={eps:.3g} "
        f"(residual {res:.2e})")


# --------------------------------------------------------------------------
# normal-form extraction
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NSNormalForm:
    """Cubic rotating-frame normal-form data at the crossing.

    ``beta_real``/``beta_imag`` fill the rotation-scaling matrix of the
    resonant cubic term; ``kappa`` is the angular-speed coefficient of the
    autonomous variant (None when forced).  The remaining fields are the
    harmonic coefficient functions of the near-identity change of
    variables, split by the target block of the frame: ``crit_*`` map into
    the critical plane (2 components), ``hyp_*`` into the hyperbolic
    complement, ``phase_*`` onto the autonomous phase direction. Blocks
    that do not exist for a given problem are None.
    """

    beta_real: float
    beta_imag: float
    kappa: float | None
    crit_a0: Fourier1D
    crit_a1: Fourier1D
    crit_b1: Fourier1D
    crit_a2: Fourier1D
    crit_b2: Fourier1D
    crit_a3: Fourier1D
    crit_b3: Fourier1D
    hyp_a0: Fourier1D | None
    hyp_a2: Fourier1D | None
    hyp_b2: Fourier1D | None
    phase_a0: Fourier1D | None
    phase_a2: Fourier1D | None
    phase_b2: Fourier1D | None
    eps: float


def extract_ns_normal_form(sol: NSGalerkinM3Solution, problem: NSProblem,
                           degen_tol: float = 1e-8) -> NSNormalForm:
    """Read the cubic normal-form data off a converged low-mode solution.

    The parameter and frequency offsets determine the radial and angular
    cubic coefficients through the crossing speed; the harmonic correction
    profiles, rescaled by amplitude (once for the quadratic-order
    harmonics, twice for the odd critical ones), give the coefficient
    functions of the polynomial change of variables.
    """
    if sol.eps == 0.0:
        raise ValueError("normal-form read-off needs a finite amplitude")
    eps = sol.eps
    nh = problem.n_hyperbolic
    aut = problem.autonomous
    dlam = (sol.lam - problem.lam_star) / eps ** 2
    beta_r = -problem.a_dot_real * dlam
    beta_i = (sol.omega - problem.omega_star) / eps ** 2 - problem.a_dot_imag * dlam
    kappa = sol.eta / eps if aut else None

    crit = [0, 1]
    hyp = list(range(2, 2 + nh))
    phase = [problem.dim - 1] if aut else None

    def part(m, kind, idx, scale):
        return sol.correction(m, kind).component(idx) * scale

    quad, cub = 1.0 / eps, 1.0 / eps ** 2
    fields = dict(
        crit_a0=part(0, "cos", crit, quad),
        crit_a1=part(1, "cos", crit, cub),
        crit_b1=part(1, "sin", crit, cub),
        crit_a2=part(2, "cos", crit, quad),
        crit_b2=part(2, "sin", crit, quad),
        crit_a3=part(3, "cos", crit, cub),
        crit_b3=part(3, "sin", crit, cub),
        hyp_a0=part(0, "cos", hyp, quad) if nh else None,
        hyp_a2=part(2, "cos", hyp, quad) if nh else None,
        hyp_b2=part(2, "sin", hyp, quad) if nh else None,
        phase_a0=part(0, "cos", phase, quad) if aut else None,
        phase_a2=part(2, "cos", phase, quad) if aut else None,
        phase_b2=part(2, "sin", phase, quad) if aut else None,
    )
    if abs(beta_r) < degen_tol:
        warnings.warn(
            f"radial cubic coefficient {beta_r:.3e} below {degen_tol:g}",
            DegenerateLyapunovWarning, stacklevel=2)
    return NSNormalForm(beta_real=float(beta_r), beta_imag=float(beta_i),
                        kappa=float(kappa) if kappa is not None else None,
                        eps=eps, **fields)


# --------------------------------------------------------------------------
# the transformed vector fields (pushforward by composition)
# --------------------------------------------------------------------------

def _transform_coefficient_grids(problem: NSProblem, nf: NSNormalForm,
                                 N1: int) -> dict:
    """theta-grid samples (value and theta-derivative) of the full-dimension
    change-of-variables coefficient functions, keyed by (mode, kind)."""
    n = problem.dim
    nh = problem.n_hyperbolic
    aut = problem.autonomous
    out = {}
    for m, kind, _deg, _poly in ModePolynomialMap.TABLE:
        tag = ("a" if kind == "cos" else "b")
        coef = np.zeros((N1, n))
        dcoef = np.zeros((N1, n))
        cf = getattr(nf, f"crit_{tag}{m}")
        coef[:, :2] = cf.grid_values(N1)
        dcoef[:, :2] = cf.differentiate().grid_values(N1)
        if m in (0, 2):
            if nh:
                hf = getattr(nf, f"hyp_{tag}{m}")
                coef[:, 2:2 + nh] = hf.grid_values(N1)
                dcoef[:, 2:2 + nh] = hf.differentiate().grid_values(N1)
            if aut:
                pf = getattr(nf, f"phase_{tag}{m}")
                coef[:, n - 1:] = pf.grid_values(N1)
                dcoef[:, n - 1:] = pf.differentiate().grid_values(N1)
        out[(m, kind)] = (coef, dcoef)
    return out


@dataclass(frozen=True)
class _TransformedFields:
    crit: np.ndarray            # (N1, N2, 2)
    hyp: np.ndarray             # (N1, N2, nh)
    phase: np.ndarray | None    # (N1, N2), autonomous only


def _transformed_field_grids(problem: NSProblem, nf: NSNormalForm, lam: float,
                             yhat: np.ndarray, ytil: np.ndarray, eps: float,
                             eta, tg: dict) -> _TransformedFields:
    """Grid samples of the transformed-variable vector fields.

    Realized by composing the raw rescaled field with the polynomial change
    of variables: the critical block is solved through the (2x2) implicit
    map derivative, the remaining blocks follow by back-substitution.  The
    phase-direction coordinate is already eliminated at this stage (its
    image under the change of variables is carried, its own value is zero).
    """
    N1, N2 = yhat.shape[:2]
    n = problem.dim
    nh = problem.n_hyperbolic
    aut = problem.autonomous
    y1, y2 = yhat[..., 0], yhat[..., 1]

    H = np.zeros((N1, N2, n))
    dHth = np.zeros((N1, N2, n))
    DH1 = np.zeros((N1, N2, n))
    DH2 = np.zeros((N1, N2, n))
    for m, kind, deg, poly in ModePolynomialMap.TABLE:
        coef, dcoef = tg[(m, kind)]
        s = eps if deg == 2 else eps * eps
        p = poly(y1, y2)
        g1, g2 = _POLY_GRAD[(m, kind)](y1, y2)
        H += s * p[..., None] * coef[:, None, :]
        dHth += s * p[..., None] * dcoef[:, None, :]
        DH1 += s * g1[..., None] * coef[:, None, :]
        DH2 += s * g2[..., None] * coef[:, None, :]

    z = H.copy()
    z[..., :2] += yhat
    if nh:
        z[..., 2:2 + nh] += ytil
    gd = problem._grid_data(lam, N1)
    G = _rescaled_field_grid(problem, gd, z, eps, eta if aut else None)
    fac = _time_factor(eps, eta) if aut else 1.0
    facv = fac[..., None] if np.ndim(fac) else fac

    rc = G[..., :2] - facv * dHth[..., :2]
    A = np.empty((N1, N2, 2, 2))
    A[..., 0, 0] = 1.0 + DH1[..., 0]
    A[..., 0, 1] = DH2[..., 0]
    A[..., 1, 0] = DH1[..., 1]
    A[..., 1, 1] = 1.0 + DH2[..., 1]
    Ghat = np.linalg.solve(A, rc[..., None])[..., 0]

    push = DH1 * Ghat[..., 0:1] + DH2 * Ghat[..., 1:2]
    Gfull = G - facv * dHth - push
    Gtil = Gfull[..., 2:2 + nh] if nh else np.zeros((N1, N2, 0))
    phase = Gfull[..., n - 1] if aut else None
    return _TransformedFields(crit=Ghat, hyp=Gtil, phase=phase)


# --------------------------------------------------------------------------
# torus iteration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TorusApproximation:
    """Converged torus data in transformed variables.

    ``radial`` is the scalar correction multiplying the leading circle
    (its joint mean is pinned to zero), ``hyperbolic`` the transverse
    coefficient function; ``omega_field``/``eta_field`` are the derived
    pointwise angular-speed fields (``eta_*`` None when forced).  The
    ``min_symbol_*`` values are the smallest linear-solve symbol magnitudes
    of the accepting sweep; ``residual_*`` the full Galerkin residuals of
    the returned iterate.
    """

    eps: float
    lam: float
    radial: Fourier2D
    hyperbolic: Fourier2D
    omega_field: Fourier2D
    eta_field: Fourier2D | None
    omega_mean: float
    eta_mean: float | None
    residual_critical: float
    residual_hyperbolic: float | None
    min_symbol_critical: float
    min_symbol_hyperbolic: float | None
    sweeps: int
    contraction_ratio: float | None


@dataclass(frozen=True)
class _TorusFieldState:
    rg: np.ndarray
    ytg: np.ndarray
    Ghat: np.ndarray
    Gtil: np.ndarray
    etag: np.ndarray | None
    omg: np.ndarray


def _torus_field_state(problem, nf, lam, rho, ytil, eps, N1, N2, tg,
                       astar, adot) -> _TorusFieldState:
    """Pointwise field data of the torus iteration at one iterate: the
    transformed fields, the speed-correction field (solved exactly -- the
    defining relation is affine in it pointwise) and the rotation field."""
    rg = rho.grid_values(N1, N2)[..., 0]
    yhat = (1.0 + rg)[..., None] * astar[None, :, :]
    ytg = ytil.grid_values(N1, N2)
    if problem.autonomous:
        f0 = _transformed_field_grids(problem, nf, lam, yhat, ytg, eps, 0.0, tg)
        f1 = _transformed_field_grids(problem, nf, lam, yhat, ytg, eps, 1.0, tg)
        slope = f1.phase - f0.phase
        etag = f0.phase / (1.0 - slope)
        Ghat = f0.crit + etag[..., None] * (f1.crit - f0.crit)
        Gtil = f0.hyp + etag[..., None] * (f1.hyp - f0.hyp)
    else:
        f0 = _transformed_field_grids(problem, nf, lam, yhat, ytg, eps, None, tg)
        Ghat, Gtil, etag = f0.crit, f0.hyp, None
    omg = np.einsum("xyi,yi->xy", Ghat, adot) / (1.0 + rg)
    return _TorusFieldState(rg=rg, ytg=ytg, Ghat=Ghat, Gtil=Gtil,
                            etag=etag, omg=omg)


def compute_torus(problem: NSProblem, nf: NSNormalForm, eps: float,
                  max_theta_mode: int = 24, max_phi_mode: int = 8,
                  torus_tol: float = 1e-11, max_sweeps: int = 100) -> TorusApproximation:
    """Sweep the high-mode torus fixed point at amplitude ``eps``.

    Each sweep evaluates the transformed fields at the current iterate,
    solves the speed and rotation fields pointwise, then updates the radial
    and transverse coefficient functions through constant-coefficient
    mode-diagonal solves; the parameter update comes from the joint-mean
    row, where the radial mean is pinned to zero.  The solve symbols carry
    the means of the angular-speed fields; the fluctuation parts ride on
    the right-hand side at the previous iterate, which leaves the fixed
    point identical.  Convergence is measured on the full Galerkin residual
    of the iterate, not the step size.
    """
    report = _require_gates(problem, "the torus iteration")
    if abs(nf.beta_real) < 1e-8:
        raise GateFailure(
            f"radial cubic coefficient {nf.beta_real:.3e} is degenerate; "
            "no torus branch direction at this order", report)
    eps = float(eps)
    if eps < 0.0:
        raise ValueError(f"amplitude must be nonnegative, got {eps}")
    L, M = int(max_theta_mode), int(max_phi_mode)
    n = problem.dim
    nh = problem.n_hyperbolic
    aut = problem.autonomous
    band = problem.coordinate_band()
    N1 = _grid_size(max(4 * (L + band), 2 * (L + band) + 2, 64))
    N2 = _grid_size(max(4 * (M + 1) + M + 2, 32))
    phi = 2.0 * np.pi * np.arange(N2) / N2
    astar = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    adot = np.stack([-np.sin(phi), np.cos(phi)], axis=-1)
    tg = _transform_coefficient_grids(problem, nf, N1)
    Et = problem.frame_star.E_hyperbolic
    ar = problem.a_dot_real
    b2 = 2.0 * eps * eps * nf.beta_real

    ls = np.arange(-L, L + 1)[:, None]
    ms = np.arange(-M, M + 1)[None, :]
    center = (L, M)

    rho = Fourier2D.zeros(L, M, 1)
    ytil = Fourier2D.zeros(L, M, nh)
    lam = problem.lam_star
    prev_change = None
    ratio = None
    worse = 0

    for sweep in range(max_sweeps):
        st = _torus_field_state(problem, nf, lam, rho, ytil, eps, N1, N2,
                                tg, astar, adot)
        if np.min(1.0 + st.rg) < 0.5:
            raise IterationDivergence(
                f"radial correction collapsed the torus radius at sweep {sweep}",
                ratio)
        ombar = float(np.mean(st.omg))
        etabar = float(np.mean(st.etag)) if aut else 0.0
        tf = (1.0 + eps * st.etag) if aut else 1.0

        mu = (1.0 + eps * etabar) * ls + ombar * ms
        sym = b2 - 1j * mu
        off = np.abs(sym).copy()
        off[center] = np.inf
        min_sym_c = float(np.min(off))
        min_sym_h = None
        if nh:
            sv_min = np.inf
            eye = np.eye(nh)
            for i in range(2 * L + 1):
                for j in range(2 * M + 1):
                    s = np.linalg.svd(Et - 1j * mu[i, j] * eye,
                                      compute_uv=False)[-1]
                    sv_min = min(sv_min, s)
            min_sym_h = float(sv_min)

        # full Galerkin residual of the current iterate
        drth = rho.differentiate("theta").grid_values(N1, N2)[..., 0]
        drph = rho.differentiate("phi").grid_values(N1, N2)[..., 0]
        Rc = (np.einsum("xyi,yi->xy", st.Ghat, astar)
              - tf * drth - st.omg * drph)
        res_c = float(np.max(np.abs(Fourier2D.from_grid(Rc[..., None], L, M).c)))
        res_h = None
        if nh:
            dyth = ytil.differentiate("theta").grid_values(N1, N2)
            dyph = ytil.differentiate("phi").grid_values(N1, N2)
            tfv = tf[..., None] if np.ndim(tf) else tf
            Rh = st.Gtil - tfv * dyth - st.omg[..., None] * dyph
            res_h = float(np.max(np.abs(Fourier2D.from_grid(Rh, L, M).c)))
        if max(res_c, res_h or 0.0) < torus_tol:
            omega_field = Fourier2D.from_grid(st.omg[..., None], L, M)
            eta_field = (Fourier2D.from_grid(st.etag[..., None], L, M)
                         if aut else None)
            return TorusApproximation(
                eps=eps, lam=float(lam), radial=rho, hyperbolic=ytil,
                omega_field=omega_field, eta_field=eta_field,
                omega_mean=ombar, eta_mean=etabar if aut else None,
                residual_critical=res_c, residual_hyperbolic=res_h,
                min_symbol_critical=min_sym_c, min_symbol_hyperbolic=min_sym_h,
                sweeps=sweep, contraction_ratio=ratio)

        # radial update: lagged fluctuation terms keep the solve mode-diagonal
        rhat = b2 * st.rg - np.einsum("xyi,yi->xy", st.Ghat, astar)
        rhat = rhat + (st.omg - ombar) * drph
        if aut:
            rhat = rhat + eps * (st.etag - etabar) * drth
        Rhm = Fourier2D.from_grid(rhat[..., None], L, M).c[..., 0]
        if not np.all(np.abs(sym[off < np.inf]) > 0.0):
            raise IterationDivergence("exactly resonant solve symbol", ratio)
        newr = Rhm / sym
        newr[center] = 0.0
        dlam = float(Rhm[center].real) / ar
        rho_new = Fourier2D(newr[..., None])

        if nh:
            rt = np.einsum("ab,xyb->xya", Et, st.ytg) - st.Gtil
            rt = rt + (st.omg - ombar)[..., None] * dyph
            if aut:
                rt = rt + eps * (st.etag - etabar)[..., None] * dyth
            Rtm = Fourier2D.from_grid(rt, L, M).c
            sol = np.empty_like(Rtm)
            eye = np.eye(nh)
            for i in range(2 * L + 1):
                for j in range(2 * M + 1):
                    sol[i, j] = np.linalg.solve(Et - 1j * mu[i, j] * eye,
                                                Rtm[i, j])
            ytil_new = Fourier2D(sol)
        else:
            ytil_new = ytil

        change = max(float(np.max(np.abs(rho_new.c - rho.c))),
                     float(np.max(np.abs(ytil_new.c - ytil.c))) if nh else 0.0,
                     abs(dlam))
        if not np.isfinite(change):
            raise IterationDivergence("non-finite torus update", ratio)
        if prev_change is not None and prev_change > 0.0:
            ratio = change / prev_change
            worse = worse + 1 if change > prev_change else 0
            if worse >= 3:
                raise IterationDivergence(
                    f"torus sweep stopped contracting "
                    f"(last ratio {ratio:.3f})", ratio)
        prev_change = change
        rho, ytil, lam = rho_new, ytil_new, lam + dlam

    raise IterationDivergence(
        f"no torus convergence in {max_sweeps} sweeps "
        f"(last residual {max(res_c, res_h or 0.0):.2e})", ratio)


# --------------------------------------------------------------------------
# embedding, diagnostics, export
# --------------------------------------------------------------------------

def _torus_state_grid(problem, nf, torus, N1, N2):
    """Samples of the embedded surface on the (N1, N2) tensor grid,
    reassembled from the converged coefficient data."""
    tg = _transform_coefficient_grids(problem, nf, N1)
    eps = torus.eps
    rg = torus.radial.grid_values(N1, N2)[..., 0]
    phi = 2.0 * np.pi * np.arange(N2) / N2
    astar = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    yhat = (1.0 + rg)[..., None] * astar[None, :, :]
    ytg = torus.hyperbolic.grid_values(N1, N2)
    n = problem.dim
    nh = problem.n_hyperbolic
    y1, y2 = yhat[..., 0], yhat[..., 1]
    z = np.zeros((N1, N2, n))
    for m, kind, deg, poly in ModePolynomialMap.TABLE:
        coef, _ = tg[(m, kind)]
        s = eps if deg == 2 else eps * eps
        z += s * poly(y1, y2)[..., None] * coef[:, None, :]
    z[..., :2] += yhat
    if nh:
        z[..., 2:2 + nh] += ytg
    gd = problem._grid_data(torus.lam, N1)
    return gd.vstar[:, None, :] + eps * np.einsum("xij,xyj->xyi", gd.P, z)


def torus_embed(torus: TorusApproximation, problem: NSProblem,
                nf: NSNormalForm, max_theta_mode: int | None = None,
                max_phi_mode: int | None = None) -> Fourier2D:
    """Embedded torus surface in the original state coordinates.

    Rebuilds the full coordinate function from the radial and transverse
    data through the polynomial change of variables, then attaches it to
    the orbit with the frame at the converged parameter.  Output mode counts
    default to what the construction can populate.
    """
    L = torus.radial.max_mode_theta
    M = torus.radial.max_mode_phi
    band = problem.coordinate_band()
    L_out = L + band if max_theta_mode is None else int(max_theta_mode)
    M_out = 3 * (M + 1) if max_phi_mode is None else int(max_phi_mode)
    N1 = _grid_size(max(2 * (3 * L + 2 * band) + 2, 2 * L_out + 2, 64))
    N2 = _grid_size(max(6 * M + 8, 2 * M_out + 2, 32))
    vals = _torus_state_grid(problem, nf, torus, N1, N2)
    return Fourier2D.from_grid(vals, L_out, M_out)


def torus_invariance_residual(torus: TorusApproximation, problem: NSProblem,
                              nf: NSNormalForm, N1: int = 64,
                              N2: int = 64) -> float:
    """Pointwise flow-invariance defect of the embedded surface on an
    (N1, N2) sample grid: the angular transport of the surface against the
    vector field evaluated on it, using the derived speed fields."""
    surface = torus_embed(torus, problem, nf)
    th = 2.0 * np.pi * np.arange(N1) / N1
    ph = 2.0 * np.pi * np.arange(N2) / N2
    Tg = _eval_2d(surface, th, ph)
    dTth = _eval_2d(surface.differentiate("theta"), th, ph)
    dTph = _eval_2d(surface.differentiate("phi"), th, ph)

    # the angular-speed fields are recomputed pointwise on this very grid
    # (their defining relations hold pointwise, so no projection is needed)
    tg = _transform_coefficient_grids(problem, nf, N1)
    astar = np.stack([np.cos(ph), np.sin(ph)], axis=-1)
    adot = np.stack([-np.sin(ph), np.cos(ph)], axis=-1)
    st = _torus_field_state(problem, nf, torus.lam, torus.radial,
                            torus.hyperbolic, torus.eps, N1, N2, tg,
                            astar, adot)
    if problem.variant == "forced":
        F = problem.system.rhs(Tg, np.broadcast_to(th[:, None], (N1, N2)),
                               torus.lam)
        R = dTth + st.omg[..., None] * dTph - F
    else:
        pt = problem.point(torus.lam)
        F = pt.period_scale * problem.system.rhs(Tg, torus.lam)
        R = ((1.0 + torus.eps * st.etag)[..., None] * dTth
             + st.omg[..., None] * dTph - F)
    return float(np.max(np.abs(R)))


def normal_form_insertion_residuals(problem: NSProblem, nf: NSNormalForm,
                                    eps: float) -> dict:
    """Defects of the leading-order ansatz in the transformed equations.

    Inserts the plain circle, zero transverse data, and the normal-form
    parameter/frequency predictions, then measures each block's equation
    residual on the grid.  The decay rates of these numbers over an
    amplitude ladder are the operative check that the extracted change of
    variables actually flattens the system to cubic order.
    """
    eps = float(eps)
    n = problem.dim
    band = problem.coordinate_band()
    N1 = _grid_size(max(4 * band + 4, 64))
    N2 = 16
    phi = 2.0 * np.pi * np.arange(N2) / N2
    astar = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    adot = np.stack([-np.sin(phi), np.cos(phi)], axis=-1)
    yhat = np.broadcast_to(astar[None, :, :], (N1, N2, 2)).copy()
    ytil = np.zeros((N1, N2, problem.n_hyperbolic))
    ar, ai = problem.a_dot_real, problem.a_dot_imag
    lam_p = problem.lam_star - eps ** 2 * nf.beta_real / ar
    om_p = (problem.omega_star
            + eps ** 2 * (ar * nf.beta_imag - ai * nf.beta_real) / ar)
    tg = _transform_coefficient_grids(problem, nf, N1)
    if problem.autonomous:
        eta_p = eps * nf.kappa
        f = _transformed_field_grids(problem, nf, lam_p, yhat, ytil, eps,
                                     eta_p, tg)
        out = {
            "critical": float(np.max(np.abs(f.crit - om_p * adot[None]))),
            "hyperbolic": (float(np.max(np.abs(f.hyp)))
                           if problem.n_hyperbolic else None),
            "phase": float(np.max(np.abs(f.phase - eta_p))),
        }
    else:
        f = _transformed_field_grids(problem, nf, lam_p, yhat, ytil, eps,
                                     None, tg)
        out = {
            "critical": float(np.max(np.abs(f.crit - om_p * adot[None]))),
            "hyperbolic": (float(np.max(np.abs(f.hyp)))
                           if problem.n_hyperbolic else None),
            "phase": None,
        }
    return out


def torus_dump(torus: TorusApproximation) -> dict:
    """JSON-ready record of a converged torus (scalars plus mode data)."""
    import json

    doc = {
        "eps": torus.eps,
        "lam": torus.lam,
        "omega_mean": torus.omega_mean,
        "eta_mean": torus.eta_mean,
        "sweeps": torus.sweeps,
        "residual_critical": torus.residual_critical,
        "residual_hyperbolic": torus.residual_hyperbolic,
        "min_symbol_critical": torus.min_symbol_critical,
        "min_symbol_hyperbolic": torus.min_symbol_hyperbolic,
        "radial_modes": json.loads(torus.radial.to_json()),
        "hyperbolic_modes": (json.loads(torus.hyperbolic.to_json())
                             if torus.hyperbolic.dim else None),
        "omega_field": json.loads(torus.omega_field.to_json()),
        "eta_field": (json.loads(torus.eta_field.to_json())
                      if torus.eta_field is not None else None),
    }
    return doc
