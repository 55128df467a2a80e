"""Periodic orbits branching from an oscillatory instability of a stationary
state: Fourier-Galerkin solves of the amplitude-rescaled system in invariant-
subspace coordinates, and the cubic normal-form data read off a low-mode solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .floquet import SubspaceDecomposition, split_constant_matrix
from .fourier import Fourier1D
from .orbits import (CrossingEvent, NewtonDivergence, SecantStall,
                     StationaryBranch, StationaryBranchPoint,
                     _SpectralOrbitSolver, _inner_weight_vector,
                     continue_subspace, flatten_series, unflatten_series)

__all__ = [
    "SingularLinearization",
    "StationaryFrameFamily",
    "HopfGalerkinSolution",
    "HopfScaledSolution",
    "HopfNormalForm",
    "solve_hopf_galerkin",
    "solve_hopf_scaled",
    "extract_hopf_normal_form",
    "hopf_orbit_reconstruct",
]


class SingularLinearization(RuntimeError):
    """The linearization of the rescaled bifurcation system is (numerically)
    singular.  With a clean simple crossing this should not happen; it shows
    up when the critical pair resonates with the rest of the spectrum."""


# --------------------------------------------------------------------------
# parameter-smooth stationary points and frames
# --------------------------------------------------------------------------

class StationaryFrameFamily:
    """lam -> invariant-subspace frame along the stationary branch through a
    detected crossing.

    Every frame is aligned against the one at the detection parameter, so the
    family is a plain function of lam (no path dependence) and varies smoothly
    -- both properties the rescaled Newton solve relies on when it finite-
    differences in the parameter.  Points and frames are cached per lam.
    """

    def __init__(self, system, crossing: CrossingEvent,
                 newton_tol: float = 1e-12, gap_tol: float = 1e-6):
        self.system = system
        self.crossing = crossing
        self.branch = StationaryBranch(system, newton_tol=newton_tol)
        anchor_pt = self.branch.solve(crossing.lam_star, crossing.point)
        self._anchor = split_constant_matrix(anchor_pt.jacobian, gap_tol=gap_tol)
        self._points: dict[float, StationaryBranchPoint] = {
            float(crossing.lam_star): anchor_pt}
        self._frames: dict[float, SubspaceDecomposition] = {
            float(crossing.lam_star): self._anchor}
        self._warm = anchor_pt

    def point(self, lam: float) -> StationaryBranchPoint:
        lam = float(lam)
        pt = self._points.get(lam)
        if pt is None:
            pt = self.branch.solve(lam, self._warm)
            self._points[lam] = pt
            self._warm = pt
        return pt

    def __call__(self, lam: float) -> SubspaceDecomposition:
        lam = float(lam)
        fr = self._frames.get(lam)
        if fr is None:
            raw = split_constant_matrix(self.point(lam).jacobian)
            fr = continue_subspace(self._anchor, raw)
            self._frames[lam] = fr
        return fr


# --------------------------------------------------------------------------
# solution containers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HopfGalerkinSolution:
    """Converged Galerkin solution of the amplitude-rescaled system.

    ``z`` is the full coefficient function in frame coordinates, i.e. the
    leading circle (cos, sin, 0, ...) plus all corrections; ``lam`` and
    ``omega`` are the amplitude-dependent parameter and frequency.
    """

    eps: float
    lam: float
    omega: float
    z: Fourier1D
    residual_norm: float
    newton_iterations: int

    @property
    def mode1_correction(self) -> tuple[np.ndarray, np.ndarray]:
        """Mode-1 coefficients with the leading circle removed."""
        n = self.z.a.shape[1]
        e1 = np.zeros(n); e1[0] = 1.0
        e2 = np.zeros(n); e2[1] = 1.0
        return self.z.a[1] - e1, self.z.b[1] - e2


@dataclass(frozen=True)
class HopfNormalForm:
    """Cubic normal-form data at the crossing.

    ``beta_real``/``beta_imag`` fill the rotation-scaling matrix multiplying
    the resonant cubic term; the ``crit_*`` arrays (each length 2) and
    ``hyp_*`` arrays (each length n-2) are the mode coefficients of the
    near-identity polynomial change of coordinates, split between the
    critical plane and the hyperbolic complement of the frame.
    """

    beta_real: float
    beta_imag: float
    crit_a0: np.ndarray
    crit_a1: np.ndarray
    crit_a2: np.ndarray
    crit_a3: np.ndarray
    crit_b1: np.ndarray
    crit_b2: np.ndarray
    crit_b3: np.ndarray
    hyp_a0: np.ndarray
    hyp_a2: np.ndarray
    hyp_b2: np.ndarray
    eps: float


# --------------------------------------------------------------------------
# the Galerkin solve
# --------------------------------------------------------------------------

def _leading_circle(n: int, max_mode: int) -> Fourier1D:
    a = np.zeros((max_mode + 1, n))
    b = np.zeros((max_mode + 1, n))
    a[1, 0] = 1.0
    b[1, 1] = 1.0
    return Fourier1D(a, b)


def solve_hopf_galerkin(sys, crossing: CrossingEvent, subspaces, eps: float,
                        M: int, newton_tol: float = 1e-9, max_iter: int = 40,
                        nonlinearity_degree: int = 3) -> HopfGalerkinSolution:
    """Newton-solve the truncated rescaled system at amplitude ``eps``.

    Unknowns are the coefficient function z (modes 0..M, all components),
    the parameter and the frequency; the two scalar rows pin amplitude and
    phase of mode 1 against the leading circle.  ``subspaces`` maps lam to
    the frame at the stationary point (see StationaryFrameFamily, whose
    ``point`` method also supplies the stationary points used here).

    The residual floor scales like machine epsilon times the field magnitude
    divided by eps, so very small amplitudes need a loosened ``newton_tol``.
    """
    if M < 1:
        raise ValueError(f"need at least mode 1, got M={M}")
    n = sys.dim
    lam_star = float(crossing.lam_star)
    omega_star = float(crossing.omega_star)
    circle = _leading_circle(n, M)

    if eps == 0.0:
        # the rescaled system degenerates to the linear eigenvalue relation,
        # solved exactly by the leading circle at the crossing itself
        return HopfGalerkinSolution(eps=0.0, lam=lam_star, omega=omega_star,
                                    z=circle, residual_norm=0.0,
                                    newton_iterations=0)

    sv = _SpectralOrbitSolver(n, M, nonlinearity_degree)
    D = sv.derivative_matrix
    w_amp = _inner_weight_vector(circle)
    w_phase = _inner_weight_vector(circle.differentiate())

    own_points = not hasattr(subspaces, "point")
    own_branch = StationaryBranch(sys, newton_tol=1e-12) if own_points else None
    warm = {"x": crossing.point}

    def frame_data(lam):
        if own_points:
            pt = own_branch.solve(lam, warm["x"])
            warm["x"] = pt
        else:
            pt = subspaces.point(lam)
        S = subspaces(lam)
        P = S.P.evaluate(0.0).reshape(n, n)
        return pt.x, P, lu_factor(P)

    def galerkin_residual(c, lam, om, data):
        xstar, P, Plu = data
        z = unflatten_series(c, M, n)
        zg = z.grid_values(sv.grid)
        x = xstar[None, :] + eps * zg @ P.T
        # difference form: the stationary residual would otherwise be
        # amplified by 1/eps
        field = sys.rhs(x, lam) - sys.rhs(xstar[None, :], lam)
        G = lu_solve(Plu, field.T).T / eps
        return sv.project(G) - om * (D @ c)

    c = flatten_series(circle)
    lam, om = lam_star, omega_star
    ndof = sv.ndof
    data = frame_data(lam)

    for it in range(max_iter):
        r_gal = galerkin_residual(c, lam, om, data)
        r_amp = w_amp @ c - 1.0
        r_phase = w_phase @ c
        res = max(np.max(np.abs(r_gal)), abs(r_amp), abs(r_phase))
        if not np.isfinite(res):
            raise NewtonDivergence(f"residual blew up at iteration {it}")
        if res < newton_tol:
            z = unflatten_series(c, M, n)
            return HopfGalerkinSolution(eps=float(eps), lam=float(lam),
                                        omega=float(om), z=z,
                                        residual_norm=float(res),
                                        newton_iterations=it)

        xstar, P, Plu = data
        z = unflatten_series(c, M, n)
        zg = z.grid_values(sv.grid)
        x = xstar[None, :] + eps * zg @ P.T
        Jg = sys.jacobian(x, lam)                        # (N, n, n)
        B = lu_solve(Plu, (Jg @ P).transpose(1, 2, 0).reshape(n, -1))
        B = B.reshape(n, n, sv.grid).transpose(2, 0, 1)  # P^-1 J P per point

        Jac = np.zeros((ndof + 2, ndof + 2))
        Jac[:ndof, :ndof] = sv.jacobian_action_matrix(B) - om * D
        h = 1e-6 * max(1.0, abs(lam))
        dplus = frame_data(lam + h)
        dminus = frame_data(lam - h)
        Jac[:ndof, ndof] = (galerkin_residual(c, lam + h, om, dplus)
                            - galerkin_residual(c, lam - h, om, dminus)) / (2 * h)
        Jac[:ndof, ndof + 1] = -(D @ c)
        Jac[ndof, :ndof] = w_amp
        Jac[ndof + 1, :ndof] = w_phase

        rhs = np.concatenate([r_gal, [r_amp, r_phase]])
        try:
            step = np.linalg.solve(Jac, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularLinearization(
                f"singular linearization at lam={lam:.6g}") from exc
        if not np.all(np.isfinite(step)):
            raise SingularLinearization(
                f"non-finite Newton step at lam={lam:.6g}")
        c = c - step[:ndof]
        lam = lam - step[ndof]
        om = om - step[ndof + 1]
        data = frame_data(lam)

    raise NewtonDivergence(
        f"no convergence in {max_iter} iterations at eps={eps:.3g} "
        f"(residual {res:.2e})")


# --------------------------------------------------------------------------
# extended-precision lane
# --------------------------------------------------------------------------
#
# The parameter and frequency move away from the crossing like eps^2, and the
# convergence studies need the next order after that.  At small amplitudes
# that signal drops below what double precision can even represent in
# lam itself (lam is O(10), the signal O(eps^4)).  This lane therefore solves
# for the scaled offsets (lam - lam*)/eps^2 and (omega - omega*)/eps^2
# directly, carrying the whole Newton iteration in mpmath working precision.

@dataclass(frozen=True)
class HopfScaledSolution:
    """Galerkin solution in parameter-offset form.

    ``lam_offset`` and ``omega_offset`` are (lam - lam*)/eps^2 and
    (omega - omega*)/eps^2; they stay O(1), so storing them as floats keeps
    full meaning at amplitudes where lam - lam* itself would round away.
    The crossing data used (refined in working precision) is carried along.
    """

    eps: float
    lam_offset: float
    omega_offset: float
    lam_star: float
    omega_star: float
    a_dot_real: float
    a_dot_imag: float
    z: Fourier1D
    residual_norm: float
    newton_iterations: int

    @property
    def lam(self) -> float:
        return self.lam_star + self.eps ** 2 * self.lam_offset

    @property
    def omega(self) -> float:
        return self.omega_star + self.eps ** 2 * self.omega_offset

    @property
    def mode1_correction(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.z.a.shape[1]
        e1 = np.zeros(n); e1[0] = 1.0
        e2 = np.zeros(n); e2[1] = 1.0
        return self.z.a[1] - e1, self.z.b[1] - e2


def _mp_array_matrix(mp, rows):
    return mp.matrix([[x for x in row] for row in rows])


def _mp_stationary(mp, sys, lam, x0, tol, max_iter=60):
    """Newton for a stationary state in working precision."""
    x = np.array([mp.mpf(v) if not hasattr(v, "_mpf_") else v for v in x0],
                 dtype=object)
    for _ in range(max_iter):
        r = sys.rhs(x, lam)
        if max(abs(v) for v in r) < tol:
            return x
        J = _mp_array_matrix(mp, sys.jacobian(x, lam))
        dx = mp.lu_solve(J, mp.matrix([v for v in r]))
        for i in range(len(x)):
            x[i] -= dx[i]
    raise NewtonDivergence("stationary refinement stalled in extended precision")


def _mp_critical_pair(mp, sys, lam, x, omega_hint):
    """Eigenvalue of the linearization with positive imaginary part nearest
    the hint, plus its eigenvector."""
    J = _mp_array_matrix(mp, sys.jacobian(x, lam))
    E, ER = mp.eig(J)
    best = None
    for k, muk in enumerate(E):
        if mp.im(muk) <= 0:
            continue
        d = abs(muk - mp.mpc(0, omega_hint))
        if best is None or d < best[0]:
            best = (d, k, muk)
    if best is None:
        raise SingularLinearization("no complex pair in the linearization")
    _, k, mu = best
    q = np.array([ER[i, k] for i in range(J.rows)], dtype=object)
    return mu, q


def _mp_frame(mp, sys, lam, x, omega_hint):
    """Invariant-subspace frame in working precision: critical pair columns
    first, remaining directions after, every column canonically oriented so
    the frame is a smooth plain function of lam."""
    n = len(x)
    J = _mp_array_matrix(mp, sys.jacobian(x, lam))
    E, ER = mp.eig(J)
    pairs = []          # (mu with Im>0, eigvec)
    reals = []          # (mu real, eigvec)
    imag_floor = mp.mpf(10) ** (-mp.dps + 8)
    scale = max(max(abs(E[i]) for i in range(n)), mp.mpf(1))
    for k in range(n):
        muk = E[k]
        q = np.array([ER[i, k] for i in range(n)], dtype=object)
        if abs(mp.im(muk)) < imag_floor * scale:
            reals.append((mp.re(muk), q))
        elif mp.im(muk) > 0:
            pairs.append((muk, q))
    if not pairs:
        raise SingularLinearization("no critical pair to frame")
    pairs.sort(key=lambda t: abs(t[0] - mp.mpc(0, omega_hint)))

    cols = []
    Eblk = mp.zeros(n, n)
    j = 0

    def canonical_pair(q):
        # conjugate of the Im>0 eigenvector, phase-rotated so the sum of
        # squares is real nonnegative (real and imaginary parts orthogonal,
        # real part dominant), scaled to unit mean-square column length,
        # overall sign fixed on the real part's largest entry — the same
        # convention the double-precision frame splitting uses
        v = np.array([mp.conj(t) for t in q], dtype=object)
        s = mp.fsum(t * t for t in v)
        if abs(s) > 0:
            v = v * mp.exp(mp.mpc(0, -mp.arg(s) / 2))
        scale = mp.sqrt((mp.fsum(mp.re(t) ** 2 for t in v)
                         + mp.fsum(mp.im(t) ** 2 for t in v)) / 2)
        v = v / scale
        c1 = np.array([mp.re(t) for t in v], dtype=object)
        c2 = np.array([mp.im(t) for t in v], dtype=object)
        k = max(range(len(c1)), key=lambda i: abs(c1[i]))
        if c1[k] < 0:
            c1, c2 = -c1, -c2
        return c1, c2

    for mu, q in pairs:
        v1, v2 = canonical_pair(q)
        cols.append(v1); cols.append(v2)
        a, b = mp.re(mu), mp.im(mu)
        Eblk[j, j] = a; Eblk[j, j + 1] = -b
        Eblk[j + 1, j] = b; Eblk[j + 1, j + 1] = a
        j += 2
    reals.sort(key=lambda t: t[0])
    for mu, q in reals:
        s = mp.fsum(t * t for t in q)
        if abs(s) > 0:
            q = q * mp.exp(mp.mpc(0, -mp.arg(s) / 2))
        q = np.array([mp.re(t) for t in q], dtype=object)
        idx = max(range(len(q)), key=lambda i: abs(q[i]))
        if q[idx] < 0:
            q = -q
        nrm = mp.sqrt(mp.fsum(v ** 2 for v in q))
        q = q / nrm
        cols.append(q)
        Eblk[j, j] = mu
        j += 1
    if j != n:
        raise SingularLinearization("could not assemble a full frame")
    P = mp.zeros(n, n)
    for c, col in enumerate(cols):
        for r in range(n):
            P[r, c] = col[r]
    return P, Eblk


def _mp_refine_crossing(mp, sys, crossing):
    """Polish the crossing to working precision: secant on the real part of
    the tracked pair along the stationary branch."""
    tol = mp.mpf(10) ** (-mp.dps + 8)
    x_cache = {"x": np.asarray(crossing.point.x, dtype=float)}

    def pair_at(lam):
        x = _mp_stationary(mp, sys, lam, x_cache["x"], tol)
        x_cache["x"] = x
        mu, _ = _mp_critical_pair(mp, sys, lam, x, crossing.omega_star)
        return x, mu

    lam0 = mp.mpf(crossing.lam_star)
    lam1 = lam0 + mp.mpf(10) ** -8 * max(1, abs(lam0))
    _, mu0 = pair_at(lam0)
    g0 = mp.re(mu0)
    x1, mu1 = pair_at(lam1)
    g1 = mp.re(mu1)
    for _ in range(60):
        if abs(g1) < tol:
            return lam1, x1, mu1
        if g1 == g0:
            raise SecantStall("crossing refinement stalled")
        lam_next = lam1 - g1 * (lam1 - lam0) / (g1 - g0)
        lam0, g0 = lam1, g1
        lam1 = lam_next
        x1, mu1 = pair_at(lam1)
        g1 = mp.re(mu1)
    raise NewtonDivergence("crossing refinement did not converge")


def solve_hopf_scaled(sys, crossing: CrossingEvent, eps: float, M: int = 3,
                      dps: int = 40, newton_tol: float | None = None,
                      max_iter: int = 30,
                      nonlinearity_degree: int = 3) -> HopfScaledSolution:
    """Extended-precision Galerkin solve in parameter-offset form.

    Same equations and truncation as solve_hopf_galerkin, but the unknown
    parameter and frequency are the scaled offsets, the crossing is first
    re-polished in working precision, and every arithmetic step runs at
    ``dps`` decimal digits.  Requires system evaluators that preserve
    object-array dtypes (the shipped autonomous models do) and a clean
    single critical pair.
    """
    import mpmath

    if eps == 0.0:
        raise ValueError("amplitude must be nonzero for the offset form")
    n = sys.dim
    mp = mpmath.mp
    with mpmath.workdps(dps):
        tol = mp.mpf(10) ** (-dps // 2) if newton_tol is None else mp.mpf(newton_tol)
        lam_star, x_star, mu_star = _mp_refine_crossing(mp, sys, crossing)
        omega_star = mp.im(mu_star)

        # crossing speed of the pair, centered differences in mp
        h = mp.mpf(10) ** (-dps // 3)
        sttol = mp.mpf(10) ** (-mp.dps + 8)
        xp = _mp_stationary(mp, sys, lam_star + h, x_star, sttol)
        mup, _ = _mp_critical_pair(mp, sys, lam_star + h, xp, omega_star)
        xm = _mp_stationary(mp, sys, lam_star - h, x_star, sttol)
        mum, _ = _mp_critical_pair(mp, sys, lam_star - h, xm, omega_star)
        a_dot = (mup - mum) / (2 * h)

        ep = mp.mpf(eps)
        ep2 = ep ** 2

        # grid matching the double lane
        sv = _SpectralOrbitSolver(n, M, nonlinearity_degree)
        N = sv.grid
        ndof = sv.ndof
        theta = [2 * mp.pi * j / N for j in range(N)]
        profiles = [[mp.mpf(1)] * N]
        for m in range(1, M + 1):
            profiles.append([mp.cos(m * t) for t in theta])
        for m in range(1, M + 1):
            profiles.append([mp.sin(m * t) for t in theta])

        def project(gv):
            """Fourier coefficients 0..M of grid samples gv (N, n), flat."""
            out = []
            for m in range(M + 1):
                w = mp.mpf(1 if m == 0 else 2) / N
                pr = profiles[m]
                for i in range(n):
                    out.append(w * mp.fsum(pr[j] * gv[j, i] for j in range(N)))
            for m in range(1, M + 1):
                pr = profiles[M + m]
                for i in range(n):
                    out.append((mp.mpf(2) / N) * mp.fsum(
                        pr[j] * gv[j, i] for j in range(N)))
            return np.array(out, dtype=object)

        def grid_of(c):
            gv = np.empty((N, n), dtype=object)
            for j in range(N):
                for i in range(n):
                    gv[j, i] = mp.mpf(0)
            for k in range(ndof):
                pr = profiles[sv.dof_profile[k]]
                i = sv.dof_comp[k]
                ck = c[k]
                if ck == 0:
                    continue
                for j in range(N):
                    gv[j, i] += ck * pr[j]
            return gv

        D = _mp_array_matrix(mp, sv.derivative_matrix)

        frame_cache = {}

        def frame_at(dhat):
            key = mp.nstr(dhat, 25)
            got = frame_cache.get(key)
            if got is None:
                lam = lam_star + ep2 * dhat
                xs = _mp_stationary(mp, sys, lam, x_star, sttol)
                P, _ = _mp_frame(mp, sys, lam, xs, omega_star)
                got = (lam, xs, P, P ** -1)
                frame_cache[key] = got
            return got

        def galerkin_residual(c, dhat, what):
            lam, xs, P, Pinv = frame_at(dhat)
            om = omega_star + ep2 * what
            gv = grid_of(c)
            x = np.empty((N, n), dtype=object)
            for j in range(N):
                for i in range(n):
                    x[j, i] = xs[i] + ep * mp.fsum(
                        P[i, r] * gv[j, r] for r in range(n))
            field = sys.rhs(x, lam) - sys.rhs(xs.reshape(1, n), lam)
            G = np.empty((N, n), dtype=object)
            for j in range(N):
                for i in range(n):
                    G[j, i] = mp.fsum(
                        Pinv[i, r] * field[j, r] for r in range(n)) / ep
            R = project(G)
            Dc = np.array([mp.fsum(D[k, l] * c[l] for l in range(ndof)
                                   if D[k, l] != 0) for k in range(ndof)],
                          dtype=object)
            return R - om * Dc

        # amplitude/phase weight vectors (exact)
        circle = _leading_circle(n, M)
        w_amp = _inner_weight_vector(circle)
        w_phase = _inner_weight_vector(circle.differentiate())

        c = np.array([mp.mpf(v) for v in flatten_series(circle)], dtype=object)
        dhat = mp.mpf(0)
        what = mp.mpf(0)

        res = None
        for it in range(max_iter):
            r_gal = galerkin_residual(c, dhat, what)
            r_amp = mp.fsum(w_amp[k] * c[k] for k in range(ndof)
                            if w_amp[k] != 0) - 1
            r_phase = mp.fsum(w_phase[k] * c[k] for k in range(ndof)
                              if w_phase[k] != 0)
            res = max(max(abs(v) for v in r_gal), abs(r_amp), abs(r_phase))
            if res < tol:
                break

            lam, xs, P, Pinv = frame_at(dhat)
            om = omega_star + ep2 * what
            gv = grid_of(c)
            x = np.empty((N, n), dtype=object)
            for j in range(N):
                for i in range(n):
                    x[j, i] = xs[i] + ep * mp.fsum(
                        P[i, r] * gv[j, r] for r in range(n))
            Jg = sys.jacobian(x, lam)                 # (N, n, n) object
            B = np.empty((N, n, n), dtype=object)
            for j in range(N):
                JP = [[mp.fsum(Jg[j][r][s] * P[s, col] for s in range(n))
                       for col in range(n)] for r in range(n)]
                for r in range(n):
                    for col in range(n):
                        B[j, r, col] = mp.fsum(
                            Pinv[r, s] * JP[s][col] for s in range(n))

            Jac = mp.zeros(ndof + 2, ndof + 2)
            gcol = np.empty((N, n), dtype=object)
            for k in range(ndof):
                pr = profiles[sv.dof_profile[k]]
                comp = sv.dof_comp[k]
                for j in range(N):
                    for i in range(n):
                        gcol[j, i] = B[j, i, comp] * pr[j]
                colv = project(gcol)
                for r in range(ndof):
                    Jac[r, k] = colv[r] - om * D[r, k]
            hfd = mp.mpf(10) ** (-dps // 4)
            rp = galerkin_residual(c, dhat + hfd, what)
            rm = galerkin_residual(c, dhat - hfd, what)
            Dc = np.array([mp.fsum(D[k, l] * c[l] for l in range(ndof)
                                   if D[k, l] != 0) for k in range(ndof)],
                          dtype=object)
            for r in range(ndof):
                Jac[r, ndof] = (rp[r] - rm[r]) / (2 * hfd)
                Jac[r, ndof + 1] = -ep2 * Dc[r]
            for k in range(ndof):
                Jac[ndof, k] = mp.mpf(w_amp[k])
                Jac[ndof + 1, k] = mp.mpf(w_phase[k])

            rhs_v = mp.matrix([v for v in r_gal] + [r_amp, r_phase])
            try:
                step = mp.lu_solve(Jac, rhs_v)
            except ZeroDivisionError as exc:
                raise SingularLinearization(
                    "singular linearization in extended precision") from exc
            for k in range(ndof):
                c[k] -= step[k]
            dhat -= step[ndof]
            what -= step[ndof + 1]
        else:
            raise NewtonDivergence(
                f"offset-form Newton did not reach {mp.nstr(tol, 3)} "
                f"(residual {mp.nstr(res, 3)})")

        z = unflatten_series(np.array([float(v) for v in c]), M, n)
        return HopfScaledSolution(
            eps=float(eps), lam_offset=float(dhat), omega_offset=float(what),
            lam_star=float(lam_star), omega_star=float(omega_star),
            a_dot_real=float(mp.re(a_dot)), a_dot_imag=float(mp.im(a_dot)),
            z=z, residual_norm=float(res), newton_iterations=it)


# --------------------------------------------------------------------------
# normal-form extraction
# --------------------------------------------------------------------------

def extract_hopf_normal_form(
        sol3: "HopfGalerkinSolution | HopfScaledSolution",
        crossing: CrossingEvent) -> HopfNormalForm:
    """Read the cubic normal-form data off a converged M=3 solve.

    The two scalar outputs come from how far the parameter and frequency
    moved, divided by the crossing speed of the critical pair; the change-
    of-coordinates coefficients are the Fourier components of z with the
    leading circle removed (even modes scale like eps, mode 1 and 3
    corrections in the critical plane like eps^2).  All have O(eps^2) error.
    """
    eps = sol3.eps
    if eps == 0.0:
        raise ValueError("normal-form extraction needs a nonzero amplitude")
    if sol3.z.max_mode < 3:
        raise ValueError(f"need modes through 3, got max mode {sol3.z.max_mode}")

    scaled = isinstance(sol3, HopfScaledSolution)
    if scaled:
        # Offsets and crossing speed were produced in one extended-precision
        # computation; reusing them keeps beta clear of double rounding in
        # lam - lam_star.
        da_r = sol3.a_dot_real
        da_i = sol3.a_dot_imag
        dlam = sol3.lam_offset
        dom = sol3.omega_offset
    else:
        if crossing.a_dot_real is None or crossing.a_dot_imag is None:
            raise ValueError("crossing speed missing: run crossing_speed_study "
                             "on the event first")
        da_r = crossing.a_dot_real
        da_i = crossing.a_dot_imag
        dlam = (sol3.lam - crossing.lam_star) / eps ** 2
        dom = (sol3.omega - crossing.omega_star) / eps ** 2
    beta_real = -da_r * dlam
    beta_imag = dom - da_i * dlam

    z = sol3.z
    a1c, b1c = sol3.mode1_correction
    e2 = eps ** 2
    return HopfNormalForm(
        beta_real=float(beta_real), beta_imag=float(beta_imag),
        crit_a0=z.a[0, :2] / eps,
        crit_a1=a1c[:2] / e2,
        crit_a2=z.a[2, :2] / eps,
        crit_a3=z.a[3, :2] / e2,
        crit_b1=b1c[:2] / e2,
        crit_b2=z.b[2, :2] / eps,
        crit_b3=z.b[3, :2] / e2,
        hyp_a0=z.a[0, 2:] / eps,
        hyp_a2=z.a[2, 2:] / eps,
        hyp_b2=z.b[2, 2:] / eps,
        eps=float(eps))


# --------------------------------------------------------------------------
# physical-space reconstruction
# --------------------------------------------------------------------------

def hopf_orbit_reconstruct(sol: HopfGalerkinSolution,
                           subspaces) -> Fourier1D:
    """Map a frame-coordinate solution back to a state-space orbit:
    stationary point plus eps times the frame applied to z."""
    if not hasattr(subspaces, "point"):
        raise TypeError("subspaces must supply stationary points via .point "
                        "(see StationaryFrameFamily)")
    pt = subspaces.point(sol.lam)
    S = subspaces(sol.lam)
    n = S.dim
    P = S.P.evaluate(0.0).reshape(n, n)
    a = sol.eps * sol.z.a @ P.T
    b = sol.eps * sol.z.b @ P.T
    a[0] += pt.x
    return Fourier1D(a, b)
