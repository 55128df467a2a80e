"""Constant-coefficient normal forms of linear ODEs with periodic
coefficients, and the invariant-subspace splitting used near oscillatory
bifurcations.

Given a 2pi-periodic matrix function A(theta), find a periodic change of
frame P(theta) and a constant matrix E with

    -P'(theta) + A(theta) P(theta) = P(theta) E,

so the pullback of  v' = A v  is the constant system  w' = E w.  The
exponents (eigenvalues of E) are fixed only up to integer shifts along the
imaginary axis; we normalize every exponent's imaginary part into
(-1/2, 1/2], transferring the leftover integer rotation into P.  Negative
real characteristic multipliers force an anti-periodic part of P, stored on
the half-angle circle.

Matrix-valued series are represented as ``Fourier1D`` objects whose
component axis is the row-major flattening of the matrix entries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .fourier import Fourier1D, inner_product_1d

__all__ = [
    "NonConvergence",
    "DefectiveMonodromy",
    "WrongCriticalCount",
    "FloquetDecomposition",
    "SubspaceDecomposition",
    "floquet_decompose",
    "split_constant_matrix",
    "split_invariant_subspaces",
    "to_floquet_variables",
    "from_floquet_variables",
    "solve_constant_coefficient",
    "matrix_series_from_grid",
    "matrix_series_grid",
    "matrix_series_times_constant",
    "identity_matrix_series",
]


class NonConvergence(RuntimeError):
    """An iterative or eigenvalue-based solve failed to reach tolerance."""


class DefectiveMonodromy(RuntimeError):
    """The monodromy operator lacks a full eigenbasis (Jordan structure)."""


class WrongCriticalCount(ValueError):
    """The spectrum does not have the expected near-axis structure."""


# --------------------------------------------------------------------------
# matrix-valued series helpers
# --------------------------------------------------------------------------

def matrix_series_from_grid(mats: np.ndarray, max_mode: int | None = None) -> Fourier1D:
    """(N, r, c) samples -> Fourier1D with dim r*c (row-major entries)."""
    mats = np.asarray(mats, dtype=float)
    N, r, c = mats.shape
    return Fourier1D.from_grid(mats.reshape(N, r * c), max_mode)


def matrix_series_grid(series: Fourier1D, N: int, rows: int, cols: int) -> np.ndarray:
    """Evaluate a matrix series on the N-point grid, shape (N, rows, cols)."""
    return series.grid_values(N).reshape(N, rows, cols)


def matrix_series_times_constant(series: Fourier1D, T: np.ndarray,
                                 rows: int, cols: int) -> Fourier1D:
    """Pointwise product  theta -> M(theta) @ T  for constant T (cols, c2)."""
    T = np.asarray(T, dtype=float)
    modes = series.complex_modes().reshape(-1, rows, cols)
    out = modes @ T
    return Fourier1D.from_complex_modes(out.reshape(out.shape[0], rows * T.shape[1]))


def identity_matrix_series(n: int) -> Fourier1D:
    return Fourier1D.constant(np.eye(n).ravel())


# --------------------------------------------------------------------------
# results
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FloquetDecomposition:
    """Constant-coefficient form of a periodic linear system.

    ``P_periodic`` holds the periodic frame columns (dim*n_plus components,
    row-major over (state row, column)); ``P_anti`` holds any anti-periodic
    columns as a series in the half angle psi = theta/2 (odd psi-modes
    only).  ``exponents`` lists the normalized exponents, periodic part
    first, in the column order of the frames.
    """

    dim: int
    exponents: np.ndarray
    E_periodic: np.ndarray
    P_periodic: Fourier1D
    E_anti: np.ndarray
    P_anti: Fourier1D | None

    @property
    def n_plus(self) -> int:
        return self.E_periodic.shape[0]

    @property
    def n_minus(self) -> int:
        return self.E_anti.shape[0]

    def multipliers(self) -> np.ndarray:
        """Characteristic multipliers exp(2 pi mu), anti part negated."""
        plus = np.exp(2 * np.pi * np.linalg.eigvals(self.E_periodic)) \
            if self.n_plus else np.zeros(0, complex)
        minus = -np.exp(2 * np.pi * np.linalg.eigvals(self.E_anti)) \
            if self.n_minus else np.zeros(0, complex)
        return np.concatenate([plus, minus])

    def periodic_frame_grid(self, N: int) -> np.ndarray:
        return matrix_series_grid(self.P_periodic, N, self.dim, self.n_plus)

    def residual(self, A: Fourier1D, N: int = 0) -> float:
        """Max-norm defect of the defining relation on a grid."""
        n = self.dim
        N = N or max(4 * (A.max_mode + self.P_periodic.max_mode) + 4, 32)
        Agrid = matrix_series_grid(A, N, n, n)
        worst = 0.0
        if self.n_plus:
            P = self.periodic_frame_grid(N)
            dP = matrix_series_grid(self.P_periodic.differentiate(), N, n, self.n_plus)
            R = -dP + Agrid @ P - P @ self.E_periodic[None]
            worst = max(worst, float(np.max(np.abs(R))))
        if self.n_minus:
            # columns live on the doubled circle; d/dtheta = (1/2) d/dpsi
            Npsi = 2 * N
            Pm = matrix_series_grid(self.P_anti, Npsi, n, self.n_minus)
            dPm = 0.5 * matrix_series_grid(self.P_anti.differentiate(), Npsi, n, self.n_minus)
            Atile = np.concatenate([Agrid, Agrid], axis=0)
            R = -dPm + Atile @ Pm - Pm @ self.E_anti[None]
            worst = max(worst, float(np.max(np.abs(R))))
        return worst

    def to_json(self) -> str:
        return json.dumps({
            "kind": "floquet",
            "dim": self.dim,
            "exponents_re": self.exponents.real.tolist(),
            "exponents_im": self.exponents.imag.tolist(),
            "E_periodic": self.E_periodic.tolist(),
            "P_periodic": json.loads(self.P_periodic.to_json()),
            "E_anti": self.E_anti.tolist(),
            "P_anti": json.loads(self.P_anti.to_json()) if self.P_anti is not None else None,
        })

    @classmethod
    def from_json(cls, text: str) -> "FloquetDecomposition":
        doc = json.loads(text)
        if doc.get("kind") != "floquet":
            raise ValueError("not a decomposition document")
        p_anti = doc["P_anti"]

        def as_square(rows):
            k = len(rows)
            return np.array(rows, dtype=float).reshape(k, k) if k else np.zeros((0, 0))

        return cls(
            dim=int(doc["dim"]),
            exponents=np.array(doc["exponents_re"]) + 1j * np.array(doc["exponents_im"]),
            E_periodic=as_square(doc["E_periodic"]),
            P_periodic=Fourier1D.from_json(json.dumps(doc["P_periodic"])),
            E_anti=as_square(doc["E_anti"]),
            P_anti=Fourier1D.from_json(json.dumps(p_anti)) if p_anti is not None else None,
        )


@dataclass(frozen=True)
class SubspaceDecomposition:
    """Frame ordered as (critical pair, hyperbolic part, optional phase
    column), with E in exact block form: leading 2x2 rotation-scaling block
    [[alpha_real, -alpha_imag], [alpha_imag, alpha_real]], a hyperbolic
    middle, and a trailing (near-)zero entry when a phase direction exists.
    """

    dim: int
    alpha_real: float
    alpha_imag: float
    E: np.ndarray
    P: Fourier1D          # matrix series, dim*dim components
    n_hyperbolic: int
    has_zero_column: bool
    exponents: np.ndarray  # aligned with columns (pair listed as a+ib, a-ib)

    @property
    def E_critical(self) -> np.ndarray:
        return self.E[:2, :2]

    @property
    def E_hyperbolic(self) -> np.ndarray:
        return self.E[2:2 + self.n_hyperbolic, 2:2 + self.n_hyperbolic]

    def frame_grid(self, N: int) -> np.ndarray:
        return matrix_series_grid(self.P, N, self.dim, self.dim)

    def columns(self, idx) -> Fourier1D:
        sel = np.atleast_1d(idx)
        comps = [i * self.dim + j for i in range(self.dim) for j in sel]
        return self.P.component(comps)

    def replace_column(self, j: int, col: Fourier1D) -> "SubspaceDecomposition":
        """Copy with frame column j replaced (same span expected)."""
        M = max(self.P.max_mode, col.max_mode)
        a = self.P.pad(M).a.copy()
        b = self.P.pad(M).b.copy()
        cp = col.pad(M)
        for i in range(self.dim):
            a[:, i * self.dim + j] = cp.a[:, i]
            b[:, i * self.dim + j] = cp.b[:, i]
        return SubspaceDecomposition(
            dim=self.dim, alpha_real=self.alpha_real, alpha_imag=self.alpha_imag,
            E=self.E, P=Fourier1D(a, b), n_hyperbolic=self.n_hyperbolic,
            has_zero_column=self.has_zero_column, exponents=self.exponents)

    def residual(self, A: Fourier1D, N: int = 0) -> float:
        n = self.dim
        N = N or max(4 * (A.max_mode + self.P.max_mode) + 4, 32)
        Agrid = matrix_series_grid(A, N, n, n)
        P = self.frame_grid(N)
        dP = matrix_series_grid(self.P.differentiate(), N, n, n)
        R = -dP + Agrid @ P - P @ self.E[None]
        return float(np.max(np.abs(R)))


# --------------------------------------------------------------------------
# eigen machinery
# --------------------------------------------------------------------------

def _complex_function_grid(Q: np.ndarray, N: int) -> np.ndarray:
    """Samples of sum_k Q[k] e^{i k theta} on the N-point grid; Q indexed
    k = -K..K along axis 0."""
    K = (Q.shape[0] - 1) // 2
    spec = np.zeros((N,) + Q.shape[1:], dtype=complex)
    for k in range(-K, K + 1):
        spec[k % N] += Q[k + K]
    return np.fft.ifft(spec, axis=0) * N


def _deterministic_phase(v: np.ndarray) -> np.ndarray:
    """Rotate a complex sample array so sum(v^2) is real nonnegative
    (makes Re and Im parts orthogonal with the Re part dominant)."""
    s = np.sum(v * v)
    if abs(s) < 1e-300:
        return v
    return v * np.exp(-0.5j * np.angle(s))


def _deterministic_sign(z: Fourier1D) -> Fourier1D:
    coeffs = np.concatenate([z.a.ravel(), z.b.ravel()])
    k = int(np.argmax(np.abs(coeffs)))
    return -z if coeffs[k] < 0 else z


def _unit(z: Fourier1D) -> Fourier1D:
    nrm = z.norm()
    if nrm == 0:
        raise NonConvergence("zero column in frame assembly")
    return z * (1.0 / nrm)


def floquet_decompose(A: Fourier1D, mode_count: int | None = None,
                      tail_tol: float = 1e-8, cluster_tol: float = 1e-6,
                      rank_tol: float = 1e-6, residual_tol: float = 1e-9,
                      normalize: bool = True,
                      max_mode_count: int = 256) -> FloquetDecomposition:
    """Decompose the periodic linear operator with coefficient matrix A.

    Assembles the spectral discretization of  A(theta) - d/dtheta  over
    theta-modes -K..K, takes its eigenpairs, keeps those whose mode tails
    are resolved, normalizes exponent imaginary parts into (-1/2, 1/2] by
    integer mode transfer, and groups the survivors into exponent classes.
    Constant input returns (A0, identity) directly; with ``normalize`` the
    wrapped form is produced even then if A0's spectrum needs it.  When
    ``mode_count`` is not pinned, the resolution is doubled until the
    defining residual passes (or ``max_mode_count`` is exceeded).
    """
    n = int(round(np.sqrt(A.dim)))
    if n * n != A.dim:
        raise ValueError(f"series with {A.dim} components is not square")

    constant = A.max_mode == 0 or (A.tail_norm(0) == 0.0)
    if constant:
        A0 = A.a[0].reshape(n, n)
        eigs = np.linalg.eigvals(A0)
        if not normalize or np.all((eigs.imag > -0.5) & (eigs.imag <= 0.5)):
            return FloquetDecomposition(
                dim=n, exponents=np.sort_complex(eigs),
                E_periodic=A0.copy(), P_periodic=identity_matrix_series(n),
                E_anti=np.zeros((0, 0)), P_anti=None)

    K = mode_count if mode_count is not None else max(2 * A.max_mode + 8, 16)
    while True:
        try:
            return _decompose_at_resolution(A, n, K, tail_tol, cluster_tol,
                                            rank_tol, residual_tol)
        except (NonConvergence, DefectiveMonodromy):
            if mode_count is not None or 2 * K > max_mode_count:
                raise
            K *= 2


def _decompose_at_resolution(A: Fourier1D, n: int, K: int, tail_tol: float,
                             cluster_tol: float, rank_tol: float,
                             residual_tol: float) -> FloquetDecomposition:
    MA = A.max_mode
    Ahat = A.complex_modes().reshape(MA + 1, n, n)
    nb = 2 * K + 1
    big = np.zeros((nb * n, nb * n), dtype=complex)

    def blk(k):
        return slice((k + K) * n, (k + K + 1) * n)

    eye = np.eye(n)
    for k in range(-K, K + 1):
        big[blk(k), blk(k)] -= 1j * k * eye
        for d in range(-MA, MA + 1):
            j = k - d
            if -K <= j <= K:
                big[blk(k), blk(j)] += Ahat[d] if d >= 0 else np.conj(Ahat[-d])

    vals, vecs = np.linalg.eig(big)

    # keep eigenfunctions whose outer mode bands carry (almost) no energy
    Q = vecs.T.reshape(-1, nb, n)
    energy = np.sum(np.abs(Q) ** 2, axis=(1, 2))
    bands = max(2, K // 8)
    tail = (np.sum(np.abs(Q[:, :bands]) ** 2, axis=(1, 2))
            + np.sum(np.abs(Q[:, -bands:]) ** 2, axis=(1, 2)))
    keep = tail < tail_tol * energy
    vals, Q, tail_kept = vals[keep], Q[keep], tail[keep] / energy[keep]
    if vals.size == 0:
        raise NonConvergence("no resolved eigenfunctions; increase mode_count")

    # wrap Im into (-1/2, 1/2] by shifting modes: (q e^{im theta})_k = q_{k-m}
    def apply_shift(q, m):
        out = np.zeros_like(q)
        if m == 0:
            out[:] = q
        elif m > 0:
            out[m:] = q[:-m]
        else:
            out[:m] = q[-m:]
        return out

    shifts = np.ceil(vals.imag - 0.5).astype(int)
    wrapped = vals - 1j * shifts
    Qw = np.array([apply_shift(Q[i], m) for i, m in enumerate(shifts)])

    # cluster by exponent, imaginary part taken modulo 1
    order = np.lexsort((wrapped.imag, wrapped.real))
    clusters: list[dict] = []
    for i in order:
        placed = False
        for cl in clusters:
            dre = abs(wrapped[i].real - cl["mu"].real)
            dim_ = abs(wrapped[i].imag - cl["mu"].imag)
            dim_ = min(dim_, 1.0 - dim_)
            if dre + dim_ < cluster_tol:
                cl["members"].append(i)
                placed = True
                break
        if not placed:
            clusters.append({"mu": wrapped[i], "members": [i]})

    pair_tol = 10 * cluster_tol

    # a class sitting exactly at the band boundary (negative real multiplier)
    # shows up on both the +1/2 and -1/2 sides; fold the negative side up so
    # all its members share one representative
    for cl in clusters:
        ims = wrapped[cl["members"]].imag
        if ims.max() - ims.min() > 0.5:
            for i in cl["members"]:
                if wrapped[i].imag < 0:
                    shifts[i] -= 1
                    wrapped[i] = vals[i] - 1j * shifts[i]
                    Qw[i] = apply_shift(Q[i], shifts[i])

    def refine_eigenpair(mu, x):
        """Sharpen an eigenpair of the big matrix by inverse iteration."""
        for _ in range(2):
            try:
                y = np.linalg.solve(big - (mu + 1e-9) * np.eye(big.shape[0]), x)
            except np.linalg.LinAlgError:
                return mu, x
            x = y / np.linalg.norm(y)
        return complex(np.vdot(x, big @ x)), x

    core = slice((K + 1) // 2, nb - (K + 1) // 2)  # modes untouched by wrap loss
    for cl in clusters:
        # far-shifted copies lose edge coefficients in the wrap, so rank
        # counting and member selection use only the central mode window of
        # members with moderate shifts
        mem = [i for i in cl["members"] if abs(shifts[i]) <= (K + 1) // 2]
        if not mem:
            mem = cl["members"]
        stack_core = Qw[mem][:, core].reshape(len(mem), -1)
        core_norms = np.linalg.norm(stack_core, axis=1)
        stack_core = stack_core / np.maximum(core_norms, 1e-300)[:, None]
        s = np.linalg.svd(stack_core, compute_uv=False)
        g = int(np.sum(s > rank_tol * s[0]))
        order_q = sorted(range(len(mem)),
                         key=lambda r: (tail_kept[mem[r]], abs(shifts[mem[r]])))
        chosen: list[int] = []
        basis_rows: list[np.ndarray] = []
        for r in order_q:
            cand = stack_core[r]
            for row in basis_rows:
                cand = cand - np.vdot(row, cand) * row
            if np.linalg.norm(cand) > 0.3:
                chosen.append(r)
                basis_rows.append(cand / np.linalg.norm(cand))
            if len(chosen) == g:
                break
        if len(chosen) < g:
            raise NonConvergence("could not select independent eigenfunctions")
        basis = []
        basis_mu = []
        for r in chosen:
            gi = mem[r]
            mu_r, x_r = refine_eigenpair(vals[gi], Q[gi].ravel())
            basis.append(apply_shift(x_r.reshape(nb, n), shifts[gi]))
            basis_mu.append(mu_r - 1j * shifts[gi])
        cl["mu"] = basis_mu[0]
        cl["basis"] = np.array(basis)
        cl["basis_mu"] = basis_mu
        cl["g"] = g

    total = sum(cl["g"] for cl in clusters)
    if total < n:
        raise DefectiveMonodromy(
            f"only {total} independent eigendirections found for dimension {n}")
    if total > n:
        raise NonConvergence(
            f"{total} eigendirection candidates for dimension {n}; "
            "exponent clusters did not separate (adjust cluster_tol)")

    # classify and realify
    Ngrid = max(2 * nb, 32)
    while Ngrid & (Ngrid - 1):
        Ngrid += Ngrid & -Ngrid
    col_modes = K

    def realify_series(v: np.ndarray) -> Fourier1D:
        w = _deterministic_phase(v)
        return Fourier1D.from_grid(np.ascontiguousarray(w.real), col_modes)

    periodic_cols: list[Fourier1D] = []
    periodic_diag: list[np.ndarray] = []
    periodic_expo: list[complex] = []
    anti_cols: list[Fourier1D] = []
    anti_diag: list[float] = []
    anti_expo: list[complex] = []

    clusters.sort(key=lambda cl: (round(cl["mu"].real, 9), round(abs(cl["mu"].imag), 9),
                                  -cl["mu"].imag))
    consumed = [False] * len(clusters)
    for ci, cl in enumerate(clusters):
        if consumed[ci]:
            continue
        consumed[ci] = True
        mu = cl["mu"]
        if abs(mu.imag) < pair_tol:
            # real exponent: real eigenspace of dimension g
            mats = []
            for q in cl["basis"]:
                v = _complex_function_grid(q, Ngrid)
                w = _deterministic_phase(v)
                mats.append(w.real.ravel())
                mats.append(w.imag.ravel())
            stack = np.array(mats)
            norms = np.linalg.norm(stack, axis=1)
            stack = stack[norms > 1e-8 * norms.max()]
            _u, s, vh = np.linalg.svd(stack / np.linalg.norm(stack, axis=1, keepdims=True),
                                      full_matrices=False)
            g = cl["g"]
            if np.sum(s > rank_tol * s[0]) < g:
                raise NonConvergence("real eigenspace realification lost rank")
            for r in range(g):
                col = Fourier1D.from_grid(vh[r].reshape(Ngrid, n), col_modes)
                periodic_cols.append(_deterministic_sign(_unit(col)))
                periodic_diag.append(np.array([[mu.real]]))
                periodic_expo.append(complex(mu.real, 0.0))
        elif abs(mu.imag - 0.5) < pair_tol:
            # negative real multiplier: anti-periodic real columns on psi = theta/2
            for q, mu_q in zip(cl["basis"], cl["basis_mu"]):
                v = _complex_function_grid(q, Ngrid)          # values on theta grid
                tiled = np.concatenate([v, v], axis=0)        # two turns of theta
                psi = np.pi * np.arange(2 * Ngrid) / Ngrid
                side = 1.0 if mu_q.imag > 0 else -1.0
                p = tiled * np.exp(1j * side * psi)[:, None]
                w = _deterministic_phase(p)
                col = Fourier1D.from_grid(np.ascontiguousarray(w.real), 2 * col_modes + 1)
                anti_cols.append(_deterministic_sign(_unit(col)))
                anti_diag.append(mu.real)
                anti_expo.append(complex(mu.real, 0.5))
        else:
            # complex pair: use the member with negative imaginary part,
            # mu = a - i b, b > 0; partner cluster is consumed together
            partner = None
            for cj in range(len(clusters)):
                if cj == ci or consumed[cj]:
                    continue
                mu2 = clusters[cj]["mu"]
                if abs(mu2.real - mu.real) < pair_tol and abs(mu2.imag + mu.imag) < pair_tol:
                    partner = cj
                    break
            if partner is None:
                raise NonConvergence(
                    f"conjugate partner of exponent {mu:.6g} not found")
            consumed[partner] = True
            neg = cl if mu.imag < 0 else clusters[partner]
            a = neg["mu"].real
            b = -neg["mu"].imag
            for q in neg["basis"]:
                v = _complex_function_grid(q, Ngrid)
                w = _deterministic_phase(v)
                scale = np.sqrt((np.sum(w.real ** 2) + np.sum(w.imag ** 2)) / (2 * Ngrid))
                w = w / scale
                cr = Fourier1D.from_grid(np.ascontiguousarray(w.real), col_modes)
                si = Fourier1D.from_grid(np.ascontiguousarray(w.imag), col_modes)
                flip = _deterministic_sign(cr) is not cr
                if flip:
                    cr, si = -cr, -si
                periodic_cols.append(cr)
                periodic_cols.append(si)
                periodic_diag.append(np.array([[a, -b], [b, a]]))
                periodic_expo.append(complex(a, b))
                periodic_expo.append(complex(a, -b))

    n_plus = len(periodic_cols)
    n_minus = len(anti_cols)
    E_plus = np.zeros((n_plus, n_plus))
    pos = 0
    for blk_mat in periodic_diag:
        w = blk_mat.shape[0]
        E_plus[pos:pos + w, pos:pos + w] = blk_mat
        pos += w
    E_minus = np.diag(np.array(anti_diag, dtype=float)) if n_minus else np.zeros((0, 0))

    def pack(cols: list[Fourier1D]) -> Fourier1D:
        M = max(c.max_mode for c in cols)
        a = np.zeros((M + 1, n * len(cols)))
        bb = np.zeros_like(a)
        for j, c in enumerate(cols):
            cp = c.pad(M)
            for i in range(n):
                a[:, i * len(cols) + j] = cp.a[:, i]
                bb[:, i * len(cols) + j] = cp.b[:, i]
        return Fourier1D(a, bb)

    F = FloquetDecomposition(
        dim=n,
        exponents=np.array(periodic_expo + anti_expo),
        E_periodic=E_plus,
        P_periodic=pack(periodic_cols) if n_plus else identity_matrix_series(0),
        E_anti=E_minus,
        P_anti=pack(anti_cols) if n_minus else None,
    )
    res = F.residual(A)
    if res > residual_tol:
        raise NonConvergence(f"defining residual {res:.3e} above {residual_tol:.1e}")
    return F


# --------------------------------------------------------------------------
# invariant-subspace splitting
# --------------------------------------------------------------------------

def _real_block_split(A0: np.ndarray, expects_zero: bool,
                      gap_tol: float, zero_tol: float, defect_tol: float):
    """Order and realify the eigenstructure of a real constant matrix as
    (critical pair, hyperbolic ascending Re, optional zero).  Returns
    (T, E, alpha, exponent list)."""
    n = A0.shape[0]
    vals, vecs = np.linalg.eig(A0)

    idx_zero = None
    if expects_zero:
        idx_zero = int(np.argmin(np.abs(vals)))
        if abs(vals[idx_zero]) > zero_tol:
            raise WrongCriticalCount(
                f"phase exponent expected near 0, closest is {vals[idx_zero]:.3e}")

    # conjugate pairs: indices with Im > 0, matched to their mirror
    used = np.zeros(n, bool)
    if idx_zero is not None:
        used[idx_zero] = True
    pairs = []
    reals = []
    for i in range(n):
        if used[i]:
            continue
        if abs(vals[i].imag) < 1e-12 * max(1.0, abs(vals[i])):
            reals.append(i)
            used[i] = True
            continue
        if vals[i].imag < 0:
            continue
        j_candidates = [j for j in range(n)
                        if not used[j] and j != i
                        and abs(vals[j] - np.conj(vals[i])) < 1e-8 * max(1.0, abs(vals[i]))]
        if not j_candidates:
            raise WrongCriticalCount("unpaired complex eigenvalue in a real matrix")
        j = j_candidates[0]
        used[i] = used[j] = True
        pairs.append((i, j))
    if not pairs:
        raise WrongCriticalCount("no complex pair to take as the critical one")

    crit = min(pairs, key=lambda ij: abs(vals[ij[0]].real))
    pairs.remove(crit)
    for i in reals:
        if abs(vals[i].real) < gap_tol:
            raise WrongCriticalCount(
                f"real exponent {vals[i].real:.3e} inside the hyperbolic gap")
    for i, _ in pairs:
        if abs(vals[i].real) < gap_tol:
            raise WrongCriticalCount("second near-axis pair present")

    cols = []
    E_blocks = []
    expo = []

    def realify_pair(i_pos):
        # eigenvector for mu = a - i b (b>0): conjugate of the Im>0 one
        mu = np.conj(vals[i_pos])
        v = np.conj(vecs[:, i_pos])
        v = _deterministic_phase(v)
        scale = np.sqrt((np.sum(v.real ** 2) + np.sum(v.imag ** 2)) / 2.0)
        v = v / scale
        c1, c2 = v.real.copy(), v.imag.copy()
        k = int(np.argmax(np.abs(c1)))
        if c1[k] < 0:
            c1, c2 = -c1, -c2
        a, b = mu.real, -mu.imag
        return [c1, c2], np.array([[a, -b], [b, a]]), [complex(a, b), complex(a, -b)]

    cpair_cols, cpair_E, cpair_ex = realify_pair(crit[0])
    cols += cpair_cols
    E_blocks.append(cpair_E)
    expo += cpair_ex
    alpha = complex(cpair_E[0, 0], cpair_E[1, 0])

    hyper: list = list(reals) + list(pairs)
    hyper.sort(key=lambda item: (vals[item].real, 0.0) if not isinstance(item, tuple)
               else (vals[item[0]].real, abs(vals[item[0]].imag)))
    n_hyp = 0
    for item in hyper:
        if isinstance(item, tuple):
            pc, pe, px = realify_pair(item[0])
            cols += pc
            E_blocks.append(pe)
            expo += px
            n_hyp += 2
        else:
            v = vecs[:, item]
            w = _deterministic_phase(v).real
            w = w / np.linalg.norm(w)
            k = int(np.argmax(np.abs(w)))
            if w[k] < 0:
                w = -w
            cols.append(w)
            E_blocks.append(np.array([[vals[item].real]]))
            expo.append(complex(vals[item].real, 0.0))
            n_hyp += 1

    if idx_zero is not None:
        v = vecs[:, idx_zero]
        w = _deterministic_phase(v).real
        w = w / np.linalg.norm(w)
        k = int(np.argmax(np.abs(w)))
        if w[k] < 0:
            w = -w
        cols.append(w)
        E_blocks.append(np.array([[vals[idx_zero].real]]))
        expo.append(vals[idx_zero])

    T = np.column_stack(cols)
    sv = np.linalg.svd(T, compute_uv=False)
    if sv[-1] < defect_tol * sv[0]:
        raise DefectiveMonodromy(
            f"frame condition {sv[0] / sv[-1]:.2e}: eigenvectors nearly dependent")
    E = np.zeros((n, n))
    pos = 0
    for blk_mat in E_blocks:
        w = blk_mat.shape[0]
        E[pos:pos + w, pos:pos + w] = blk_mat
        pos += w
    return T, E, alpha, np.array(expo), n_hyp


def split_constant_matrix(A0: np.ndarray, expects_zero: bool = False,
                          gap_tol: float = 1e-6, zero_tol: float = 1e-8,
                          defect_tol: float = 1e-10) -> SubspaceDecomposition:
    """Subspace splitting of a constant matrix (stationary-point case)."""
    A0 = np.asarray(A0, dtype=float)
    T, E, alpha, expo, n_hyp = _real_block_split(A0, expects_zero,
                                                 gap_tol, zero_tol, defect_tol)
    return SubspaceDecomposition(
        dim=A0.shape[0], alpha_real=alpha.real, alpha_imag=alpha.imag,
        E=E, P=Fourier1D.constant(T.ravel()),
        n_hyperbolic=n_hyp, has_zero_column=expects_zero, exponents=expo)


def split_invariant_subspaces(F: FloquetDecomposition, expects_zero: bool = False,
                              gap_tol: float = 1e-6, zero_tol: float = 1e-8,
                              defect_tol: float = 1e-10) -> SubspaceDecomposition:
    """Reorder a full decomposition into (critical pair, hyperbolic, phase)
    frame columns with E in exact block form."""
    if F.n_minus:
        raise WrongCriticalCount(
            "anti-periodic part present; the oscillatory-bifurcation frames "
            "require all multipliers off the negative real axis")
    T, E, alpha, expo, n_hyp = _real_block_split(F.E_periodic, expects_zero,
                                                 gap_tol, zero_tol, defect_tol)
    n = F.dim
    P = matrix_series_times_constant(F.P_periodic, T, n, n)

    # joint renormalization of each block's columns (keeps block structure)
    sizes = [2]
    i = 0
    while i < n_hyp:
        # a complex hyperbolic pair occupies two adjacent exponent slots
        if i + 1 < n_hyp and abs(expo[2 + i].imag) > 0:
            sizes.append(2)
            i += 2
        else:
            sizes.append(1)
            i += 1
    if expects_zero:
        sizes.append(1)

    def column(j):
        comps = [r * n + j for r in range(n)]
        return P.component(comps)

    newP_cols = []
    pos = 0
    for w in sizes:
        if w == 1:
            c = column(pos)
            newP_cols.append(_deterministic_sign(_unit(c)))
        else:
            c1, c2 = column(pos), column(pos + 1)
            s = np.sqrt((c1.norm() ** 2 + c2.norm() ** 2) / 2.0)
            c1, c2 = c1 * (1.0 / s), c2 * (1.0 / s)
            if _deterministic_sign(c1) is not c1:
                c1, c2 = -c1, -c2
            newP_cols.append(c1)
            newP_cols.append(c2)
        pos += w

    M = max(c.max_mode for c in newP_cols)
    a = np.zeros((M + 1, n * n))
    b = np.zeros_like(a)
    for j, c in enumerate(newP_cols):
        cp = c.pad(M)
        for r in range(n):
            a[:, r * n + j] = cp.a[:, r]
            b[:, r * n + j] = cp.b[:, r]
    return SubspaceDecomposition(
        dim=n, alpha_real=alpha.real, alpha_imag=alpha.imag,
        E=E, P=Fourier1D(a, b), n_hyperbolic=n_hyp,
        has_zero_column=expects_zero, exponents=expo)


# --------------------------------------------------------------------------
# changes of variables and constant-coefficient solves
# --------------------------------------------------------------------------

def to_floquet_variables(v: Fourier1D, F: FloquetDecomposition,
                         max_mode: int | None = None) -> Fourier1D:
    """Solve v(theta) = P(theta) w(theta) for w (periodic part only)."""
    if F.n_minus:
        raise NotImplementedError("transform with anti-periodic columns not supported")
    n = F.dim
    M = max_mode if max_mode is not None else v.max_mode + F.P_periodic.max_mode
    N = max(4 * (v.max_mode + F.P_periodic.max_mode) + 4, 2 * M + 2, 32)
    while N & (N - 1):
        N += N & -N
    P = F.periodic_frame_grid(N)
    rhs = v.grid_values(N)
    w = np.linalg.solve(P, rhs[:, :, None])[:, :, 0]
    return Fourier1D.from_grid(w, min(M, (N - 1) // 2))


def from_floquet_variables(w: Fourier1D, F: FloquetDecomposition,
                           max_mode: int | None = None) -> Fourier1D:
    """Compose back v(theta) = P(theta) w(theta)."""
    if F.n_minus:
        raise NotImplementedError("transform with anti-periodic columns not supported")
    M = max_mode if max_mode is not None else w.max_mode + F.P_periodic.max_mode
    N = max(2 * (w.max_mode + F.P_periodic.max_mode) + 2, 32)
    while N & (N - 1):
        N += N & -N
    P = F.periodic_frame_grid(N)
    v = (P @ w.grid_values(N)[:, :, None])[:, :, 0]
    return Fourier1D.from_grid(v, min(M, (N - 1) // 2))


def solve_constant_coefficient(E: np.ndarray, g: Fourier1D) -> Fourier1D:
    """Mode-by-mode solve of  -w' + E w = g  for periodic w.

    Requires E - i k I nonsingular for every integer |k| <= max mode of g
    (no exponent of E on the imaginary axis at integer height).
    """
    E = np.asarray(E, dtype=float)
    n = E.shape[0]
    if g.dim != n:
        raise ValueError(f"dimension mismatch: E is {n}, g has {g.dim}")
    modes = g.complex_modes()
    out = np.zeros_like(modes)
    eye = np.eye(n)
    for k in range(g.max_mode + 1):
        out[k] = np.linalg.solve(E - 1j * k * eye, modes[k])
    return Fourier1D.from_complex_modes(out)
