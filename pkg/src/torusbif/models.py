"""Built-in dynamical systems and the interfaces they implement.

Three families are provided:

* autonomous systems  dx/dt = F(x, lam)  with analytic Jacobians,
* periodically forced systems  dv/dtheta = F(v, theta, lam), 2pi-periodic
  in the drive phase theta,
* the spectral form of the Kuramoto-Sivashinsky flow on its complex
  Fourier modes, together with the real subsystem on the odd symmetric
  subspace and the Toeplitz/Hankel blocks its Jacobians are made of.

Evaluation functions are vectorized: the state may carry leading batch
axes, with the component axis last.  Jacobians gain two trailing axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import hankel, toeplitz

__all__ = [
    "AutonomousSystem",
    "ForcedSystem",
    "KSSpectralSystem",
    "lorenz_system",
    "forced_vdp_system",
    "ks_system",
    "toeplitz_antisymmetric",
    "toeplitz_symmetric",
    "hankel_from_modes",
]


def _state_array(x) -> np.ndarray:
    """Float view of a state, but leave object arrays alone so callers can
    evaluate in wider-than-double number types."""
    arr = np.asarray(x)
    if arr.dtype == object:
        return arr
    return arr.astype(float, copy=False)


@dataclass(frozen=True)
class AutonomousSystem:
    """dx/dt = F(x, lam) with state dimension ``dim``.

    ``rhs(x, lam)`` maps (..., n) -> (..., n); ``jacobian`` returns
    (..., n, n); ``jacobian_lambda`` the parameter derivative (..., n).
    ``reference`` carries closed-form data specific to the model (used by
    tests and starting guesses), keyed by name.
    """

    name: str
    dim: int
    rhs: Callable[[np.ndarray, float], np.ndarray]
    jacobian: Callable[[np.ndarray, float], np.ndarray]
    jacobian_lambda: Callable[[np.ndarray, float], np.ndarray]
    reference: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ForcedSystem:
    """dv/dtheta = F(v, theta, lam), 2pi-periodic in theta.

    Implementations reduce theta mod 2pi before evaluating the forcing, so
    shifting theta by full turns changes the result only at rounding level.
    """

    name: str
    dim: int
    rhs: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    jacobian: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    jacobian_lambda: Callable[[np.ndarray, np.ndarray, float], np.ndarray]
    reference: dict = field(default_factory=dict)


def lorenz_system(sigma: float = 10.0, b: float = 8.0 / 3.0) -> AutonomousSystem:
    """Lorenz equations with lam as the relative Rayleigh number.

        dx1 = sigma (x2 - x1)
        dx2 = lam x1 - x2 - x1 x3
        dx3 = x1 x2 - b x3

    Requires sigma > b + 1 so the nontrivial equilibria lose stability
    through a complex pair at a finite parameter value; the closed forms
    for that crossing ship in ``reference``.
    """
    if b <= 0:
        raise ValueError(f"b must be positive, got {b}")
    if sigma <= b + 1:
        raise ValueError(
            f"oscillatory loss of stability requires sigma > b+1, got sigma={sigma}, b={b}")

    def rhs(x, lam):
        x = _state_array(x)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        return np.stack([sigma * (x2 - x1),
                         lam * x1 - x2 - x1 * x3,
                         x1 * x2 - b * x3], axis=-1)

    def jacobian(x, lam):
        x = _state_array(x)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        J = np.zeros(x.shape[:-1] + (3, 3), dtype=x.dtype)
        J[..., 0, 0] = -sigma
        J[..., 0, 1] = sigma
        J[..., 1, 0] = lam - x3
        J[..., 1, 1] = -1.0
        J[..., 1, 2] = -x1
        J[..., 2, 0] = x2
        J[..., 2, 1] = x1
        J[..., 2, 2] = -b
        return J

    def jacobian_lambda(x, lam):
        x = _state_array(x)
        out = np.zeros_like(x)
        out[..., 1] = x[..., 0]
        return out

    lam_star = sigma * (sigma + b + 3.0) / (sigma - b - 1.0)
    omega_star = np.sqrt(b * (lam_star + sigma))
    a_dot_real = b * (sigma - b - 1.0) / (2.0 * (omega_star ** 2 + (sigma + b + 1.0) ** 2))

    def equilibrium(lam):
        r = np.sqrt(b * (lam - 1.0))
        return np.array([r, r, lam - 1.0])

    return AutonomousSystem(
        name="lorenz",
        dim=3,
        rhs=rhs,
        jacobian=jacobian,
        jacobian_lambda=jacobian_lambda,
        reference={
            "sigma": sigma,
            "b": b,
            "lambda_star": float(lam_star),
            "omega_star": float(omega_star),
            "a_dot_real": float(a_dot_real),
            "equilibrium": equilibrium,
        },
    )


def forced_vdp_system(sigma: float = 4.0, nu: float = 0.9) -> ForcedSystem:
    """Sinusoidally driven van der Pol oscillator, time rescaled by the
    drive so one forcing period is exactly 2pi in theta:

        dv1/dtheta = (1/nu) { v2 + sigma v1 (1 - v1^2/3) }
        dv2/dtheta = (1/nu) { -v1 + lam cos(theta) }

    nu in (0,1) is the ratio of drive frequency scales; lam the drive
    amplitude.  At sigma=0 the response is linear and exact expressions
    for the orbit and its constant stability matrix are in ``reference``.
    """
    if not 0.0 < nu < 1.0:
        raise ValueError(f"nu must lie in (0,1), got {nu}")
    if sigma < 0.0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")

    def rhs(v, theta, lam):
        v = np.asarray(v, dtype=float)
        theta = np.mod(theta, 2.0 * np.pi)
        v1, v2 = v[..., 0], v[..., 1]
        return np.stack([
            (v2 + sigma * v1 * (1.0 - v1 ** 2 / 3.0)) / nu,
            (-v1 + lam * np.cos(theta)) / nu,
        ], axis=-1)

    def jacobian(v, theta, lam):
        v = np.asarray(v, dtype=float)
        v1 = v[..., 0]
        J = np.zeros(v.shape[:-1] + (2, 2))
        J[..., 0, 0] = sigma * (1.0 - v1 ** 2) / nu
        J[..., 0, 1] = 1.0 / nu
        J[..., 1, 0] = -1.0 / nu
        return J

    def jacobian_lambda(v, theta, lam):
        v = np.asarray(v, dtype=float)
        theta = np.mod(theta, 2.0 * np.pi)
        out = np.zeros(np.broadcast_shapes(v.shape[:-1], np.shape(theta)) + (2,))
        out[..., 1] = np.cos(theta) / nu
        return out

    reference = {"sigma": sigma, "nu": nu}
    if sigma == 0.0:
        def linear_orbit(theta, lam):
            theta = np.asarray(theta, dtype=float)
            amp = lam / (1.0 - nu ** 2)
            return np.stack([amp * np.cos(theta), -amp * nu * np.sin(theta)], axis=-1)

        reference["linear_orbit"] = linear_orbit
        reference["linear_floquet_matrix"] = np.array([[0.0, 1.0], [-1.0, 0.0]]) / nu

    return ForcedSystem(
        name="forced_vdp",
        dim=2,
        rhs=rhs,
        jacobian=jacobian,
        jacobian_lambda=jacobian_lambda,
        reference=reference,
    )


# --------------------------------------------------------------------------
# Kuramoto-Sivashinsky in Fourier x-modes
# --------------------------------------------------------------------------

def _self_convolution(w: np.ndarray) -> np.ndarray:
    """Self-convolution of a two-sided mode vector (index j-L holds mode j)."""
    return np.convolve(w, w)


def toeplitz_antisymmetric(s: np.ndarray) -> np.ndarray:
    """Toeplitz matrix with first column (0, s_1, .., s_{L-1}) and first
    row (0, -s_1, .., -s_{L-1}) — the convolution part of the quadratic
    term's derivative."""
    s = np.asarray(s, dtype=float)
    col = np.concatenate([[0.0], s[:-1]])
    row = np.concatenate([[0.0], -s[:-1]])
    return toeplitz(col, row)


def toeplitz_symmetric(w: np.ndarray) -> np.ndarray:
    """Symmetric Toeplitz matrix with first column (0, w_1, .., w_{L-1})."""
    w = np.asarray(w, dtype=float)
    col = np.concatenate([[0.0], w[:-1]])
    return toeplitz(col)


def hankel_from_modes(s: np.ndarray) -> np.ndarray:
    """Hankel matrix with entries s_{i+j} (1-based), zero once i+j exceeds
    the mode count — the mirror part of the quadratic term's derivative."""
    s = np.asarray(s, dtype=float)
    L = s.size
    first_col = np.concatenate([s[1:], [0.0]])
    return hankel(first_col, np.zeros(L))


@dataclass(frozen=True)
class KSSpectralSystem:
    """Kuramoto-Sivashinsky flow truncated to complex Fourier x-modes 1..L
    (mode 0 vanishes identically):

        du/dt = -4 D^4 u + lam [ D^2 u - i D Q(u) ],   D = diag(1..L),

    where Q is the quadratic mode coupling.  States with u = i s for real
    s stay on that (odd, imaginary) subspace; the induced real flow and
    its analytic Jacobian are provided alongside.
    """

    mode_count: int

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(1, self.mode_count + 1, dtype=float)

    def quadratic_complex(self, u: np.ndarray) -> np.ndarray:
        """[Q(u)]_l = 1/2 sum_{j=1}^{l-1} u_{l-j} u_j
                      + sum_{j=1}^{L-l} conj(u_j) u_{l+j}."""
        u = np.asarray(u, dtype=complex)
        L = self.mode_count
        w = np.concatenate([np.conj(u[::-1]), [0.0], u])
        full = _self_convolution(w)  # modes -2L..2L at index +2L
        return 0.5 * full[2 * L + 1: 3 * L + 1]

    def quadratic_symmetric(self, s: np.ndarray) -> np.ndarray:
        """[Q_s(s)]_l = 1/2 sum_{j=1}^{l-1} s_{l-j} s_j
                        - sum_{j=1}^{L-l} s_j s_{l+j};
        satisfies Q(i s) = -Q_s(s) for real s."""
        s = np.asarray(s, dtype=float)
        L = self.mode_count
        w = np.concatenate([-s[::-1], [0.0], s])
        full = _self_convolution(w)
        return 0.5 * full[2 * L + 1: 3 * L + 1]

    def rhs_complex(self, u: np.ndarray, lam: float) -> np.ndarray:
        d = self.wavenumbers
        u = np.asarray(u, dtype=complex)
        return -4.0 * d ** 4 * u + lam * (d ** 2 * u - 1j * d * self.quadratic_complex(u))

    def rhs_symmetric(self, s: np.ndarray, lam: float) -> np.ndarray:
        """Flow restricted to u = i s: ds/dt = -4 D^4 s + lam [D^2 s + D Q_s(s)]."""
        d = self.wavenumbers
        s = np.asarray(s, dtype=float)
        return -4.0 * d ** 4 * s + lam * (d ** 2 * s + d * self.quadratic_symmetric(s))

    def jacobian_symmetric(self, s: np.ndarray, lam: float) -> np.ndarray:
        d = self.wavenumbers
        D2, D4 = np.diag(d ** 2), np.diag(d ** 4)
        dq = toeplitz_antisymmetric(s) - hankel_from_modes(s)
        return -4.0 * D4 + lam * (D2 + np.diag(d) @ dq)

    def linearization_eigenvalues_at_zero(self, lam: float) -> np.ndarray:
        """Growth rates -4 l^4 + lam l^2 of the trivial state, one per mode."""
        d = self.wavenumbers
        return -4.0 * d ** 4 + lam * d ** 2


def ks_system(L: int) -> KSSpectralSystem:
    if L < 2:
        raise ValueError(f"need at least two modes, got {L}")
    return KSSpectralSystem(mode_count=int(L))
