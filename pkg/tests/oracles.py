"""Independent reference implementations used to cross-check the library.

Everything in this file is deliberately naive (quadrature, dense loops,
adaptive time integration) and must stay that way: these are the oracles the
fast spectral code is tested against.  Do not import library code here beyond
plain data access, and do not "optimize" these routines.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp


# ---------------------------------------------------------------------------
# quadrature inner products (trapezoid on equispaced grids == spectrally exact
# for trigonometric polynomials sampled above their Nyquist rate)

def quad_inner_1d(values1: np.ndarray, values2: np.ndarray) -> float:
    """(1/2pi) * integral of the pointwise dot product over one period.

    values*: (N, n) samples on theta_j = 2*pi*j/N.
    """
    v1 = np.atleast_2d(np.asarray(values1, dtype=float))
    v2 = np.atleast_2d(np.asarray(values2, dtype=float))
    return float(np.mean(np.sum(v1 * v2, axis=-1)))


def quad_inner_2d(values1: np.ndarray, values2: np.ndarray) -> float:
    """(1/(2pi)^2) * double integral of the pointwise dot product.

    values*: (N1, N2, n) samples on the tensor grid.
    """
    v1 = np.asarray(values1, dtype=float)
    v2 = np.asarray(values2, dtype=float)
    return float(np.mean(np.sum(v1 * v2, axis=-1)))


# ---------------------------------------------------------------------------
# dense convolutions

def dense_product_modes_1d(c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    """Exact complex-mode coefficients of a pointwise product, dense O(M^2).

    c1: (2*M1+1, ...) complex modes ordered m = -M1..M1; likewise c2.
    Returns modes -(M1+M2)..(M1+M2).  Trailing axes are broadcast factors
    (the product is componentwise over them).
    """
    c1 = np.asarray(c1, dtype=complex)
    c2 = np.asarray(c2, dtype=complex)
    m1 = (c1.shape[0] - 1) // 2
    m2 = (c2.shape[0] - 1) // 2
    mo = m1 + m2
    out_shape = (2 * mo + 1,) + np.broadcast_shapes(c1.shape[1:], c2.shape[1:])
    out = np.zeros(out_shape, dtype=complex)
    for i in range(c1.shape[0]):
        for j in range(c2.shape[0]):
            out[i + j] = out[i + j] + c1[i] * c2[j]
    return out


def dense_product_modes_2d(c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    """Dense 2-angle convolution.  c*: (2L+1, 2M+1, ...) modes."""
    c1 = np.asarray(c1, dtype=complex)
    c2 = np.asarray(c2, dtype=complex)
    l1 = (c1.shape[0] - 1) // 2
    m1 = (c1.shape[1] - 1) // 2
    l2 = (c2.shape[0] - 1) // 2
    m2 = (c2.shape[1] - 1) // 2
    lo, mo = l1 + l2, m1 + m2
    out_shape = (2 * lo + 1, 2 * mo + 1) + np.broadcast_shapes(c1.shape[2:], c2.shape[2:])
    out = np.zeros(out_shape, dtype=complex)
    for i1 in range(c1.shape[0]):
        for j1 in range(c1.shape[1]):
            for i2 in range(c2.shape[0]):
                for j2 in range(c2.shape[1]):
                    out[i1 + i2, j1 + j2] = out[i1 + i2, j1 + j2] + c1[i1, j1] * c2[i2, j2]
    return out


def ks_quadratic_brute(u: np.ndarray) -> np.ndarray:
    """Quadratic term of the spectral flow from the conjugate-extended modes.

    u: (L,) complex, modes 1..L.  Extends to modes -L..L with u_0 = 0 and
    u_{-l} = conj(u_l), forms (1/2) * self-convolution by explicit double
    loop, and returns modes 1..L.
    """
    u = np.asarray(u, dtype=complex)
    L = u.shape[0]
    full = np.zeros(2 * L + 1, dtype=complex)     # index k+L holds mode k
    full[L + 1:] = u
    full[:L] = np.conj(u[::-1])
    out = np.zeros(L, dtype=complex)
    for ell in range(1, L + 1):
        acc = 0.0 + 0.0j
        for j in range(-L, L + 1):
            k = ell - j
            if -L <= k <= L:
                acc += full[j + L] * full[k + L]
        out[ell - 1] = 0.5 * acc
    return out


# ---------------------------------------------------------------------------
# finite differences

def fd_jacobian(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of f: R^n -> R^m at x."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x))
    J = np.zeros((f0.size, x.size))
    for j in range(x.size):
        xp = x.copy(); xp[j] += h
        xm = x.copy(); xm[j] -= h
        J[:, j] = (np.asarray(f(xp)) - np.asarray(f(xm))).ravel() / (2 * h)
    return J


def fd_derivative(f, t: float, h: float = 1e-6) -> np.ndarray:
    """Central difference of a vector-valued function of one variable."""
    return (np.asarray(f(t + h)) - np.asarray(f(t - h))) / (2 * h)


# ---------------------------------------------------------------------------
# adaptive time integration

def monodromy_matrix(A_of_theta, n: int, period: float = 2 * np.pi,
                     rtol: float = 1e-12, atol: float = 1e-12) -> np.ndarray:
    """Fundamental-solution matrix over one period of w' = A(theta) w."""
    def rhs(theta, y):
        return (np.asarray(A_of_theta(theta)) @ y.reshape(n, n)).ravel()
    sol = solve_ivp(rhs, (0.0, period), np.eye(n).ravel(),
                    method="RK45", rtol=rtol, atol=atol, dense_output=False)
    if not sol.success:
        raise RuntimeError("monodromy integration failed: " + sol.message)
    return sol.y[:, -1].reshape(n, n)


def integrate_flow(rhs, x0: np.ndarray, t_final: float,
                   rtol: float = 1e-12, atol: float = 1e-12) -> np.ndarray:
    """Integrate x' = rhs(t, x) (real vector field) to t_final."""
    sol = solve_ivp(rhs, (0.0, t_final), np.asarray(x0, dtype=float),
                    method="RK45", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError("flow integration failed: " + sol.message)
    return sol.y[:, -1]


def integrate_complex_flow(rhs_c, u0: np.ndarray, t_final: float,
                           rtol: float = 1e-12, atol: float = 1e-12) -> np.ndarray:
    """Integrate a complex vector field by splitting into real and imaginary parts."""
    u0 = np.asarray(u0, dtype=complex)
    L = u0.shape[0]
    def rhs(t, y):
        du = rhs_c(y[:L] + 1j * y[L:])
        return np.concatenate([du.real, du.imag])
    y0 = np.concatenate([u0.real, u0.imag])
    yT = integrate_flow(rhs, y0, t_final, rtol=rtol, atol=atol)
    return yT[:L] + 1j * yT[L:]
