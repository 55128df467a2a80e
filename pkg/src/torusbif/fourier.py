"""Real trigonometric series algebra in one and two angles.

One-angle series are stored in the real cosine/sine form

    z(theta) = a_0 + sum_{m=1..M} a_m cos(m theta) + b_m sin(m theta),

two-angle series in the complex-exponential form

    z(theta, phi) = sum_{|l|<=L, |m|<=M} c_{l,m} exp(i(l theta + m phi))

with the conjugacy constraint c_{-l,-m} = conj(c_{l,m}) keeping z real.
Both are vector valued (trailing dimension ``dim``).  All products are
computed on equispaced grids large enough to be alias-free and transformed
back, so polynomial nonlinearities of series are exact to rounding.
"""

from __future__ import annotations

import json
import numpy as np

__all__ = [
    "Fourier1D",
    "Fourier2D",
    "ModePolynomialMap",
    "inner_product_1d",
    "inner_product_2d",
    "product_1d",
    "product_2d",
]


def _grid_size(min_points: int) -> int:
    """Smallest power of two >= min_points (FFT-friendly, never undersampled)."""
    n = 1
    while n < min_points:
        n *= 2
    return n


class Fourier1D:
    """Vector-valued real trigonometric polynomial of one angle.

    Parameters
    ----------
    a : (M+1, n) array
        Cosine coefficients; ``a[0]`` is the mean term.
    b : (M+1, n) array
        Sine coefficients; ``b[0]`` must be zero (kept for alignment).
    """

    __slots__ = ("a", "b")

    def __init__(self, a, b):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        if a.shape != b.shape:
            raise ValueError(f"coefficient shapes differ: {a.shape} vs {b.shape}")
        self.a = a.copy()
        self.b = b.copy()
        self.b[0] = 0.0
        self.a.flags.writeable = False
        self.b.flags.writeable = False

    # -- constructors ------------------------------------------------------

    @classmethod
    def zeros(cls, max_mode: int, dim: int) -> "Fourier1D":
        return cls(np.zeros((max_mode + 1, dim)), np.zeros((max_mode + 1, dim)))

    @classmethod
    def constant(cls, value) -> "Fourier1D":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        a = np.zeros((1, value.size))
        a[0] = value
        return cls(a, np.zeros_like(a))

    @classmethod
    def from_grid(cls, values: np.ndarray, max_mode: int | None = None) -> "Fourier1D":
        """Recover coefficients from samples on theta_j = 2 pi j / N.

        ``values`` has shape (N, n).  N must exceed twice the requested mode
        count; modes above ``max_mode`` are discarded (they must be resolved
        by the grid for the result to be the exact projection).
        """
        values = np.atleast_2d(np.asarray(values, dtype=float))
        N = values.shape[0]
        if max_mode is None:
            max_mode = (N - 1) // 2
        if N < 2 * max_mode + 1:
            raise ValueError(f"grid of {N} points cannot resolve mode {max_mode}")
        spec = np.fft.rfft(values, axis=0)
        a = np.zeros((max_mode + 1, values.shape[1]))
        b = np.zeros_like(a)
        a[0] = spec[0].real / N
        upto = min(max_mode, spec.shape[0] - 1)
        a[1:upto + 1] = 2.0 * spec[1:upto + 1].real / N
        b[1:upto + 1] = -2.0 * spec[1:upto + 1].imag / N
        return cls(a, b)

    @classmethod
    def from_complex_modes(cls, modes: np.ndarray) -> "Fourier1D":
        """Build from one-sided complex modes c_m, m = 0..M (c_{-m} implied conjugate)."""
        modes = np.atleast_2d(np.asarray(modes, dtype=complex))
        a = np.zeros(modes.shape)
        b = np.zeros(modes.shape)
        a[0] = modes[0].real
        a[1:] = 2.0 * modes[1:].real
        b[1:] = -2.0 * modes[1:].imag
        return cls(a, b)

    # -- basic queries -----------------------------------------------------

    @property
    def dim(self) -> int:
        return self.a.shape[1]

    @property
    def max_mode(self) -> int:
        return self.a.shape[0] - 1

    def complex_modes(self) -> np.ndarray:
        """One-sided complex modes c_m = (a_m - i b_m)/2 for m>=1, c_0 = a_0."""
        c = (self.a - 1j * self.b) / 2.0
        c[0] = self.a[0]
        return c

    def evaluate(self, theta) -> np.ndarray:
        """Value at angle(s) theta; returns (n,) or (len(theta), n)."""
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        m = np.arange(self.max_mode + 1)
        ang = np.outer(th, m)
        vals = np.cos(ang) @ self.a + np.sin(ang) @ self.b
        return vals[0] if np.isscalar(theta) else vals

    def grid_values(self, N: int) -> np.ndarray:
        """Samples on theta_j = 2 pi j / N via inverse FFT (N >= 2M+1)."""
        M = self.max_mode
        if N < 2 * M + 1:
            raise ValueError(f"{N} points undersample mode {M}")
        spec = np.zeros((N // 2 + 1, self.dim), dtype=complex)
        c = self.complex_modes()
        spec[0] = c[0] * N
        spec[1:M + 1] = c[1:] * N
        return np.fft.irfft(spec, n=N, axis=0)

    # -- algebra -----------------------------------------------------------

    def differentiate(self) -> "Fourier1D":
        m = np.arange(self.max_mode + 1)[:, None]
        return Fourier1D(m * self.b, -m * self.a)

    def truncate(self, new_max_mode: int) -> "Fourier1D":
        if new_max_mode >= self.max_mode:
            return self.pad(new_max_mode)
        return Fourier1D(self.a[:new_max_mode + 1], self.b[:new_max_mode + 1])

    def pad(self, new_max_mode: int) -> "Fourier1D":
        if new_max_mode < self.max_mode:
            raise ValueError("pad target below current mode count")
        a = np.zeros((new_max_mode + 1, self.dim))
        b = np.zeros_like(a)
        a[:self.max_mode + 1] = self.a
        b[:self.max_mode + 1] = self.b
        return Fourier1D(a, b)

    def component(self, idx) -> "Fourier1D":
        sel = np.atleast_1d(idx)
        return Fourier1D(self.a[:, sel], self.b[:, sel])

    def norm(self) -> float:
        """L2 norm over the circle, sqrt(<z, z>)."""
        return float(np.sqrt(inner_product_1d(self, self)))

    def tail_norm(self, keep: int) -> float:
        """Norm of everything above mode ``keep``."""
        if keep >= self.max_mode:
            return 0.0
        tail = Fourier1D(self.a[keep + 1:], self.b[keep + 1:])
        return float(np.sqrt(0.5 * (np.sum(tail.a ** 2) + np.sum(tail.b ** 2))))

    def __add__(self, other: "Fourier1D") -> "Fourier1D":
        M = max(self.max_mode, other.max_mode)
        s, o = self.pad(M), other.pad(M)
        return Fourier1D(s.a + o.a, s.b + o.b)

    def __sub__(self, other: "Fourier1D") -> "Fourier1D":
        M = max(self.max_mode, other.max_mode)
        s, o = self.pad(M), other.pad(M)
        return Fourier1D(s.a - o.a, s.b - o.b)

    def __mul__(self, scalar: float) -> "Fourier1D":
        return Fourier1D(self.a * scalar, self.b * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Fourier1D":
        return Fourier1D(-self.a, -self.b)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        """JSON layout: {"kind", "dim", "max_mode", "a", "b"}; ``a``/``b`` are
        row-major nested lists indexed [mode][component]."""
        return json.dumps({
            "kind": "fourier1d",
            "dim": self.dim,
            "max_mode": self.max_mode,
            "a": self.a.tolist(),
            "b": self.b.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "Fourier1D":
        doc = json.loads(text)
        if doc.get("kind") != "fourier1d":
            raise ValueError("not a one-angle series document")
        return cls(np.array(doc["a"]), np.array(doc["b"]))

    def __repr__(self) -> str:
        return f"Fourier1D(dim={self.dim}, max_mode={self.max_mode})"


def inner_product_1d(w1: Fourier1D, w2: Fourier1D) -> float:
    """(1/2pi) * integral of w1 . w2, exactly from coefficients."""
    if w1.dim != w2.dim:
        raise ValueError(f"dimension mismatch: {w1.dim} vs {w2.dim}")
    M = max(w1.max_mode, w2.max_mode)
    z1, z2 = w1.pad(M), w2.pad(M)
    s = np.sum(z1.a[0] * z2.a[0])
    s += 0.5 * (np.sum(z1.a[1:] * z2.a[1:]) + np.sum(z1.b[1:] * z2.b[1:]))
    return float(s)


def product_1d(z1: Fourier1D, z2: Fourier1D, max_mode: int | None = None) -> Fourier1D:
    """Alias-free pointwise product.

    If the dims match the product is componentwise; a 1-dimensional factor
    multiplies every component of the other (scalar * vector).  The exact
    result has max mode M1+M2; ``max_mode`` truncates afterwards.
    """
    full = z1.max_mode + z2.max_mode
    N = _grid_size(2 * full + 2)
    v1 = z1.grid_values(N)
    v2 = z2.grid_values(N)
    if z1.dim == z2.dim:
        vals = v1 * v2
    elif z1.dim == 1:
        vals = v1 * v2  # broadcasting over components
    elif z2.dim == 1:
        vals = v1 * v2
    else:
        raise ValueError(f"incompatible dims {z1.dim}, {z2.dim}")
    out = Fourier1D.from_grid(vals, full)
    if max_mode is not None:
        out = out.truncate(max_mode)
    return out


class Fourier2D:
    """Vector-valued real function of two angles in complex-mode storage.

    Coefficients sit in ``c`` with shape (2L+1, 2M+1, n); index ``[l+L, m+M]``
    holds c_{l,m}.  Construction enforces the conjugacy constraint by
    averaging with the reflected conjugate (exact no-op for valid input).
    """

    __slots__ = ("c",)

    def __init__(self, c, enforce_conjugacy: bool = True):
        c = np.asarray(c, dtype=complex)
        if c.ndim == 2:
            c = c[:, :, None]
        if c.ndim != 3 or c.shape[0] % 2 == 0 or c.shape[1] % 2 == 0:
            raise ValueError(f"bad coefficient shape {c.shape}")
        if enforce_conjugacy:
            c = 0.5 * (c + np.conj(c[::-1, ::-1]))
        self.c = c
        self.c.flags.writeable = False

    @classmethod
    def zeros(cls, L: int, M: int, dim: int) -> "Fourier2D":
        return cls(np.zeros((2 * L + 1, 2 * M + 1, dim), dtype=complex))

    @property
    def dim(self) -> int:
        return self.c.shape[2]

    @property
    def max_mode_theta(self) -> int:
        return (self.c.shape[0] - 1) // 2

    @property
    def max_mode_phi(self) -> int:
        return (self.c.shape[1] - 1) // 2

    def mode(self, l: int, m: int) -> np.ndarray:
        return self.c[l + self.max_mode_theta, m + self.max_mode_phi]

    def with_mode(self, l: int, m: int, value) -> "Fourier2D":
        """Copy with c_{l,m} (and its conjugate partner) replaced."""
        L, M = self.max_mode_theta, self.max_mode_phi
        c = self.c.copy()
        c[l + L, m + M] = value
        c[-l + L, -m + M] = np.conj(value)
        return Fourier2D(c, enforce_conjugacy=False)

    def conjugacy_defect(self) -> float:
        return float(np.max(np.abs(self.c - np.conj(self.c[::-1, ::-1]))))

    # -- grid transforms ---------------------------------------------------

    def grid_values(self, N1: int, N2: int) -> np.ndarray:
        """Real samples on the (N1, N2) tensor grid of (theta, phi)."""
        L, M = self.max_mode_theta, self.max_mode_phi
        if N1 < 2 * L + 1 or N2 < 2 * M + 1:
            raise ValueError("grid undersamples the stored modes")
        spec = np.zeros((N1, N2, self.dim), dtype=complex)
        ls = np.arange(-L, L + 1) % N1
        ms = np.arange(-M, M + 1) % N2
        spec[np.ix_(ls, ms)] = self.c
        vals = np.fft.ifft2(spec, axes=(0, 1)) * (N1 * N2)
        return np.ascontiguousarray(vals.real)

    @classmethod
    def from_grid(cls, values: np.ndarray, L: int, M: int) -> "Fourier2D":
        values = np.asarray(values, dtype=float)
        if values.ndim == 2:
            values = values[:, :, None]
        N1, N2 = values.shape[:2]
        if N1 < 2 * L + 1 or N2 < 2 * M + 1:
            raise ValueError("grid cannot resolve requested modes")
        spec = np.fft.fft2(values, axes=(0, 1)) / (N1 * N2)
        ls = np.arange(-L, L + 1) % N1
        ms = np.arange(-M, M + 1) % N2
        return cls(spec[np.ix_(ls, ms)])

    def evaluate(self, theta: float, phi: float) -> np.ndarray:
        L, M = self.max_mode_theta, self.max_mode_phi
        el = np.exp(1j * theta * np.arange(-L, L + 1))
        em = np.exp(1j * phi * np.arange(-M, M + 1))
        return np.real(np.einsum("l,m,lmn->n", el, em, self.c))

    # -- algebra -----------------------------------------------------------

    def differentiate(self, angle: str) -> "Fourier2D":
        L, M = self.max_mode_theta, self.max_mode_phi
        if angle == "theta":
            mult = 1j * np.arange(-L, L + 1)[:, None, None]
        elif angle == "phi":
            mult = 1j * np.arange(-M, M + 1)[None, :, None]
        else:
            raise ValueError("angle must be 'theta' or 'phi'")
        return Fourier2D(self.c * mult, enforce_conjugacy=False)

    def truncate(self, L: int | None = None, M: int | None = None) -> "Fourier2D":
        L0, M0 = self.max_mode_theta, self.max_mode_phi
        L = L0 if L is None else min(L, L0)
        M = M0 if M is None else min(M, M0)
        return Fourier2D(self.c[L0 - L:L0 + L + 1, M0 - M:M0 + M + 1],
                         enforce_conjugacy=False)

    def pad(self, L: int, M: int) -> "Fourier2D":
        L0, M0 = self.max_mode_theta, self.max_mode_phi
        if L < L0 or M < M0:
            raise ValueError("pad target below current mode counts")
        c = np.zeros((2 * L + 1, 2 * M + 1, self.dim), dtype=complex)
        c[L - L0:L + L0 + 1, M - M0:M + M0 + 1] = self.c
        return Fourier2D(c, enforce_conjugacy=False)

    def component(self, idx) -> "Fourier2D":
        sel = np.atleast_1d(idx)
        return Fourier2D(self.c[:, :, sel], enforce_conjugacy=False)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.c) ** 2)))

    def __add__(self, other: "Fourier2D") -> "Fourier2D":
        L = max(self.max_mode_theta, other.max_mode_theta)
        M = max(self.max_mode_phi, other.max_mode_phi)
        return Fourier2D(self.pad(L, M).c + other.pad(L, M).c, enforce_conjugacy=False)

    def __sub__(self, other: "Fourier2D") -> "Fourier2D":
        L = max(self.max_mode_theta, other.max_mode_theta)
        M = max(self.max_mode_phi, other.max_mode_phi)
        return Fourier2D(self.pad(L, M).c - other.pad(L, M).c, enforce_conjugacy=False)

    def __mul__(self, scalar: float) -> "Fourier2D":
        return Fourier2D(self.c * scalar, enforce_conjugacy=False)

    __rmul__ = __mul__

    def __neg__(self) -> "Fourier2D":
        return Fourier2D(-self.c, enforce_conjugacy=False)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        """JSON layout: {"kind", "dim", "L", "M", "re", "im"}; ``re``/``im``
        are nested lists indexed [l+L][m+M][component] (row-major)."""
        return json.dumps({
            "kind": "fourier2d",
            "dim": self.dim,
            "L": self.max_mode_theta,
            "M": self.max_mode_phi,
            "re": self.c.real.tolist(),
            "im": self.c.imag.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "Fourier2D":
        doc = json.loads(text)
        if doc.get("kind") != "fourier2d":
            raise ValueError("not a two-angle series document")
        c = np.array(doc["re"]) + 1j * np.array(doc["im"])
        return cls(c)

    def __repr__(self) -> str:
        return (f"Fourier2D(dim={self.dim}, L={self.max_mode_theta}, "
                f"M={self.max_mode_phi})")


def inner_product_2d(w1: Fourier2D, w2: Fourier2D) -> float:
    """(1/(2pi)^2) * double integral of w1 . w2 = sum c1_{l,m} conj(c2_{l,m})."""
    if w1.dim != w2.dim:
        raise ValueError(f"dimension mismatch: {w1.dim} vs {w2.dim}")
    L = max(w1.max_mode_theta, w2.max_mode_theta)
    M = max(w1.max_mode_phi, w2.max_mode_phi)
    val = np.sum(w1.pad(L, M).c * np.conj(w2.pad(L, M).c))
    return float(val.real)


def product_2d(z1: Fourier2D, z2: Fourier2D,
               L: int | None = None, M: int | None = None) -> Fourier2D:
    """Alias-free pointwise product of two-angle series (dims match, or one is scalar)."""
    Lf = z1.max_mode_theta + z2.max_mode_theta
    Mf = z1.max_mode_phi + z2.max_mode_phi
    N1 = _grid_size(2 * Lf + 2)
    N2 = _grid_size(2 * Mf + 2)
    v1 = z1.grid_values(N1, N2)
    v2 = z2.grid_values(N1, N2)
    if z1.dim != z2.dim and z1.dim != 1 and z2.dim != 1:
        raise ValueError(f"incompatible dims {z1.dim}, {z2.dim}")
    out = Fourier2D.from_grid(v1 * v2, Lf, Mf)
    return out.truncate(L, M)


class ModePolynomialMap:
    """Pairing of low trigonometric modes with homogeneous polynomials.

    Substituting y1 = cos(phi), y2 = sin(phi) into the polynomial on the
    right reproduces the mode on the left:

        cos 0*phi  <->  y1^2 + y2^2          (degree 2)
        cos 2*phi  <->  y1^2 - y2^2          (degree 2)
        sin 2*phi  <->  2 y1 y2              (degree 2)
        cos 1*phi  <->  y1 (y1^2 + y2^2)     (degree 3)
        sin 1*phi  <->  y2 (y1^2 + y2^2)     (degree 3)
        cos 3*phi  <->  y1 (y1^2 - 3 y2^2)   (degree 3)
        sin 3*phi  <->  y2 (3 y1^2 - y2^2)   (degree 3)

    This is the dictionary used to turn extracted mode coefficients into the
    polynomial change of variables and back.
    """

    TABLE = (
        (0, "cos", 2, lambda y1, y2: y1 * y1 + y2 * y2),
        (2, "cos", 2, lambda y1, y2: y1 * y1 - y2 * y2),
        (2, "sin", 2, lambda y1, y2: 2.0 * y1 * y2),
        (1, "cos", 3, lambda y1, y2: y1 * (y1 * y1 + y2 * y2)),
        (1, "sin", 3, lambda y1, y2: y2 * (y1 * y1 + y2 * y2)),
        (3, "cos", 3, lambda y1, y2: y1 * (y1 * y1 - 3.0 * y2 * y2)),
        (3, "sin", 3, lambda y1, y2: y2 * (3.0 * y1 * y1 - y2 * y2)),
    )

    @classmethod
    def polynomial(cls, m: int, kind: str):
        for mm, kk, _deg, poly in cls.TABLE:
            if mm == m and kk == kind:
                return poly
        raise KeyError(f"no entry for mode {m} ({kind})")

    @classmethod
    def degree(cls, m: int, kind: str) -> int:
        for mm, kk, deg, _poly in cls.TABLE:
            if mm == m and kk == kind:
                return deg
        raise KeyError(f"no entry for mode {m} ({kind})")

    @classmethod
    def trig(cls, m: int, kind: str, phi: np.ndarray) -> np.ndarray:
        return np.cos(m * phi) if kind == "cos" else np.sin(m * phi)
