"""Auxiliary-function templates b(t) with closed-form time derivatives.

Every template exposes ``derivatives(t, order)`` returning an array of shape
``(order + 1, len(t))`` holding b, b', b'', ... evaluated analytically.  The
inverse maps b -> omega^2 and b -> d(omega^2)/dt need up to the fourth
derivative, and finite differences of sampled b amplify noise far beyond the
tolerances used downstream.
"""
from __future__ import annotations

from math import comb

import numpy as np
from numpy.polynomial import Polynomial

MAX_ORDER = 4


def _leibniz(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Derivatives of a product from the derivatives of its factors."""
    out = np.zeros_like(f)
    for n in range(f.shape[0]):
        for j in range(n + 1):
            out[n] += comb(n, j) * f[j] * g[n - j]
    return out


def _sqrt_derivs(g: np.ndarray) -> np.ndarray:
    """Derivatives of sqrt(g) up to fourth order (g must be positive)."""
    order = g.shape[0] - 1
    f = np.zeros_like(g)
    f[0] = np.sqrt(g[0])
    if order >= 1:
        f[1] = g[1] / (2 * f[0])
    if order >= 2:
        f[2] = (g[2] - 2 * f[1] ** 2) / (2 * f[0])
    if order >= 3:
        f[3] = (g[3] - 6 * f[1] * f[2]) / (2 * f[0])
    if order >= 4:
        f[4] = (g[4] - 8 * f[1] * f[3] - 6 * f[2] ** 2) / (2 * f[0])
    return f


class Template:
    """Base class; subclasses implement :meth:`derivatives`."""

    def derivatives(self, t, order: int = 2) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        val = self.derivatives(t_arr, 0)[0]
        return val if np.ndim(t) else float(val[0])


class Constant(Template):
    def __init__(self, value: float = 1.0):
        self.value = float(value)

    def derivatives(self, t, order=2):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((order + 1, t.size))
        out[0] = self.value
        return out


class ExpPowerBump(Template):
    """offset + amplitude * exp(-((t - center)/sigma)**power).

    With ``one_sided=True`` the bump is frozen at its peak value for
    t < center, which is how the separation template is defined.
    """

    def __init__(self, amplitude: float, sigma: float, power: int = 2,
                 center: float = 0.0, offset: float = 1.0, one_sided: bool = False):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.amplitude = float(amplitude)
        self.sigma = float(sigma)
        self.power = int(power)
        self.center = float(center)
        self.offset = float(offset)
        self.one_sided = one_sided
        # d^n/dx^n exp(-x^p) = Q_n(x) exp(-x^p)
        q = [Polynomial([1.0])]
        dp = Polynomial.basis(self.power - 1) * self.power
        for _ in range(MAX_ORDER):
            q.append(q[-1].deriv() - dp * q[-1])
        self._q = q

    def derivatives(self, t, order=2):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = (t - self.center) / self.sigma
        frozen = self.one_sided & (x < 0)
        xe = np.where(frozen, 0.0, x)
        e = np.exp(-xe ** self.power)
        out = np.empty((order + 1, t.size))
        for n in range(order + 1):
            dn = self._q[n](xe) * e / self.sigma ** n
            if n > 0:
                dn = np.where(frozen, 0.0, dn)
            out[n] = self.amplitude * dn
        out[0] += self.offset
        return out


class ClosedGaussianDip(Template):
    """1 - k * [G(t) - c(t)] with G a Gaussian centred inside [0, T].

    c(t) is the quintic matching G, G', G'' at both ends, so the dip and its
    first two derivatives vanish exactly at t = 0 and t = T and the induced
    trap frequency returns exactly to the storage value.
    """

    def __init__(self, k: float, sigma: float, duration: float, center: float | None = None):
        self.k = float(k)
        self.sigma = float(sigma)
        self.duration = float(duration)
        self.center = duration / 2 if center is None else float(center)
        self._gauss = ExpPowerBump(1.0, self.sigma, 2, self.center, offset=0.0)
        ends = self._gauss.derivatives(np.array([0.0, self.duration]), 2)
        rows, rhs = [], []
        for j, tj in enumerate((0.0, self.duration)):
            for n in range(3):
                basis = [Polynomial.basis(p).deriv(n)(tj) if p >= n else 0.0 for p in range(6)]
                rows.append(basis)
                rhs.append(ends[n, j])
        self._corr = Polynomial(np.linalg.solve(np.array(rows), np.array(rhs)))

    def dip(self, t, order=2):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        g = self._gauss.derivatives(t, order)
        inside = (t >= 0) & (t <= self.duration)
        for n in range(order + 1):
            g[n] = np.where(inside, g[n] - self._corr.deriv(n)(t), 0.0)
        return g

    def derivatives(self, t, order=2):
        out = -self.k * self.dip(t, order)
        out[0] += 1.0
        return out


def smoothstep5(t, duration: float, order: int = 2) -> np.ndarray:
    """h(t) = 10 tau^3 - 15 tau^4 + 6 tau^5, clamped to [0, 1] outside."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    tau = np.clip(t / duration, 0.0, 1.0)
    inside = (t > 0) & (t < duration)
    poly = Polynomial([0, 0, 0, 10, -15, 6])
    out = np.empty((order + 1, t.size))
    for n in range(order + 1):
        dn = poly.deriv(n)(tau) / duration ** n
        out[n] = dn if n == 0 else np.where(inside, dn, 0.0)
    return out


class SqueezeBlend(Template):
    """h(t) sqrt(cosh d + sinh d sin(2 w t)) + 1 - h(t) (w = storage frequency)."""

    def __init__(self, delta: float, duration: float, omega: float = 1.0):
        self.delta = float(delta)
        self.duration = float(duration)
        self.omega = float(omega)

    def envelope(self, t, order=2) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        c, s, w2 = np.cosh(self.delta), np.sinh(self.delta), 2 * self.omega
        g = np.empty((order + 1, t.size))
        g[0] = c + s * np.sin(w2 * t)
        for n in range(1, order + 1):
            g[n] = s * w2 ** n * np.sin(w2 * t + n * np.pi / 2)
        return _sqrt_derivs(g) / np.sqrt(self.omega)

    def derivatives(self, t, order=2):
        f = self.envelope(t, order)
        h = smoothstep5(t, self.duration, order)
        f_minus_1 = f.copy()
        f_minus_1[0] -= 1.0
        out = _leibniz(f_minus_1, h)
        out[0] += 1.0
        return out


def omega_sq_from_b(b: np.ndarray) -> np.ndarray:
    """Inverse auxiliary map: omega^2 = (1/b^3 - b'') / b, and its first two
    time derivatives when b is supplied up to fourth order.

    ``b`` has shape (n_derivs, n_times) with n_derivs in {3, 4, 5}.
    """
    b0, b1, b2 = b[0], b[1], b[2]
    w = [b0 ** -4 - b2 / b0]
    if b.shape[0] >= 4:
        b3 = b[3]
        w.append(-4 * b1 / b0 ** 5 - b3 / b0 + b2 * b1 / b0 ** 2)
    if b.shape[0] >= 5:
        b4 = b[4]
        w.append(-4 * b2 / b0 ** 5 + 20 * b1 ** 2 / b0 ** 6 - b4 / b0
                 + 2 * b3 * b1 / b0 ** 2 + b2 ** 2 / b0 ** 2 - 2 * b2 * b1 ** 2 / b0 ** 3)
    return np.array(w)
