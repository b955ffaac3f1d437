"""Inverse engineering of single-mode controls.

Displacement through the trap-centre path s(t), phase shift and squeezing
through the trap strength omega^2(t), and the quartic nonlinear phase gate.
All gate phases follow the interaction-picture convention a -> S^dag a S.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np
from scipy.integrate import quad
from scipy.optimize import bisect

from .core_lr import (BogoliubovCoeffs, TimeProfile, bogoliubov_at, grid_points,
                      integrate_auxiliary, lr_gate)
from .errors import (BoundaryError, DegenerateBasisError, NonPositiveOmegaSqError,
                     RootBracketError)
from .templates import ClosedGaussianDip, SqueezeBlend, Template, omega_sq_from_b

ALPHA_QUAD_TOL = 1e-8
RWA_WARN = 0.1


class GateKind(Enum):
    DISPLACEMENT = "displacement"
    PHASE = "phase"
    SQUEEZE = "squeeze"
    NONLINEAR_PHASE = "nonlinear_phase"


@dataclass(frozen=True)
class GateTarget:
    kind: GateKind
    value: Union[complex, float]
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("gate duration must be positive")
        if self.kind is GateKind.PHASE:
            object.__setattr__(self, "value", float(np.mod(self.value, 2 * np.pi)))


@dataclass(frozen=True)
class SynthesizedControl:
    """A control profile plus what it is predicted to do.

    ``profile`` is s(t) for displacements, omega^2(t) for phase/squeeze and
    the quartic strength F(t) for the nonlinear gate.
    """

    target: GateTarget
    profile: TimeProfile
    predicted: Union[BogoliubovCoeffs, complex, float]
    residual: float
    report: dict = field(default_factory=dict)

    def check_boundaries(self, tol: float = 1e-10) -> bool:
        ends = [self.profile(self.profile.t_start), self.profile(self.profile.t_end)]
        rest = 1.0 if self.target.kind in (GateKind.PHASE, GateKind.SQUEEZE) else 0.0
        return all(abs(e - rest) <= tol for e in ends)

    def to_csv(self, path, units: str = "dimensionless") -> None:
        """Write (t, value) rows with a header naming quantity and units."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_over_omega0", f"{self.profile.name} [{units}]"])
            for t, v in zip(self.profile.times, self.profile.samples):
                w.writerow([f"{t:.12g}", f"{v:.12g}"])


# -- displacement -----------------------------------------------------------

def _gauss_legendre_panels(f, t0, t1, panels, order=10):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(t0, t1, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    ts = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    return np.sum(0.5 * (b - a) * w[None, :] * f(ts))


def alpha_of_path(s: TimeProfile, check_boundary: bool = True) -> complex:
    """alpha[s] = -(1/sqrt2) int_0^T s'(t) e^{i t} dt (t measured from s.t_start)."""
    if check_boundary:
        for tt in (s.t_start, s.t_end):
            if abs(s(tt)) > 1e-12:
                raise BoundaryError(f"trap path s({tt:.6g}) = {s(tt):.3g} must vanish")
    t0 = s.t_start

    def integrand(t):
        return s.derivative(t) * np.exp(1j * (t - t0))

    panels = max(16, s.samples.size - 1)
    val = _gauss_legendre_panels(integrand, s.t_start, s.t_end, panels)
    return complex(-val / np.sqrt(2))


def sine_bump(lobes: int, duration: float, t_start: float = 0.0, odd: bool = False) -> TimeProfile:
    """sin^2(lobes pi t/T), or sin^2(pi t/T) cos(pi t/T) when ``odd``."""
    k = np.pi / duration

    if odd:
        def fn(t):
            x = k * (np.asarray(t) - t_start)
            return np.sin(x) ** 2 * np.cos(x)

        def dfn(t):
            x = k * (np.asarray(t) - t_start)
            return k * (2 * np.sin(x) * np.cos(x) ** 2 - np.sin(x) ** 3)
    else:
        def fn(t):
            return np.sin(lobes * k * (np.asarray(t) - t_start)) ** 2

        def dfn(t):
            return lobes * k * np.sin(2 * lobes * k * (np.asarray(t) - t_start))

    name = "s_odd" if odd else f"s_{lobes}"
    return TimeProfile.from_function(fn, t_start, t_start + duration, name=name, dfn=dfn)


def _combine(paths, gammas) -> TimeProfile:
    def fn(t):
        return sum(g * p(t) for g, p in zip(gammas, paths))

    def dfn(t):
        return sum(g * p.derivative(t) for g, p in zip(gammas, paths))

    p0 = paths[0]
    return TimeProfile.from_function(fn, p0.t_start, p0.t_end, p0.samples.size, "s", dfn)


def _solve_real_pair(a1: complex, a2: complex, target: complex, cond_max=1e8):
    m = np.array([[a1.real, a2.real], [a1.imag, a2.imag]])
    if abs(np.linalg.det(m)) < 1e-12 * max(abs(a1), abs(a2), 1e-300) ** 2 or np.linalg.cond(m) > cond_max:
        raise DegenerateBasisError("basis displacements are real multiples of each other")
    return np.linalg.solve(m, [target.real, target.imag])


def synthesize_displacement(alpha_target: complex, duration: float) -> SynthesizedControl:
    """Trap-centre path reaching ``alpha_target`` as a real mix of two bumps.

    Any path symmetric about T/2 yields alpha along i e^{i T/2}, so the pair
    is the one-lobe sin^2 bump and an odd bump sin^2 cos; their displacements
    are orthogonal unless one vanishes (omega0 T a multiple of 2 pi for the
    one-lobe bump).  A degenerate pair gets one retry with the null member
    replaced by the two-lobe bump.
    """
    target = GateTarget(GateKind.DISPLACEMENT, complex(alpha_target), duration)
    s1, s_odd, s2 = sine_bump(1, duration), sine_bump(1, duration, odd=True), sine_bump(2, duration)
    a1, a_odd = alpha_of_path(s1), alpha_of_path(s_odd)
    if alpha_target == 0:
        s = _combine([s1, s_odd], [0.0, 0.0])
        return SynthesizedControl(target, s, 0j, 0.0, {"gamma": [0.0, 0.0], "basis": [s1.name, s_odd.name]})
    pairs = [(s1, a1, s_odd, a_odd)]
    if abs(a1) < abs(a_odd):
        pairs.append((s2, alpha_of_path(s2), s_odd, a_odd))
    else:
        pairs.append((s1, a1, s2, alpha_of_path(s2)))
    rejected = []
    for pa, aa, pb, ab in pairs:
        try:
            g = _solve_real_pair(aa, ab, complex(alpha_target))
        except DegenerateBasisError:
            rejected.append([pa.name, pb.name])
            continue
        s = _combine([pa, pb], g)
        achieved = alpha_of_path(s)
        return SynthesizedControl(target, s, achieved, abs(achieved - alpha_target),
                                  {"gamma": [float(g[0]), float(g[1])],
                                   "basis": [pa.name, pb.name], "rejected": rejected})
    raise DegenerateBasisError(f"no usable template pair for T={duration:g}")


# -- phase shift ------------------------------------------------------------

def _profile_from_template(tpl: Template, t0: float, t1: float, name="omega_sq") -> TimeProfile:
    def fn(t):
        return omega_sq_from_b(tpl.derivatives(t, 2))[0]

    def dfn(t):
        return omega_sq_from_b(tpl.derivatives(t, 3))[1]

    return TimeProfile.from_function(fn, t0, t1, name=name, dfn=dfn)


def _lr_excess_phase(tpl: Template, t0: float, t1: float) -> float:
    """int (1/b^2 - 1) dt = -(Theta(T) + T)."""
    val, _ = quad(lambda t: tpl(t) ** -2 - 1.0, t0, t1, limit=400, epsabs=1e-14, epsrel=1e-13)
    return val


def phase_profile(phi_target: float, sigma: float, duration: float,
                  center: Optional[float] = None, verify: bool = True) -> SynthesizedControl:
    """omega^2(t) realising P(phi): a -> a e^{-i phi} through a Gaussian dip in b.

    k is bisected on (-0.9, 0.9) so that int (1/b^2 - 1) dt equals phi wrapped
    to (-pi, pi]; the dip is edge-corrected so omega^2 is exactly 1 at both ends.
    """
    target = GateTarget(GateKind.PHASE, phi_target, duration)
    if not sigma < duration / 6:
        raise ValueError("need sigma < T/6")
    c = duration / 2 if center is None else center
    want = float(np.angle(np.exp(1j * target.value)))
    if abs(want) < 1e-15:
        k = 0.0
    else:
        def f(kk):
            return _lr_excess_phase(ClosedGaussianDip(kk, sigma, duration, c), 0.0, duration) - want
        lo, hi = (0.0, 0.9) if want > 0 else (-0.9, 0.0)
        if f(lo) * f(hi) > 0:
            raise RootBracketError(f"no k in (-0.9, 0.9) gives phase {phi_target:g}")
        k = bisect(f, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200)
    tpl = ClosedGaussianDip(k, sigma, duration, c)
    profile = _profile_from_template(tpl, 0.0, duration)
    report = {"k": k, "sigma": sigma, "center": c}
    if not verify:
        return SynthesizedControl(target, profile, float(target.value), float("nan"), report)
    traj = integrate_auxiliary(profile)
    coeffs = bogoliubov_at(traj, duration)
    m = lr_gate(traj)
    achieved = float(np.mod(-np.angle(m[0, 0]), 2 * np.pi))
    err = abs(np.angle(np.exp(1j * (achieved - target.value))))
    report.update(zeta_abs=abs(coeffs.zeta), phase_error=err, achieved_phase=achieved)
    return SynthesizedControl(target, profile, coeffs, err, report)


# -- squeezing --------------------------------------------------------------

def squeeze_phase_corrections(u: complex, v: complex, g: complex) -> tuple[float, float]:
    """Phases (pre, post) of P(pre) then P(post) around a -> u a + v a^dag so the
    composite equals S(g): a -> cosh|g| a - e^{i arg g} sinh|g| a^dag.
    """
    chi = np.angle(g) if abs(g) > 0 else 0.0
    arg_v = np.angle(v) if abs(v) > 0 else np.pi + chi
    pre = 0.5 * (np.angle(u) - arg_v + np.pi + chi)
    post = 0.5 * (np.angle(u) + arg_v - np.pi - chi)
    return float(np.mod(pre, 2 * np.pi)), float(np.mod(post, 2 * np.pi))


def synthesize_squeeze(g_target: complex, duration: float, omega_sq_floor: float = 0.0,
                       allow_antitrapping: bool = False) -> SynthesizedControl:
    """omega^2(t) from the blended envelope template with delta = 2|g|.

    Returns the phase gates needed before and after to land on arg(g).
    """
    target = GateTarget(GateKind.SQUEEZE, complex(g_target), duration)
    if abs(g_target) > 2:
        raise ValueError("|g| > 2 is outside the supported squeeze range")
    if duration < 4 * np.pi - 1e-12:
        raise ValueError("squeeze duration must be at least 4 pi / omega0")
    delta = 2 * abs(g_target)
    tpl = SqueezeBlend(delta, duration)
    profile = _profile_from_template(tpl, 0.0, duration)
    w_min = float(np.min(profile(np.linspace(0, duration, 20 * profile.samples.size))))
    if w_min <= omega_sq_floor and not allow_antitrapping:
        raise NonPositiveOmegaSqError(
            f"omega^2 dips to {w_min:.4g} <= floor {omega_sq_floor:g}; lengthen T or allow anti-trapping")
    traj = integrate_auxiliary(profile)
    coeffs = bogoliubov_at(traj, duration)
    m = lr_gate(traj)
    u, v = m[0, 0], m[0, 1]
    pre, post = squeeze_phase_corrections(u, v, complex(g_target))
    g_abs = coeffs.squeeze_magnitude
    report = {"delta": delta, "g_achieved_abs": g_abs, "pre_phase": pre, "post_phase": post,
              "omega_sq_min": w_min, "bogoliubov": m}
    return SynthesizedControl(target, profile, coeffs, abs(g_abs - abs(g_target)), report)


# -- quartic nonlinear phase ------------------------------------------------

def nonlinear_phases(mu: float, n_levels: int) -> np.ndarray:
    """Diagonal of exp(-i mu (6 n(n-1) + 12 n))."""
    n = np.arange(n_levels)
    return np.exp(-1j * mu * (6 * n * (n - 1) + 12 * n))


def rwa_metric(mu: float, duration: float, n_max: int) -> float:
    return n_max ** 2 * mu / duration


def quartic_strength(mu: float, duration: float, t_start: float = 0.0) -> TimeProfile:
    """Raised-cosine F(t) with int F / 4 dt = mu (units hbar = m = omega0 = 1)."""
    f0 = 8 * mu / duration

    def fn(t):
        return 0.5 * f0 * (1 - np.cos(2 * np.pi * (np.asarray(t) - t_start) / duration))

    def dfn(t):
        return 0.5 * f0 * (2 * np.pi / duration) * np.sin(2 * np.pi * (np.asarray(t) - t_start) / duration)

    return TimeProfile.from_function(fn, t_start, t_start + duration, name="F", dfn=dfn)


def nonlinear_gate(mu_target: float, duration: float, n_max: int) -> SynthesizedControl:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    target = GateTarget(GateKind.NONLINEAR_PHASE, float(mu_target), duration)
    profile = quartic_strength(mu_target, duration)
    mu, _ = quad(lambda t: profile(t) / 4, 0, duration, limit=200)
    metric = rwa_metric(mu_target, duration, n_max)
    if metric > RWA_WARN:
        warnings.warn(f"RWA metric n_max^2 mu / (omega0 T) = {metric:.3g} exceeds {RWA_WARN}",
                      RuntimeWarning, stacklevel=2)
    return SynthesizedControl(target, profile, float(mu), abs(mu - mu_target),
                              {"rwa_metric": metric, "n_max": n_max})
