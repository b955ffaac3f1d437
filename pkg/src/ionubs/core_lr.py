"""Physical constants and Lewis-Riesenfeld machinery for one oscillator.

Internal units: hbar = m = omega0 = 1.  Times are in 1/omega0, lengths in the
ground-state length x0 = sqrt(hbar / m omega0) unless a function says
otherwise (two-ion classical dynamics uses the Coulomb length l0).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import constants as sc
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares

from .errors import BoundaryError, SingularityError, StepError

SAMPLES_PER_PERIOD = 200
ODE_TOL = 1e-10
BOUNDARY_TOL = 1e-10


@dataclass(frozen=True)
class PhysicalParams:
    """Ion species and storage-trap frequency, with the derived length scales."""

    ion_mass: float = 39.96259098 * sc.atomic_mass - sc.electron_mass
    omega0: float = 2 * np.pi * 1e6
    charge: float = sc.elementary_charge

    @classmethod
    def from_species(cls, mass_u: float, freq_hz: float) -> "PhysicalParams":
        return cls(ion_mass=mass_u * sc.atomic_mass - sc.electron_mass,
                   omega0=2 * np.pi * freq_hz)

    @property
    def coulomb_constant(self) -> float:
        """e^2 / (4 pi eps0) in J m."""
        return self.charge ** 2 / (4 * np.pi * sc.epsilon_0)

    @property
    def l0(self) -> float:
        """Coulomb length (e^2 / 4 pi eps0 m omega0^2)^(1/3) in metres."""
        return (self.coulomb_constant / (self.ion_mass * self.omega0 ** 2)) ** (1 / 3)

    @property
    def x0(self) -> float:
        """Ground-state length sqrt(hbar / m omega0) in metres."""
        return np.sqrt(sc.hbar / (self.ion_mass * self.omega0))

    @property
    def eps(self) -> float:
        return self.x0 / self.l0

    def seconds(self, t_dimless: float) -> float:
        return t_dimless / self.omega0


@dataclass(frozen=True)
class TimeProfile:
    """A real control function sampled on a uniform grid.

    Evaluation uses ``fn`` when an analytic generator is attached (profiles
    built from templates), otherwise a cubic spline through the samples.
    Outside [t_start, t_end] the boundary value is held.
    """

    t_start: float
    t_end: float
    samples: np.ndarray
    name: str = "value"
    fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    dfn: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 2:
            raise ValueError("a profile needs at least two samples")
        if not self.t_end > self.t_start:
            raise ValueError("profile times must be strictly increasing")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "_spline", CubicSpline(self.times, samples))

    @classmethod
    def from_function(cls, fn, t_start, t_end, n=None, name="value", dfn=None):
        if n is None:
            n = grid_points(t_end - t_start)
        t = np.linspace(t_start, t_end, n)
        return cls(t_start, t_end, np.asarray(fn(t), dtype=float), name, fn, dfn)

    @classmethod
    def constant(cls, value, t_start, t_end, n=None, name="value"):
        return cls.from_function(lambda t: np.full_like(np.asarray(t, float), value),
                                 t_start, t_end, n, name,
                                 dfn=lambda t: np.zeros_like(np.asarray(t, float)))

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.samples.size)

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def __call__(self, t):
        tc = np.clip(t, self.t_start, self.t_end)
        if self.fn is not None:
            out = np.asarray(self.fn(np.atleast_1d(tc)), dtype=float)
            return out if np.ndim(t) else float(out[0])
        out = self._spline(tc)
        return out if np.ndim(t) else float(out)

    def derivative(self, t):
        inside = (np.asarray(t) >= self.t_start) & (np.asarray(t) <= self.t_end)
        tc = np.clip(t, self.t_start, self.t_end)
        if self.dfn is not None:
            d = np.asarray(self.dfn(np.atleast_1d(tc)), dtype=float)
            d = d if np.ndim(t) else d[0]
        else:
            d = self._spline(tc, 1)
        return np.where(inside, d, 0.0) if np.ndim(t) else float(d if inside else 0.0)

    def scaled(self, factor: float, name: str | None = None) -> "TimeProfile":
        fn = None if self.fn is None else (lambda t, f=self.fn: factor * f(t))
        dfn = None if self.dfn is None else (lambda t, f=self.dfn: factor * f(t))
        return TimeProfile(self.t_start, self.t_end, factor * self.samples,
                           name or self.name, fn, dfn)


def grid_points(duration: float, per_period: int = SAMPLES_PER_PERIOD) -> int:
    return max(2, int(np.ceil(duration / (2 * np.pi) * per_period)) + 1)


@dataclass(frozen=True)
class BogoliubovCoeffs:
    eta: complex
    zeta: complex
    lr_phase: float

    @property
    def normalization(self) -> float:
        return abs(self.eta) ** 2 - abs(self.zeta) ** 2

    @property
    def squeeze_magnitude(self) -> float:
        """|g| = delta / 2 = asinh |zeta|."""
        return float(np.arcsinh(abs(self.zeta)))


@dataclass(frozen=True)
class AuxiliaryTrajectory:
    """Solution of b'' + w^2(t) b - 1/b^3 = 0 with the LR phase Theta(t)."""

    profile: TimeProfile
    b: np.ndarray
    b_dot: np.ndarray
    theta: np.ndarray
    dense: object = field(repr=False, compare=False, default=None)

    @property
    def times(self) -> np.ndarray:
        return self.profile.times

    @property
    def t_start(self) -> float:
        return self.profile.t_start

    @property
    def t_end(self) -> float:
        return self.profile.t_end

    def state(self, t: float) -> tuple[float, float, float]:
        if not self.t_start - 1e-12 <= t <= self.t_end + 1e-12:
            raise ValueError(f"t={t} outside trajectory grid")
        b, bd, th = self.dense(t)
        return float(b), float(bd), float(th)

    def defect(self) -> float:
        """Max |b - b_ref| on the grid against a 100x tighter re-integration.

        Serves as the residual certificate for the stored solution.
        """
        ref = integrate_auxiliary(self.profile, self.b[0], self.b_dot[0], rtol=ODE_TOL * 1e-2)
        return float(np.max(np.abs(ref.b - self.b)))


def _aux_rhs(omega_sq: TimeProfile):
    def rhs(t, y):
        b, bd, _ = y
        return [bd, b ** -3 - omega_sq(t) * b, -1.0 / b ** 2]
    return rhs


def integrate_auxiliary(omega_sq: TimeProfile, b0: float = 1.0, bdot0: float = 0.0,
                        b_min: float = 1e-6, rtol: float = ODE_TOL) -> AuxiliaryTrajectory:
    """Integrate the auxiliary equation and the LR phase over the profile grid.

    Theta is measured from the start of the profile.
    """
    if b0 <= 0:
        raise ValueError("b0 must be positive")
    if not np.all(np.isfinite(omega_sq.samples)):
        raise ValueError("omega^2 profile is not finite")

    def hit_floor(t, y):
        return y[0] - b_min
    hit_floor.terminal = True
    hit_floor.direction = -1

    t = omega_sq.times
    sol = solve_ivp(_aux_rhs(omega_sq), (t[0], t[-1]), [b0, bdot0, 0.0], method="DOP853",
                    t_eval=t, rtol=rtol, atol=rtol, dense_output=True, events=hit_floor,
                    max_step=np.pi / 8)
    if sol.status == 1:
        raise SingularityError(f"auxiliary function reached b <= {b_min} at t={sol.t_events[0][0]:.6g}")
    if sol.status != 0:
        raise StepError(sol.message)
    return AuxiliaryTrajectory(omega_sq, sol.y[0], sol.y[1], sol.y[2], sol.sol)


def eta_zeta(b, b_dot):
    eta = 0.5 * (1 / b + b - 1j * b_dot)
    zeta = 0.5 * (1 / b - b - 1j * b_dot)
    return eta, zeta


def bogoliubov_at(traj: AuxiliaryTrajectory, t: float) -> BogoliubovCoeffs:
    b, bd, theta = traj.state(t)
    eta, zeta = eta_zeta(b, bd)
    return BogoliubovCoeffs(complex(eta), complex(zeta), theta + (t - traj.t_start))


def _check_endpoints(omega_sq: TimeProfile):
    for tt in (omega_sq.t_start, omega_sq.t_end):
        if abs(omega_sq(tt) - 1.0) > BOUNDARY_TOL:
            raise BoundaryError(f"omega^2({tt:.6g}) = {omega_sq(tt):.12g} differs from storage value 1")


def lr_gate(traj: AuxiliaryTrajectory, check_boundary: bool = True) -> np.ndarray:
    """Interaction-picture Bogoliubov matrix M with (a, a^dag) -> M (a, a^dag).

    First row: a -> eta* e^{i phi_+} a - zeta e^{-i phi_-} a^dag with
    phi_+- = Theta(T) - Theta(0) +- omega0 T.
    """
    if check_boundary:
        _check_endpoints(traj.profile)
    c = bogoliubov_at(traj, traj.t_end)
    dur = traj.t_end - traj.t_start
    dtheta = traj.theta[-1] - traj.theta[0]
    u = np.conj(c.eta) * np.exp(1j * (dtheta + dur))
    v = -c.zeta * np.exp(-1j * (dtheta - dur))
    return np.array([[u, v], [np.conj(v), np.conj(u)]])


def fit_envelope(traj: AuxiliaryTrajectory, t_end: float, omega: float = 1.0) -> tuple[float, float]:
    """Least-squares fit of (delta, phi) in
    b^2 = (1/omega)(cosh delta + sinh delta sin(2 omega t + phi))
    over the period of b^2 ending at ``t_end`` (valid where omega is constant).
    """
    period = np.pi / omega
    ts = np.linspace(t_end - period, t_end, 64)
    b2 = np.array([traj.state(tt)[0] ** 2 for tt in ts])

    def resid(p):
        d, ph = p
        return (np.cosh(d) + np.sinh(d) * np.sin(2 * omega * ts + ph)) / omega - b2

    # linear start: b^2 omega = C + S1 sin + S2 cos
    design = np.column_stack([np.ones_like(ts), np.sin(2 * omega * ts), np.cos(2 * omega * ts)])
    c, s1, s2 = np.linalg.lstsq(design, omega * b2, rcond=None)[0]
    d0 = np.arccosh(max(c, 1.0))
    fit = least_squares(resid, [max(d0, 1e-8), np.arctan2(s2, s1)], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    d, ph = fit.x
    if d < 0:
        d, ph = -d, ph + np.pi
    return float(d), float(np.mod(ph, 2 * np.pi))


@dataclass(frozen=True)
class ClassicalTrajectory:
    times: np.ndarray
    x_c: np.ndarray
    p_c: np.ndarray


def classical_trajectory(omega_sq: TimeProfile, s: TimeProfile, x0: float = 0.0,
                         p0: float = 0.0, rtol: float = 1e-12) -> ClassicalTrajectory:
    """x' = p, p' = -w^2(t) (x - s(t)) on the profile grid (unit mass)."""
    t = omega_sq.times

    def rhs(tt, y):
        return [y[1], -omega_sq(tt) * (y[0] - s(tt))]

    sol = solve_ivp(rhs, (t[0], t[-1]), [x0, p0], method="DOP853", t_eval=t,
                    rtol=rtol, atol=rtol, max_step=np.pi / 8)
    if sol.status != 0:
        raise StepError(sol.message)
    return ClassicalTrajectory(t, sol.y[0], sol.y[1])


def beta_from_classical(ct: ClassicalTrajectory) -> complex:
    """beta(T) e^{-i T} = (x_c + i p_c)/sqrt(2) at the final time."""
    t_rel = ct.times[-1] - ct.times[0]
    return complex(np.exp(1j * t_rel) * (ct.x_c[-1] + 1j * ct.p_c[-1]) / np.sqrt(2))


def generalized_beta(traj: AuxiliaryTrajectory, s: TimeProfile, check_boundary: bool = True) -> complex:
    """Displacement beta(T) for a trap whose strength and centre both move.

    With f = b w^2 s and the final Bogoliubov pair (eta, zeta):

        beta = i/sqrt(2) [ eta* e^{i(Theta_T + T)} int f e^{-i Theta}
                          + zeta e^{-i(Theta_T - T)} int f e^{+i Theta} ]

    The zeta branch carries the conjugate phase factor; it drops out for a
    static-strength trap, where this reduces to the plain alpha functional.
    """
    from scipy.integrate import simpson

    if check_boundary:
        _check_endpoints(traj.profile)
    t0, t1 = traj.t_start, traj.t_end
    n = max(4001, 8 * traj.times.size + 1)
    ts = np.linspace(t0, t1, n)
    b, _, theta = traj.dense(ts)
    f = b * traj.profile(ts) * s(ts)

    def quad(y):
        return simpson(y.real, x=ts) + 1j * simpson(y.imag, x=ts)

    i_minus = quad(f * np.exp(-1j * theta))
    i_plus = quad(f * np.exp(1j * theta))
    c = bogoliubov_at(traj, t1)
    th_t, dur = theta[-1], t1 - t0
    val = (np.conj(c.eta) * np.exp(1j * (th_t + dur)) * i_minus
           + c.zeta * np.exp(-1j * (th_t - dur)) * i_plus)
    return complex(1j / np.sqrt(2) * val)
