"""Classical two-ion dynamics in the quartic + harmonic double well.

Lengths are in the Coulomb length l0, times in 1/omega0, mass 1, so the
Coulomb constant e^2/4 pi eps0 equals 1.

Coulomb coefficients come in two flavours, selected by ``coulomb``:

``"derived"`` (default), from expanding e^2 / 4 pi eps0 (X2 - X1) exactly:
    relative force      r'' ... + 2 / r^2
    breathing curvature w_-^2 = w_+^2 + 4 / r^3
    single-well equilibrium r^3 = 2, breathing frequency sqrt(3)

``"printed"``, the literal coefficients (force 1 / r^2, curvature 2 / r^3).
These are self-consistent with each other but correspond to half the
physical Coulomb strength; evaluated at the true equilibrium the printed
curvature gives sqrt(2) instead of sqrt(3).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import bisect, brentq
from scipy.integrate import quad

from .core_lr import TimeProfile, grid_points
from .errors import (CollisionError, ConditionError, NegativeQuarticError,
                     PhaseBracketError, SingularityError)
from .templates import ExpPowerBump, Template, omega_sq_from_b

COULOMB = {
    "derived": {"force": 2.0, "curvature": 4.0},
    "printed": {"force": 1.0, "curvature": 2.0},
}
COND_MAX = 1e8
SQRT2 = np.sqrt(2.0)


def _coeffs(coulomb: str) -> dict:
    try:
        return COULOMB[coulomb]
    except KeyError:
        raise ValueError(f"coulomb must be one of {sorted(COULOMB)}") from None


def coulomb_expand(r: float, order: int, kappa: float = 1.0) -> np.ndarray:
    """Taylor coefficients c_n of kappa / (r + sqrt2 q) in powers of q."""
    if r <= 0:
        raise ValueError("r must be positive")
    n = np.arange(order + 1)
    return kappa * (-SQRT2) ** n / r ** (n + 1)


def equilibrium_separation(B: float = 0.5, A: float = 0.0, coulomb: str = "derived") -> float:
    """Root of -A r^3 - 2 B r + force / r^2 = 0."""
    f = _coeffs(coulomb)["force"]
    g = lambda r: -A * r ** 3 - 2 * B * r + f / r ** 2
    hi = 1.0
    while g(hi) > 0:
        hi *= 2
    return brentq(g, 1e-6, hi, xtol=1e-15, rtol=1e-15)


def static_normal_modes(B: float = 0.5, A: float = 0.0, coulomb: str = "derived") -> tuple[float, float]:
    """(w_+, w_-) of two ions at the physical equilibrium of a static well.

    The equilibrium always comes from the exact Hamiltonian; ``coulomb``
    selects which breathing-curvature coefficient is applied there.
    """
    r = equilibrium_separation(B, A, "derived")
    w_plus_sq = 3 * A * r ** 2 + 2 * B
    curv = 2 * coulomb_expand(r, 2)[2] if coulomb == "derived" else _coeffs(coulomb)["curvature"] / r ** 3
    return float(np.sqrt(w_plus_sq)), float(np.sqrt(w_plus_sq + curv))


@dataclass(frozen=True)
class WellSchedule:
    A: TimeProfile
    B: TimeProfile

    def __post_init__(self):
        if np.any(self.A.samples < 0):
            raise NegativeQuarticError("quartic strength A(t) must be non-negative")

    @property
    def t_start(self):
        return self.A.t_start

    @property
    def t_end(self):
        return self.A.t_end

    @classmethod
    def static(cls, t_start, t_end, A=0.0, B=0.5):
        return cls(TimeProfile.constant(A, t_start, t_end, name="A"),
                   TimeProfile.constant(B, t_start, t_end, name="B"))


@dataclass(frozen=True)
class SeparationTrajectory:
    times: np.ndarray
    r: np.ndarray
    r_dot: np.ndarray
    omega_minus_sq: np.ndarray
    omega_plus_sq: np.ndarray

    def __post_init__(self):
        if np.any(self.r <= 0):
            raise CollisionError("ion separation must stay positive")

    @property
    def min_separation(self) -> float:
        return float(np.min(self.r))

    def to_csv(self, path, schedule: WellSchedule, meta: dict | None = None):
        with open(path, "w", newline="") as fh:
            for k, v in (meta or {}).items():
                fh.write(f"# {k}={v}\n")
            w = csv.writer(fh)
            w.writerow(["t_over_omega0", "A", "B", "r_over_l0", "omega_plus", "omega_minus"])
            for t, a, b, r, wp, wm in zip(self.times, schedule.A(self.times), schedule.B(self.times),
                                          self.r, self.omega_plus_sq, self.omega_minus_sq):
                w.writerow([f"{t:.10g}", f"{a:.10g}", f"{b:.10g}", f"{r:.10g}",
                            f"{np.sqrt(wp):.10g}", f"{np.sqrt(wm):.10g}"])


def mode_frequencies_sq(A, B, r, coulomb="derived"):
    wp = 3 * A * r ** 2 + 2 * B
    return wp, wp + _coeffs(coulomb)["curvature"] / r ** 3


def classical_r(schedule: WellSchedule, r0: float, rdot0: float, coulomb: str = "derived",
                times: np.ndarray | None = None, rtol: float = 1e-12) -> SeparationTrajectory:
    """Integrate r'' = -A r^3 - 2 B r + force / r^2 across the schedule."""
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    f = _coeffs(coulomb)["force"]
    A, B = schedule.A, schedule.B
    if times is None:
        times = A.times

    def rhs(t, y):
        r = y[0]
        return [y[1], -A(t) * r ** 3 - 2 * B(t) * r + f / r ** 2]

    def collide(t, y):
        return y[0] - 1e-6
    collide.terminal = True

    sol = solve_ivp(rhs, (times[0], times[-1]), [r0, rdot0], method="DOP853", t_eval=times,
                    rtol=rtol, atol=rtol, events=collide, max_step=0.05)
    if sol.status == 1:
        raise CollisionError(f"ions collided at t={sol.t_events[0][0]:.6g}")
    if sol.status != 0:
        raise SingularityError(sol.message)
    r, rd = sol.y
    wp, wm = mode_frequencies_sq(A(times), B(times), r, coulomb)
    return SeparationTrajectory(sol.t, r, rd, wm, wp)


def two_ion_classical(schedule: WellSchedule, x1, x2, p1, p2, times, rtol=1e-12):
    """Both ions' equations of motion from the full Hamiltonian (unit Coulomb constant).

    Returns an array of shape (4, len(times)) holding X1, X2, P1, P2.
    """
    A, B = schedule.A, schedule.B

    def rhs(t, y):
        X1, X2, P1, P2 = y
        d = X2 - X1
        fc = 1.0 / d ** 2
        return [P1, P2,
                -4 * A(t) * X1 ** 3 - 2 * B(t) * X1 - fc,
                -4 * A(t) * X2 ** 3 - 2 * B(t) * X2 + fc]

    sol = solve_ivp(rhs, (times[0], times[-1]), [x1, x2, p1, p2], method="DOP853",
                    t_eval=times, rtol=rtol, atol=rtol)
    if sol.status != 0:
        raise SingularityError(sol.message)
    return sol.y


def two_ion_energy(A, B, X1, X2, P1, P2):
    return 0.5 * (P1 ** 2 + P2 ** 2) + B * (X1 ** 2 + X2 ** 2) + A * (X1 ** 4 + X2 ** 4) + 1.0 / (X2 - X1)


# -- inverse design ---------------------------------------------------------

@dataclass
class DesignChain:
    """b(t) -> w_-^2 -> r -> r'' -> (A, B) with everything evaluated analytically."""

    template: Template
    coulomb: str = "derived"

    def __post_init__(self):
        c = _coeffs(self.coulomb)
        self.force, self.curv = c["force"], c["curvature"]

    def gap(self, t) -> np.ndarray:
        """D = w_-^2 - w_0^2 and its first two derivatives."""
        w = omega_sq_from_b(self.template.derivatives(np.atleast_1d(t), 4))
        w[0] = w[0] - 1.0
        return w

    def separation(self, t) -> np.ndarray:
        d, dd, ddd = self.gap(t)
        if np.any(d <= 0):
            raise SingularityError("breathing frequency fell to the centre-of-mass value; no finite separation")
        r = (self.curv / d) ** (1 / 3)
        rd = -r * dd / (3 * d)
        rdd = r * (4 / 9 * (dd / d) ** 2 - ddd / (3 * d))
        return np.array([r, rd, rdd])

    def potentials(self, t, with_cond=False):
        r, _, rdd = self.separation(t)
        # [[r^3, 2r], [3r^2, 2]] @ [A, B] = [force/r^2 - r'', 1]
        det = 2 * r ** 3 - 6 * r ** 3
        rhs1 = self.force / r ** 2 - rdd
        A = (2 * rhs1 - 2 * r) / det
        B = (r ** 3 - 3 * r ** 2 * rhs1) / det
        if with_cond:
            cond = np.array([np.linalg.cond(np.array([[ri ** 3, 2 * ri], [3 * ri ** 2, 2.0]])) for ri in r])
            return A, B, cond
        return A, B

    def excess_phase(self, t0, t1) -> float:
        val, _ = quad(lambda t: self.template(t) ** -2 - 1.0, t0, t1, limit=400,
                      epsabs=1e-14, epsrel=1e-13)
        return val

    def crossing(self, r_target: float, t_lo: float, t_hi: float) -> float:
        """Last time in [t_lo, t_hi] where r(t) rises through r_target."""
        level = self.curv / r_target ** 3
        ts = np.linspace(t_lo, t_hi, 4001)
        d = self.gap(ts)[0]
        above = np.nonzero(d >= level)[0]
        if above.size == 0 or above[-1] == ts.size - 1:
            raise SingularityError(f"separation never reaches {r_target:g} l0 in [{t_lo:g}, {t_hi:g}]")
        i = above[-1]
        return brentq(lambda t: self.gap(t)[0][0] - level, ts[i], ts[i + 1], xtol=1e-14)

    def build(self, t0: float, t1: float, n: int | None = None):
        n = n or grid_points(t1 - t0)
        times = np.linspace(t0, t1, n)
        A, B, cond = self.potentials(times, with_cond=True)
        if np.max(cond) > COND_MAX:
            raise ConditionError(f"(A, B) solve condition number {np.max(cond):.3g} exceeds {COND_MAX:g}")
        if np.any(A < -1e-12):
            raise NegativeQuarticError(f"designed A(t) negative (min {A.min():.3g})")
        fa = lambda t: self.potentials(t)[0]
        fb = lambda t: self.potentials(t)[1]
        sched = WellSchedule(TimeProfile(t0, t1, np.clip(A, 0, None), "A", fa),
                             TimeProfile(t0, t1, B, "B", fb))
        r, rd, _ = self.separation(times)
        wm = self.gap(times)[0] + 1.0
        traj = SeparationTrajectory(times, r, rd, wm, np.ones_like(times))
        return sched, traj, cond


@dataclass(frozen=True)
class BeamSplitterDesign:
    schedule: WellSchedule
    trajectory: SeparationTrajectory
    chain: DesignChain = field(repr=False)
    k: float
    sigma: float
    theta: float
    pickup: float
    t_pickup: float
    max_condition: float
    pickup_velocity: float
    pickup_velocity_integrated: float

    @property
    def duration(self) -> float:
        return 2 * self.t_pickup

    @property
    def min_separation(self) -> float:
        return float(self.chain.separation(np.array([0.0]))[0][0])

    def report(self) -> dict:
        return {"k": self.k, "theta": self.theta, "duration": self.duration,
                "min_separation_l0": self.min_separation, "pickup_l0": self.pickup,
                "ion_velocity_at_pickup": self.pickup_velocity,
                "ion_velocity_integrated": self.pickup_velocity_integrated,
                "max_condition": self.max_condition}


def _bs_phase(k, sigma, pickup, coulomb):
    chain = DesignChain(ExpPowerBump(-k, sigma, 2), coulomb)
    t_far = sigma * np.sqrt(max(np.log(k * 1e9), 1.0)) + 10 * sigma
    tp = chain.crossing(2 * pickup, 0.0, t_far)
    return chain.excess_phase(-tp, tp), chain, tp


def design_beam_splitter(theta_target: float, sigma: float, pickup: float = 50.0,
                         coulomb: str = "derived", n: int | None = None) -> BeamSplitterDesign:
    """Double-well schedule producing a breathing-mode phase shift theta.

    b(t) = 1 - k exp(-t^2/sigma^2); k is bisected so that
    theta = int_{-T'/2}^{T'/2} (1/b^2 - 1) dt, where +-T'/2 are the pick-up
    times at which the separation equals ``pickup``.
    """
    if pickup < 20:
        raise ValueError("pick-up distance must be >= 20 l0")
    if not 0 < theta_target <= np.pi:
        raise ValueError("theta must lie in (0, pi]")
    if sigma ** 2 <= 0.5:
        raise ValueError("sigma^2 must exceed 1/2 for a real separation at the turning point")

    def f(k):
        try:
            return _bs_phase(k, sigma, pickup, coulomb)[0] - theta_target
        except SingularityError:
            return -theta_target

    k_lo, k_hi = 1e-12, 0.9
    if f(k_hi) < 0:
        raise PhaseBracketError(f"no k < {k_hi} reaches theta = {theta_target:g}")
    if f(k_lo) > 0:
        raise PhaseBracketError("theta below the smallest realisable double-well phase")
    # the pick-up crossing must exist at the lower end for bisection to be meaningful
    while True:
        try:
            _bs_phase(k_lo, sigma, pickup, coulomb)
            break
        except SingularityError:
            k_lo *= 10
            if k_lo > k_hi:
                raise PhaseBracketError("double well never reaches the pick-up distance") from None
    k = bisect(f, k_lo, k_hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=300)
    theta, chain, tp = _bs_phase(k, sigma, pickup, coulomb)
    sched, traj, cond = chain.build(-tp, tp, n)
    v_pick = float(chain.separation(np.array([tp]))[1][0] / 2)
    # velocity from integrating the equation of motion out of the turning point
    r_min = chain.separation(np.array([0.0]))[0][0]
    half = WellSchedule(TimeProfile(0.0, tp, sched.A(np.linspace(0, tp, 3)), "A", sched.A.fn),
                        TimeProfile(0.0, tp, sched.B(np.linspace(0, tp, 3)), "B", sched.B.fn))
    fwd = classical_r(half, r_min, 0.0, coulomb, times=np.array([0.0, tp]))
    return BeamSplitterDesign(sched, traj, chain, k, sigma, theta, pickup, tp,
                              float(np.max(cond)), v_pick, float(fwd.r_dot[-1] / 2))


@dataclass(frozen=True)
class SeparationDesign:
    schedule: WellSchedule
    trajectory: SeparationTrajectory
    chain: DesignChain = field(repr=False)
    sigma: float
    target_distance: float
    duration: float
    pickup_velocity: float
    max_condition: float

    def report(self) -> dict:
        return {"sigma": self.sigma, "duration": self.duration,
                "target_distance_l0": self.target_distance,
                "ion_velocity_at_pickup": self.pickup_velocity,
                "max_condition": self.max_condition}


def separation_template(sigma: float) -> ExpPowerBump:
    """b(t) = (3^-1/4 - 1) exp(-t^3/sigma^3) + 1 for t > 0, 3^-1/4 before."""
    return ExpPowerBump(3 ** -0.25 - 1, sigma, power=3, one_sided=True)


def design_separation(sigma: float, target_distance: float | None = None,
                      coulomb: str = "derived", n: int | None = None) -> SeparationDesign:
    """Heatingless splitting of a two-ion crystal up to ``target_distance`` (l0).

    Defaults to 100 times the single-well separation.
    """
    if target_distance is None:
        target_distance = 100 * equilibrium_separation(coulomb=coulomb)
    if target_distance < 50:
        raise ValueError("target distance must be >= 50 l0")
    chain = DesignChain(separation_template(sigma), coulomb)
    t_end = chain.crossing(target_distance, 0.0, 40 * sigma)
    sched, traj, cond = chain.build(0.0, t_end, n)
    v = float(chain.separation(np.array([t_end]))[1][0] / 2)
    return SeparationDesign(sched, traj, chain, sigma, target_distance, t_end, v, float(np.max(cond)))


# -- transport --------------------------------------------------------------

@dataclass(frozen=True)
class TransportPlan:
    xi: TimeProfile
    x_bar: Callable = field(repr=False)
    x_start: float
    v_start: float
    x_end: float
    v_end: float

    def verify(self, rtol: float = 1e-12) -> tuple[float, float]:
        """Forward-integrate x'' = xi - x; return (position, velocity) end errors."""
        xi = self.xi
        sol = solve_ivp(lambda t, y: [y[1], xi(t) - y[0]], (xi.t_start, xi.t_end),
                        [self.x_start, self.v_start], method="DOP853", rtol=rtol, atol=rtol * 1e-2)
        return abs(sol.y[0, -1] - self.x_end), abs(sol.y[1, -1] - self.v_end)


def plan_transport(x_start: float, v_start: float, x_end: float, v_end: float,
                   duration: float, t_start: float = 0.0) -> TransportPlan:
    """Trap-centre path xi(t) = x(t) + x''(t) for the quintic x(t) meeting
    position and velocity at both ends with zero end accelerations."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    T = duration
    m = np.array([[1, 0, 0, 0, 0, 0],
                  [0, 1, 0, 0, 0, 0],
                  [0, 0, 2, 0, 0, 0],
                  [1, T, T ** 2, T ** 3, T ** 4, T ** 5],
                  [0, 1, 2 * T, 3 * T ** 2, 4 * T ** 3, 5 * T ** 4],
                  [0, 0, 2, 6 * T, 12 * T ** 2, 20 * T ** 3]], dtype=float)
    c = np.linalg.solve(m, [x_start, v_start, 0.0, x_end, v_end, 0.0])
    poly = np.polynomial.Polynomial(c)
    d2, d3 = poly.deriv(2), poly.deriv(3)
    fn = lambda t: poly(np.asarray(t) - t_start) + d2(np.asarray(t) - t_start)
    dfn = lambda t: poly.deriv(1)(np.asarray(t) - t_start) + d3(np.asarray(t) - t_start)
    xi = TimeProfile.from_function(fn, t_start, t_start + T, name="xi", dfn=dfn)
    return TransportPlan(xi, lambda t: poly(np.asarray(t) - t_start), x_start, v_start, x_end, v_end)
