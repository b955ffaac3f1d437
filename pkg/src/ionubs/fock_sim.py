"""Truncated Fock-space Schrödinger integration for single modes and for the
centre-of-mass (+) and breathing (-) modes of the two-ion beam splitter.

Units: hbar = m = omega0 = 1, quadratures q = (a + a^dag)/sqrt2 measured in
x0 = sqrt(hbar / m omega0).  Classical lengths (r) and the quartic strength A
come from :mod:`two_ion` in l0 units and are converted with eps = x0 / l0.

Polynomials in q and p are built in a padded space and cropped, so their
matrix elements are exact for every retained level instead of being
corrupted near the cutoff by products of truncated ladders.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .core_lr import PhysicalParams
from .errors import CutoffError, DomainError, StepError
from .synth import quartic_strength
from .two_ion import (COULOMB, DesignChain, design_beam_splitter, design_separation)

N_CUT_DEFAULT = 48
PAD = 16
TAIL_FRACTION = 0.25
TAIL_TOL = 1e-6
DT_START = 0.05
DT_BS = 0.1
SQRT2 = np.sqrt(2.0)


# -- operators and states --------------------------------------------------

@dataclass(frozen=True)
class Ladders:
    a: np.ndarray
    adag: np.ndarray
    q: np.ndarray
    p: np.ndarray
    n: np.ndarray

    @property
    def dim(self) -> int:
        return self.a.shape[0]


def build_ladders(n_cut: int) -> Ladders:
    """Truncated a, a^dag, q = (a + a^dag)/sqrt2, p = i(a^dag - a)/sqrt2 and n."""
    if n_cut < 4:
        raise ValueError("n_cut must be >= 4")
    a = np.diag(np.sqrt(np.arange(1, n_cut, dtype=float)), 1).astype(complex)
    adag = a.conj().T
    q = (a + adag) / SQRT2
    p = 1j * (adag - a) / SQRT2
    return Ladders(a, adag, q, p, np.diag(np.arange(n_cut, dtype=float)).astype(complex))


def quadrature_powers(n_cut: int, max_power: int = 4, pad: int = PAD) -> dict:
    """Exact truncations of q^k (k <= max_power) and p^2."""
    big = build_ladders(n_cut + max(pad, max_power))
    out, qk = {}, np.eye(big.dim, dtype=complex)
    for k in range(1, max_power + 1):
        qk = qk @ big.q
        out[f"q{k}"] = qk[:n_cut, :n_cut].real.copy()
    out["p2"] = (big.p @ big.p)[:n_cut, :n_cut].real.copy()
    return out


@dataclass(frozen=True)
class FockState:
    amplitudes: np.ndarray

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @classmethod
    def fock(cls, n: int, n_cut: int) -> "FockState":
        if not 0 <= n < n_cut:
            raise ValueError(f"level {n} outside cutoff {n_cut}")
        v = np.zeros(n_cut, dtype=complex)
        v[n] = 1.0
        return cls(v)

    @classmethod
    def coherent(cls, alpha: complex, n_cut: int, normalize: bool = True) -> "FockState":
        n = np.arange(n_cut)
        logfact = np.cumsum(np.log(np.maximum(n, 1)))
        mag = np.exp(-abs(alpha) ** 2 / 2 + n * np.log(abs(alpha) + 1e-300) - logfact / 2)
        v = mag * np.exp(1j * n * np.angle(alpha)) if alpha != 0 else (n == 0).astype(complex)
        v = v.astype(complex)
        return cls(v / np.linalg.norm(v) if normalize else v)

    @classmethod
    def ground(cls, hamiltonian: np.ndarray) -> "FockState":
        w, v = np.linalg.eigh(hamiltonian)
        g = v[:, 0].astype(complex)
        k = int(np.argmax(np.abs(g)))
        return cls(g * np.exp(-1j * np.angle(g[k])))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tail_mass(self, fraction: float = TAIL_FRACTION) -> float:
        k = int(np.ceil(self.dim * (1 - fraction)))
        return float(np.sum(np.abs(self.amplitudes[k:]) ** 2))

    def expect(self, op: np.ndarray) -> complex:
        psi = self.amplitudes
        return complex(psi.conj() @ op @ psi)

    def overlap(self, other: "FockState") -> complex:
        return complex(np.vdot(other.amplitudes, self.amplitudes))

    def padded(self, n_cut: int) -> "FockState":
        v = np.zeros(n_cut, dtype=complex)
        m = min(n_cut, self.dim)
        v[:m] = self.amplitudes[:m]
        return FockState(v)


# -- integrator -------------------------------------------------------------

def step_unitary(h: np.ndarray, dt: float) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def _check_tail(psi: np.ndarray, t: float):
    k = int(np.ceil(psi.size * (1 - TAIL_FRACTION)))
    tail = float(np.sum(np.abs(psi[k:]) ** 2))
    if tail > TAIL_TOL:
        raise CutoffError(f"tail mass {tail:.2e} in top {TAIL_FRACTION:.0%} of levels at t={t:.4g}; raise n_cut")


def converge(run: Callable[[int], tuple], n0: int, tol: float, max_halvings: int = 10,
             extrapolate: bool = False):
    """Halve the step until successive results differ by less than ``tol``.

    ``run(n)`` returns (payload, comparison vector).  Returns the finest
    payload, its step count, the last difference and the comparison vector.
    With ``extrapolate`` the comparison vectors of successive halvings are
    Richardson-combined for the second-order scheme, (4 v(h/2) - v(h)) / 3,
    and convergence is judged on the extrapolated values; the states in the
    payload are never extrapolated and stay exactly unitary.
    """
    _, prev_vec = run(n0)
    prev_est = None
    n = n0
    for _ in range(max_halvings):
        n *= 2
        payload, vec = run(n)
        est = (4 * vec - prev_vec) / 3 if extrapolate else vec
        ref = prev_est if extrapolate else prev_vec
        if ref is not None:
            diff = float(np.max(np.abs(est - ref)))
            if diff < tol:
                return payload, n, diff, est
        prev_vec, prev_est = vec, est
    raise StepError(f"no convergence to {tol:g} after {max_halvings} step halvings (last diff {diff:.2e})")


def evolve(state: FockState, hamiltonian: Callable[[float], np.ndarray], t0: float, t1: float,
           steps: int | None = None, tol: float = 1e-8, check_tail: bool = True,
           return_info: bool = False):
    """Second-order midpoint-exponential propagation of i d/dt psi = H(t) psi.

    With ``steps`` given the step count is fixed; otherwise it is doubled
    from a dt ~ 0.05 start until the final state changes by less than ``tol``.
    """
    if t1 < t0:
        raise ValueError("t1 must not precede t0")

    def run(n):
        dt = (t1 - t0) / n
        psi = state.amplitudes.copy()
        for j in range(n):
            tm = t0 + (j + 0.5) * dt
            psi = step_unitary(hamiltonian(tm), dt) @ psi
            if check_tail:
                _check_tail(psi, tm + dt / 2)
        return psi, psi

    if t1 == t0:
        psi, n, diff = state.amplitudes.copy(), 0, 0.0
    elif steps is not None:
        psi, _ = run(steps)
        n, diff = steps, float("nan")
    else:
        psi, n, diff, _ = converge(run, max(4, int(np.ceil((t1 - t0) / DT_START))), tol)
    out = FockState(psi)
    if return_info:
        return out, {"steps": n, "step_diff": diff, "norm_drift": abs(out.norm - state.norm)}
    return out


def harmonic_hamiltonian(omega_sq: Callable[[float], float], n_cut: int) -> Callable[[float], np.ndarray]:
    """H(t) = p^2/2 + omega^2(t) q^2 / 2."""
    ops = quadrature_powers(n_cut, 2)
    p2, q2 = ops["p2"] / 2, ops["q2"] / 2
    return lambda t: p2 + float(omega_sq(t)) * q2


# -- beam-splitter Hamiltonians ----------------------------------------------

@dataclass(frozen=True)
class ModeDrive:
    """Classical background seen by the phonon modes (l0 units)."""

    r: Callable
    A: Callable
    omega_minus_sq: Callable
    omega_plus_sq: Callable

    @classmethod
    def from_chain(cls, chain: DesignChain) -> "ModeDrive":
        def r(t):
            return float(chain.separation(np.array([t]))[0][0])

        def A(t):
            return float(chain.potentials(np.array([t]))[0][0])

        def wm(t):
            return float(chain.gap(np.array([t]))[0][0] + 1.0)

        return cls(r, A, wm, lambda t: 1.0)

    @classmethod
    def from_trajectory(cls, schedule, traj) -> "ModeDrive":
        rs = CubicSpline(traj.times, traj.r)
        wm = CubicSpline(traj.times, traj.omega_minus_sq)
        wp = CubicSpline(traj.times, traj.omega_plus_sq)
        return cls(lambda t: float(rs(t)), lambda t: float(schedule.A(t)),
                   lambda t: float(wm(t)), lambda t: float(wp(t)))


class BSHamiltonians:
    """Builders for H_-(t) and H_+(t) with mean-field cross-mode moments.

    H_- = p^2/2 + w_-^2 q^2/2 + sqrt2 A r eps (3<q+^2> q + q^3)
          + A eps^2 / 2 (6 <q+^2> q^2 + q^4) + C(q)
    H_+ = p^2/2 + w_+^2 q^2/2 + 3 sqrt2 A r eps <q-> q^2
          + A eps^2 / 2 (6 <q-^2> q^2 + q^4)
    C(q) = -2 sqrt2 kappa eps q^3 / (r^3 (r + sqrt2 eps q)) is the exact
    Coulomb remainder beyond second order, applied through the spectrum of q.
    Pure c-number terms are global phases and are left out of both.
    """

    def __init__(self, drive: ModeDrive, n_cut: int = N_CUT_DEFAULT, eps: float | None = None,
                 anharmonic: bool = True, coulomb: str = "derived"):
        self.drive = drive
        self.n_cut = n_cut
        self.eps = PhysicalParams().eps if eps is None else eps
        self.anharmonic = anharmonic
        self.kappa = COULOMB[coulomb]["force"] / 2
        ops = quadrature_powers(n_cut, 4)
        self.q1, self.q2, self.q3, self.q4, self.p2 = ops["q1"], ops["q2"], ops["q3"], ops["q4"], ops["p2"]
        big = build_ladders(n_cut + PAD)
        self._lam, self._vec = np.linalg.eigh(big.q.real)

    def coulomb_remainder(self, r: float) -> np.ndarray:
        x = SQRT2 * self.eps * self._lam
        if np.any(r + x <= r / 2):
            raise DomainError(f"q spectrum reaches r/2 at r={r:.4g}; cutoff too large for this separation")
        f = -2 * SQRT2 * self.kappa * self.eps * self._lam ** 3 / (r ** 3 * (r + x))
        return ((self._vec * f) @ self._vec.T)[:self.n_cut, :self.n_cut]

    def minus(self, t: float, q2_plus: float = 0.5) -> np.ndarray:
        d = self.drive
        h = 0.5 * self.p2 + 0.5 * d.omega_minus_sq(t) * self.q2
        if self.anharmonic:
            A, r, e = d.A(t), d.r(t), self.eps
            h = (h + SQRT2 * A * r * e * (3 * q2_plus * self.q1 + self.q3)
                 + 0.5 * A * e ** 2 * (6 * q2_plus * self.q2 + self.q4) + self.coulomb_remainder(r))
        return h

    def plus(self, t: float, q1_minus: float = 0.0, q2_minus: float = 0.5) -> np.ndarray:
        d = self.drive
        h = 0.5 * self.p2 + 0.5 * d.omega_plus_sq(t) * self.q2
        if self.anharmonic:
            A, r, e = d.A(t), d.r(t), self.eps
            h = (h + 3 * SQRT2 * A * r * e * q1_minus * self.q2
                 + 0.5 * A * e ** 2 * (6 * q2_minus * self.q2 + self.q4))
        return h


def bs_hamiltonians(schedule, traj, n_cut: int = N_CUT_DEFAULT, eps: float | None = None,
                    anharmonic: bool = True, coulomb: str = "derived") -> BSHamiltonians:
    return BSHamiltonians(ModeDrive.from_trajectory(schedule, traj), n_cut, eps, anharmonic, coulomb)


def _moments(psi, q1, q2):
    c = psi.conj()
    return float((c @ q1 @ psi).real), float((c @ q2 @ psi).real)


def evolve_pair(ham: BSHamiltonians, psi_plus: np.ndarray, psi_minus: np.ndarray, t0: float, t1: float,
                n: int, mean_field: bool = True, check_tail: bool = True):
    """March both modes with a predictor-corrector exchange of mean-field moments.

    Predictor: step with the other mode's moments at the start of the step.
    Corrector: redo the step with start/end averaged moments.
    """
    dt = (t1 - t0) / n
    q1, q2 = ham.q1, ham.q2
    frozen_p = _moments(psi_plus, q1, q2)
    frozen_m = _moments(psi_minus, q1, q2)
    mp, mm = frozen_p, frozen_m
    for j in range(n):
        tm = t0 + (j + 0.5) * dt
        if not mean_field:
            psi_plus = step_unitary(ham.plus(tm, *frozen_m), dt) @ psi_plus
            psi_minus = step_unitary(ham.minus(tm, frozen_p[1]), dt) @ psi_minus
        else:
            pp = step_unitary(ham.plus(tm, *mm), dt) @ psi_plus
            pm = step_unitary(ham.minus(tm, mp[1]), dt) @ psi_minus
            mp1, mm1 = _moments(pp, q1, q2), _moments(pm, q1, q2)
            mp_mid = tuple(0.5 * (x + y) for x, y in zip(mp, mp1))
            mm_mid = tuple(0.5 * (x + y) for x, y in zip(mm, mm1))
            psi_plus = step_unitary(ham.plus(tm, *mm_mid), dt) @ psi_plus
            psi_minus = step_unitary(ham.minus(tm, mp_mid[1]), dt) @ psi_minus
            mp, mm = _moments(psi_plus, q1, q2), _moments(psi_minus, q1, q2)
        if check_tail:
            _check_tail(psi_plus, tm)
            _check_tail(psi_minus, tm)
    return psi_plus, psi_minus


# -- experiments ---------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentResult:
    fidelity: float
    phase_error: float
    duration: float
    min_separation: float
    excitation_quanta: float
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not -1e-12 <= self.fidelity <= 1 + 1e-12:
            raise ValueError(f"fidelity {self.fidelity} outside [0, 1]")

    def csv_row(self, sigma_sq: float, n: int) -> list[str]:
        return [f"{sigma_sq:g}", str(n), f"{self.fidelity:.10f}", f"{self.phase_error:.6e}",
                f"{self.duration:.6f}", f"{self.min_separation:.6f}"]


CSV_HEADER = ["sigma_sq", "n", "fidelity", "phase_error", "duration_over_omega0", "min_sep_l0"]


def run_bs_experiment(sigma_sq: float, n_plus: int, n_minus: int, pickup: float = 50.0,
                      n_cut: int = N_CUT_DEFAULT, theta: float = np.pi / 2, anharmonic: bool = True,
                      mean_field: bool = True, coulomb: str = "derived", params: PhysicalParams | None = None,
                      tol: float = 1e-8) -> ExperimentResult:
    """Evolve |n+>|n-> through the double-well stage and compare with the ideal phase shift.

    The ideal breathing-mode output is e^{-i (n- + 1/2) theta} |n-> (in the
    frame rotating at omega0) and the centre-of-mass mode is left untouched.
    ``phase_error`` is the per-quantum error of the achieved theta in radians.
    """
    if max(n_plus, n_minus) * 4 > n_cut:
        raise ValueError("n_cut must be at least 4 * max(n+, n-)")
    params = params or PhysicalParams()
    design = design_beam_splitter(theta, np.sqrt(sigma_sq), pickup, coulomb)
    ham = BSHamiltonians(ModeDrive.from_chain(design.chain), n_cut, params.eps, anharmonic, coulomb)
    t0, t1 = -design.t_pickup, design.t_pickup
    T = t1 - t0
    start_p = FockState.fock(n_plus, n_cut).amplitudes
    start_m = FockState.fock(n_minus, n_cut).amplitudes
    ref = np.exp(1j * ((n_plus + 0.5) * T + (n_minus + 0.5) * (T + design.theta)))

    def run(n):
        pp, pm = evolve_pair(ham, start_p, start_m, t0, t1, n, mean_field)
        amp = pp[n_plus] * pm[n_minus] * ref
        return (pp, pm, amp), np.array([abs(amp) ** 2, np.angle(amp)])

    (pp, pm, amp), steps, diff, est = converge(run, int(np.ceil(T / DT_BS)), tol, extrapolate=True)
    fidelity = float(np.clip(est[0], 0.0, 1.0))
    phase_error = abs(float(est[1])) / (n_minus + 0.5)
    drift = max(abs(np.linalg.norm(pp) - 1), abs(np.linalg.norm(pm) - 1))
    return ExperimentResult(fidelity, phase_error, T, design.min_separation, 0.0,
                            {"theta": design.theta, "k": design.k, "steps": steps, "step_diff": diff,
                             "norm_drift": drift, "relative_phase_error": phase_error / design.theta,
                             "n_plus": n_plus, "n_minus": n_minus, "sigma_sq": sigma_sq})


def run_separation_experiment(sigma: float = 2.0, target_distance: float | None = None,
                              n_cut: int = 24, anharmonic: bool = True, mean_field: bool = True,
                              coulomb: str = "derived", frozen: bool = False,
                              params: PhysicalParams | None = None, tol: float = 1e-9) -> ExperimentResult:
    """Split a two-ion crystal starting from the ground states of both modes.

    Both modes start in the ground state of their full Hamiltonian at t = 0
    (the breathing mode sits in the sqrt(3) well dressed by the Coulomb
    remainder).  Excitation is the energy above the ground state of the
    final Hamiltonian in quanta of that mode's final frequency.  With
    ``frozen=True`` the well is held at its initial configuration for the
    same duration.
    """
    params = params or PhysicalParams()
    design = design_separation(sigma, target_distance, coulomb)
    drive = ModeDrive.from_chain(design.chain)
    if frozen:
        r0, w0 = drive.r(0.0), drive.omega_minus_sq(0.0)
        drive = ModeDrive(lambda t: r0, lambda t: 0.0, lambda t: w0, lambda t: 1.0)
    ham = BSHamiltonians(drive, n_cut, params.eps, anharmonic, coulomb)
    t0, t1 = 0.0, design.duration
    start_p = FockState.ground(ham.plus(t0)).amplitudes
    start_m = FockState.ground(ham.minus(t0)).amplitudes
    w_end = (np.sqrt(drive.omega_plus_sq(t1)), np.sqrt(drive.omega_minus_sq(t1)))

    def excitations(pp, pm):
        q1, q2 = ham.q1, ham.q2
        mp, mm = _moments(pp, q1, q2), _moments(pm, q1, q2)
        return np.array([_excitation(pp, ham.plus(t1, *mm), w_end[0]),
                         _excitation(pm, ham.minus(t1, mp[1]), w_end[1])])

    def run(n):
        pp, pm = evolve_pair(ham, start_p, start_m, t0, t1, n, mean_field)
        return (pp, pm), excitations(pp, pm)

    (pp, pm), steps, diff, est = converge(run, int(np.ceil((t1 - t0) / DT_BS)), tol, extrapolate=True)
    ex_p, ex_m = np.maximum(est, 0.0)
    return ExperimentResult(1.0, 0.0, t1 - t0, float(np.min(design.trajectory.r)), float(max(ex_p, ex_m)),
                            {"excitation_plus": float(ex_p), "excitation_minus": float(ex_m),
                             "steps": steps, "target_distance": design.target_distance,
                             "omega_minus_end": float(w_end[1])})


def _excitation(psi, hamiltonian, omega):
    """Energy above the ground state of ``hamiltonian`` in quanta of ``omega``."""
    e0 = np.linalg.eigvalsh(hamiltonian)[0]
    return float((psi.conj() @ hamiltonian @ psi).real - e0) / omega


def quartic_rwa_study(mu: float, duration: float, n_max: int, n_cut: int | None = None,
                      tol: float = 1e-9) -> float:
    """Worst infidelity between the full and rotating-wave quartic gate.

    The full evolution runs in the lab frame under H = a^dag a + F(t) q^4
    with every off-resonant term kept; the rotating-wave reference is the
    diagonal exp(-i int F dt / 4 (6 n^2 + 6 n + 3)).  Inputs are the Fock
    states |0>..|n_max> and their uniform superposition, so both populations
    and relative phases are tested.
    """
    n_cut = n_cut or max(4 * n_max, 8)
    if n_cut < 4 * n_max:
        raise ValueError("n_cut must be at least 4 * n_max")
    if mu == 0:
        return 0.0
    F = quartic_strength(mu, duration)
    ops = quadrature_powers(n_cut, 4, pad=8)
    num = np.diag(np.arange(n_cut, dtype=float))
    q4 = ops["q4"]
    levels = np.arange(n_cut)
    fint = 4 * mu
    rwa = np.exp(-1j * fint / 4 * (6 * levels ** 2 + 6 * levels + 3))
    frame = np.exp(1j * levels * duration)
    inputs = [FockState.fock(k, n_cut).amplitudes for k in range(n_max + 1)]
    sup = np.zeros(n_cut, dtype=complex)
    sup[:n_max + 1] = 1 / np.sqrt(n_max + 1)
    inputs.append(sup)
    basis = np.stack(inputs, axis=1)

    def run(n):
        dt = duration / n
        psi = basis.copy()
        for j in range(n):
            tm = (j + 0.5) * dt
            psi = step_unitary(num + float(F.fn(tm)) * q4, dt) @ psi
        return psi, psi.ravel()

    psi, _, _, _ = converge(run, max(8, int(np.ceil(duration / DT_START))), tol)
    out = frame[:, None] * psi
    ideal = rwa[:, None] * basis
    fid = np.abs(np.sum(ideal.conj() * out, axis=0)) ** 2
    return float(np.max(1 - fid))
