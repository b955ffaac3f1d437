"""Invariant suite run by ``ionubs selfcheck``.

Every check returns a :class:`Check`; ``expected_fail`` marks results that
are known to fail by construction (the printed Coulomb coefficients) and do
not count against the exit status.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .circuit import (BeamSplit, CoherentProjector, FockProjector, Phase, Squeeze, Threshold,
                      bogoliubov, symplectic_form, symplectic_matrix)
from .core_lr import PhysicalParams, TimeProfile, eta_zeta, integrate_auxiliary
from .fock_sim import (FockState, evolve, harmonic_hamiltonian, run_bs_experiment,
                       run_separation_experiment)
from .two_ion import design_beam_splitter, static_normal_modes

L0_REFERENCE = 4.45e-6


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str
    expected_fail: bool = False

    def line(self) -> str:
        tag = "XFAIL" if self.expected_fail and not self.passed else ("PASS" if self.passed else "FAIL")
        return f"[{tag}] {self.name}: {self.detail}"


def _smooth_profile(seed: int, duration: float = 12.0) -> TimeProfile:
    """omega^2 = 1 + sum of sin^2-windowed harmonics; returns to 1 with zero slope."""
    rng = np.random.default_rng(seed)
    amps = rng.uniform(-0.25, 0.25, 3)
    freqs = rng.uniform(0.3, 1.5, 3)

    def fn(t):
        t = np.asarray(t, dtype=float)
        w = np.sin(np.pi * np.clip(t, 0, duration) / duration) ** 4
        return 1 + w * np.sum([a * np.sin(f * t) for a, f in zip(amps, freqs)], axis=0)

    return TimeProfile.from_function(fn, 0.0, duration, name="omega_sq")


def check_l0(params: PhysicalParams) -> Check:
    rel = abs(params.l0 - L0_REFERENCE) / L0_REFERENCE
    return Check("l0 constant", rel < 0.01, f"l0 = {params.l0 * 1e6:.4f} um (rel. dev. {rel:.2e})")


def check_normal_modes(coulomb: str) -> Check:
    wp, wm = static_normal_modes(coulomb=coulomb)
    ok = abs(wp - 1) < 1e-6 and abs(wm - np.sqrt(3)) / np.sqrt(3) < 1e-6
    detail = f"(w+, w-) = ({wp:.8f}, {wm:.8f}), expected (1, {np.sqrt(3):.8f})"
    if coulomb == "printed" and not ok:
        detail += f"; printed curvature gives {wm:.6f} = sqrt2 at the physical equilibrium"
    return Check("normal modes sqrt3", ok, detail, expected_fail=(coulomb == "printed"))


def check_lr_normalization(seeds=range(3)) -> Check:
    worst = 0.0
    for s in seeds:
        traj = integrate_auxiliary(_smooth_profile(s))
        eta, zeta = eta_zeta(traj.b, traj.b_dot)
        worst = max(worst, float(np.max(np.abs(np.abs(eta) ** 2 - np.abs(zeta) ** 2 - 1))))
    return Check("LR normalization", worst < 1e-9, f"max ||eta|^2 - |zeta|^2 - 1| = {worst:.2e}")


def check_symplectic(seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    om = symplectic_form(3)
    worst = 0.0
    for _ in range(20):
        i, j = rng.choice(3, 2, replace=False)
        for op in (Squeeze(int(i), complex(*rng.normal(0, 0.5, 2))), Phase(int(i), rng.uniform(0, 6)),
                   BeamSplit(int(i), int(j), rng.uniform(0, 3), rng.uniform(0, 6))):
            U, V, _ = bogoliubov(op, 3)
            S = symplectic_matrix(U, V)
            worst = max(worst, float(np.max(np.abs(S @ om @ S.T - om))))
    return Check("symplectic closure", worst < 1e-10, f"max |S Om S^T - Om| = {worst:.2e}")


def check_pvm(n_cut: int = 24) -> Check:
    worst = 0.0
    for pvm in (Threshold(0), Threshold(3), FockProjector(2), CoherentProjector(0.7 - 0.4j)):
        worst = max(worst, pvm.check(n_cut))
    return Check("PVM completeness/idempotence", worst < 1e-10, f"max violation {worst:.2e}")


def check_unitarity(n_cut: int = 24) -> Check:
    prof = _smooth_profile(7)
    h = harmonic_hamiltonian(prof, n_cut)
    start = FockState.coherent(0.8, n_cut)
    out, info = evolve(start, h, prof.t_start, prof.t_end, return_info=True)
    return Check("unitarity", info["norm_drift"] < 1e-8, f"norm drift {info['norm_drift']:.2e}")


def check_constant_omega_plus() -> Check:
    d = design_beam_splitter(np.pi / 2, np.sqrt(7))
    t = d.trajectory.times
    A, B = d.chain.potentials(t)
    err = float(np.max(np.abs(3 * A * d.trajectory.r ** 2 + 2 * B - 1)))
    return Check("constant omega+", err < 1e-9, f"max |3 A r^2 + 2 B - 1| = {err:.2e}")


def check_cutoff_doubling() -> Check:
    a = run_bs_experiment(7, 2, 2, n_cut=16)
    b = run_bs_experiment(7, 2, 2, n_cut=32)
    diff = abs(a.fidelity - b.fidelity)
    return Check("cutoff doubling", diff < 1e-5, f"|F(16) - F(32)| = {diff:.2e}")


def check_deterministic_csv() -> Check:
    from .cli import render_csv

    def once():
        r = run_separation_experiment()
        buf = io.StringIO()
        render_csv(buf, [("check", "determinism")], ["duration", "excitation"],
                   [[f"{r.duration:.12g}", f"{r.excitation_quanta:.12g}"]])
        return buf.getvalue().encode()

    same = once() == once()
    return Check("deterministic CSV bytes", same, "identical" if same else "bytes differ")


def run_all(coulomb: str = "derived", params: PhysicalParams | None = None) -> list[Check]:
    params = params or PhysicalParams()
    return [check_l0(params), check_normal_modes(coulomb), check_lr_normalization(), check_symplectic(),
            check_pvm(), check_unitarity(), check_constant_omega_plus(), check_cutoff_doubling(),
            check_deterministic_csv()]
