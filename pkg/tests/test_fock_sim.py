import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from ionubs.core_lr import integrate_auxiliary, lr_gate
from ionubs.errors import CutoffError, DomainError, StepError
from ionubs.fock_sim import (BSHamiltonians, ExperimentResult, FockState, ModeDrive, build_ladders,
                             converge, evolve, harmonic_hamiltonian, quadrature_powers,
                             quartic_rwa_study, run_bs_experiment, run_separation_experiment,
                             step_unitary)
from ionubs.synth import phase_profile, synthesize_squeeze
from ionubs.two_ion import coulomb_expand, design_beam_splitter


@pytest.fixture(scope="module")
def bs_hams():
    d = design_beam_splitter(np.pi / 2, np.sqrt(7))
    drive = ModeDrive.from_chain(d.chain)
    return d, BSHamiltonians(drive, 48), BSHamiltonians(drive, 48, anharmonic=False)


# -- operators ---------------------------------------------------------------------

def test_canonical_commutator_on_lower_block():
    lad = build_ladders(20)
    c = lad.q @ lad.p - lad.p @ lad.q
    assert np.allclose(c[:19, :19], 1j * np.eye(19), atol=1e-12)


def test_annihilation_of_vacuum_and_number_diagonal():
    lad = build_ladders(12)
    assert np.allclose(lad.a @ FockState.fock(0, 12).amplitudes, 0)
    assert np.allclose(np.diag(lad.adag @ lad.a).real, np.arange(12))


def test_padded_quadrature_powers_are_exact_up_to_cutoff():
    n = 10
    ops = quadrature_powers(n, 4)
    k = np.arange(n)
    # q^2 = (a^2 + a^dag^2 + 2n + 1)/2 and p^2 = (2n + 1 - a^2 - a^dag^2)/2
    assert np.allclose(np.diag(ops["q2"]), k + 0.5)
    assert np.allclose(np.diag(ops["p2"]), k + 0.5)
    assert np.allclose(np.diag(ops["q2"], 2), np.sqrt((k[:-2] + 1) * (k[:-2] + 2)) / 2)
    # <n|q^4|n> = (6 n^2 + 6 n + 3)/4 including the top retained level
    assert np.allclose(np.diag(ops["q4"]), (6 * k ** 2 + 6 * k + 3) / 4)


def test_coherent_overlap_oracle():
    a, b = 0.7 - 0.2j, -0.1 + 0.5j
    ov = FockState.coherent(a, 60).overlap(FockState.coherent(b, 60))
    assert abs(ov) ** 2 == pytest.approx(oracles.coherent_overlap_sq(a, b), abs=1e-12)


def test_ground_state_of_harmonic_hamiltonian_is_vacuum():
    ops = quadrature_powers(16, 2)
    g = FockState.ground(0.5 * (ops["p2"] + ops["q2"]))
    assert abs(g.amplitudes[0]) == pytest.approx(1.0)


@given(st.integers(0, 2 ** 31 - 1), st.floats(0.01, 3.0))
def test_step_unitary_is_unitary(seed, dt):
    h = oracles.random_hermitian(np.random.default_rng(seed), 8)
    u = step_unitary(h, dt)
    assert np.allclose(u.conj().T @ u, np.eye(8), atol=1e-12)


# -- single-mode propagation ---------------------------------------------------------

def test_number_hamiltonian_phase():
    n_cut, T = 8, 3.3
    h = np.diag(np.arange(n_cut)).astype(complex)
    out, info = evolve(FockState.fock(1, n_cut), lambda t: h, 0.0, T, return_info=True)
    assert out.amplitudes[1] == pytest.approx(np.exp(-1j * T), abs=1e-12)
    assert info["norm_drift"] < 1e-12


def test_cutoff_guard_raises():
    h = build_ladders(12).n
    with pytest.raises(CutoffError):
        evolve(FockState.coherent(3.0, 12), lambda t: h, 0.0, 1.0, steps=4)


def test_evolve_rejects_reversed_interval():
    with pytest.raises(ValueError):
        evolve(FockState.fock(0, 8), lambda t: np.eye(8), 1.0, 0.0)


def test_converge_raises_when_steps_never_settle():
    rng = np.random.default_rng(0)
    with pytest.raises(StepError):
        converge(lambda n: (None, rng.normal(size=3)), 4, 1e-12, max_halvings=3)


def richardson(observable, state, h, t0, t1, steps):
    """Second-order extrapolation of an observable from ``steps`` and 2 ``steps`` midpoint runs."""
    coarse = observable(evolve(state, h, t0, t1, steps=steps))
    fine = observable(evolve(state, h, t0, t1, steps=2 * steps))
    return (4 * fine - coarse) / 3, abs(fine - coarse)


def test_phase_gate_matches_lr_prediction():
    c = phase_profile(np.pi / 2, 1.0, 8.0)
    n_cut, alpha = 30, 0.8
    a = build_ladders(n_cut).a
    mean_a, spread = richardson(lambda s: s.expect(a), FockState.coherent(alpha, n_cut),
                                harmonic_hamiltonian(c.profile, n_cut), 0.0, 8.0, 800)
    assert spread < 1e-3
    u = lr_gate(integrate_auxiliary(c.profile))[0, 0]
    assert abs(np.angle(np.exp(1j * 8.0) * mean_a / (u * alpha))) < 1e-6


def test_squeezed_vacuum_variance():
    g, T, n_cut = 0.25, 4 * np.pi, 40
    c = synthesize_squeeze(g, T)
    ops = quadrature_powers(n_cut, 2)
    lad = build_ladders(n_cut)
    sym = 0.5 * (lad.q @ lad.p + lad.p @ lad.q)

    def moments(s):
        return np.array([s.expect(ops["q2"]).real, s.expect(sym).real, s.expect(ops["p2"]).real])

    (x2, xp, p2), _ = richardson(moments, FockState.fock(0, n_cut), harmonic_hamiltonian(c.profile, n_cut),
                                 0.0, T, 1000)
    cov = np.array([[x2, xp], [xp, p2]])
    assert np.linalg.eigvalsh(cov)[0] == pytest.approx(np.exp(-2 * g) / 2, abs=1e-4)


# -- beam-splitter Hamiltonians -----------------------------------------------------------

def test_quadratic_model_is_breathing_oscillator(bs_hams):
    _, _, off = bs_hams
    t = 1.3
    w = np.sqrt(off.drive.omega_minus_sq(t))
    levels = np.linalg.eigvalsh(off.minus(t))[:10]
    assert np.allclose(levels, w * (np.arange(10) + 0.5), atol=1e-10)
    assert np.allclose(np.linalg.eigvalsh(off.plus(t))[:10], np.arange(10) + 0.5, atol=1e-10)


def test_anharmonic_terms_are_order_eps_at_pickup(bs_hams):
    d, on, off = bs_hams
    ratios = []
    for t in (d.t_pickup, 0.8 * d.t_pickup, 0.6 * d.t_pickup):
        extra = (on.minus(t) - off.minus(t))[:9, :9]
        ratios.append(np.linalg.norm(extra, 2) / np.linalg.norm(off.minus(t)[:9, :9], 2) / on.eps)
    assert ratios[0] < 0.1
    assert ratios[0] < ratios[1] < ratios[2]


@pytest.mark.parametrize("r", [50.0, 100.0, 200.0])
def test_cubic_remainder_matches_taylor_coefficient(bs_hams, r):
    _, on, _ = bs_hams
    C = on.coulomb_remainder(r)[:9, :9]
    ref = coulomb_expand(r, 3, on.kappa)[3] * on.eps * on.q3[:9, :9]
    assert np.linalg.norm(C - ref, 2) / np.linalg.norm(ref, 2) < 0.05 / r


def test_domain_guard_on_coulomb_remainder():
    drive = ModeDrive(lambda t: 0.5, lambda t: 0.0, lambda t: 3.0, lambda t: 1.0)
    with pytest.raises(DomainError):
        BSHamiltonians(drive, 16, eps=1.0).coulomb_remainder(0.5)


# -- experiments --------------------------------------------------------------------------------

def test_result_rejects_fidelity_out_of_range():
    with pytest.raises(ValueError):
        ExperimentResult(1.5, 0.0, 1.0, 1.0, 0.0)


def test_harmonic_limit_is_exact_phase_shift():
    r = run_bs_experiment(7, 8, 8, anharmonic=False)
    assert 1 - r.fidelity < 1e-7
    # b departs from 1 by k exp(-t_p^2 / sigma^2) ~ 4e-7 at pick-up, which sets the phase residual
    assert r.extra["relative_phase_error"] < 1e-5
    assert r.extra["norm_drift"] < 1e-8


def test_vacuum_fidelity_at_weakest_setting():
    assert run_bs_experiment(2, 0, 0).fidelity >= 0.9999


def test_mean_field_back_reaction_is_small():
    a = run_bs_experiment(7, 4, 4, mean_field=True)
    b = run_bs_experiment(7, 4, 4, mean_field=False)
    assert abs(a.fidelity - b.fidelity) / a.fidelity < 1e-3


def test_bs_requires_cutoff_headroom():
    with pytest.raises(ValueError):
        run_bs_experiment(7, 8, 8, n_cut=16)


def test_frozen_separation_leaves_ground_state():
    assert run_separation_experiment(frozen=True).excitation_quanta < 1e-9


def test_quadratic_separation_is_shortcut_exact():
    assert run_separation_experiment(anharmonic=False).excitation_quanta < 1e-9


def test_separation_excitation_independent_of_cutoff():
    a = run_separation_experiment(n_cut=24).excitation_quanta
    b = run_separation_experiment(n_cut=48).excitation_quanta
    assert a <= 0.01 and abs(a - b) < 1e-8


def test_rwa_study_zero_strength():
    assert quartic_rwa_study(0.0, 50.0, 2) == 0.0


def test_rwa_study_paired_metrics():
    mu, n_max = np.pi / 12, 2
    slow = quartic_rwa_study(mu, n_max ** 2 * mu / 0.01, n_max)
    fast = quartic_rwa_study(mu, n_max ** 2 * mu / 0.3, n_max)
    assert slow < fast
