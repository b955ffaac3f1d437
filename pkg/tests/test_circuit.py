import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from ionubs.circuit import (BeamSplit, CoherentProjector, Displace, FockProjector, GaussianState, Measure,
                            MultiModeState, NonlinearPhase, Phase, Squeeze, Threshold, apply_fock,
                            apply_gaussian, bogoliubov, commutator_error, commutator_slope,
                            concatenate_commutator, cross_validate, parse_circuit, run_circuit,
                            symplectic_form, symplectic_matrix)
from ionubs.errors import ConfigError, DimensionError, UnsupportedOpError
from ionubs.fock_sim import FockState, build_ladders


def gate_matrix(op, m):
    U, V, _ = bogoliubov(op, m)
    return symplectic_matrix(U, V)


def random_linear_op(rng, m):
    kind = rng.integers(4)
    k = int(rng.integers(m))
    if kind == 0:
        return Displace(k, complex(*rng.uniform(-0.5, 0.5, 2)))
    if kind == 1:
        return Phase(k, rng.uniform(-np.pi, np.pi))
    if kind == 2:
        return Squeeze(k, 0.25 * rng.uniform() * np.exp(1j * rng.uniform(-np.pi, np.pi)))
    i, j = rng.choice(m, 2, replace=False)
    return BeamSplit(int(i), int(j), rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi))


# -- Gaussian backend -----------------------------------------------------------------

def test_beam_splitter_zero_angle_is_identity():
    assert np.allclose(gate_matrix(BeamSplit(0, 1, 0.0, 0.7), 2), np.eye(4), atol=1e-15)


def test_fifty_fifty_beam_splitter_mode_map():
    U, V, _ = bogoliubov(BeamSplit(0, 1, np.pi / 2), 2)
    assert np.allclose(U[0], np.array([1, 1j]) / np.sqrt(2), atol=1e-15)
    assert np.allclose(V, 0)


def test_squeeze_and_inverse_is_identity():
    s = gate_matrix(Squeeze(0, -0.6), 1) @ gate_matrix(Squeeze(0, 0.6), 1)
    assert np.allclose(s, np.eye(2), atol=1e-10)


def test_displacement_shifts_mean_by_root_two_alpha():
    st_ = apply_gaussian(GaussianState.vacuum(1), Displace(0, 0.3 - 0.4j))
    assert np.allclose(st_.mean, np.sqrt(2) * np.array([0.3, -0.4]))


@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 3))
def test_symplectic_closure_of_linear_gates(seed, m):
    rng = np.random.default_rng(seed)
    omega = symplectic_form(m)
    for _ in range(5):
        S = gate_matrix(random_linear_op(rng, m) if m > 1 else Squeeze(0, complex(*rng.uniform(-1, 1, 2))), m)
        assert np.max(np.abs(S @ omega @ S.T - omega)) < 1e-10


@settings(max_examples=20)
@given(st.integers(0, 2 ** 31 - 1))
def test_gaussian_states_stay_physical(seed):
    rng = np.random.default_rng(seed)
    state = GaussianState.vacuum(3)
    for _ in range(10):
        state = apply_gaussian(state, random_linear_op(rng, 3))
    state.check()


def test_nonlinear_ops_rejected_by_gaussian_backend():
    with pytest.raises(UnsupportedOpError):
        apply_gaussian(GaussianState.vacuum(1), NonlinearPhase(0, 0.1))
    with pytest.raises(UnsupportedOpError):
        run_circuit([Measure(0, Threshold(0))], 1, backend="gaussian")


def test_invalid_ops_rejected():
    with pytest.raises(ValueError):
        BeamSplit(1, 1, 0.3)
    with pytest.raises(ValueError):
        apply_gaussian(GaussianState.vacuum(1), Phase(2, 0.1))


# -- Fock backend --------------------------------------------------------------------

def test_nonlinear_phase_flips_single_phonon():
    out = apply_fock(MultiModeState.product([FockState.fock(1, 8)]), NonlinearPhase(0, np.pi / 12))
    assert out.tensor[1] == pytest.approx(-1)


def test_nonlinear_phase_is_diagonal_and_unit_modulus():
    n = 12
    state = MultiModeState.product([FockState(np.ones(n) / np.sqrt(n))])
    out = apply_fock(state, NonlinearPhase(0, 0.37))
    assert np.allclose(np.abs(out.tensor), 1 / np.sqrt(n))
    k = np.arange(n)
    assert np.allclose(out.tensor * np.sqrt(n), np.exp(-1j * 0.37 * (6 * k * (k - 1) + 12 * k)))


def test_threshold_zero_on_vacuum_is_certain():
    out = apply_fock(MultiModeState.vacuum(1, 8), Measure(0, Threshold(0)))
    assert out.p_positive == pytest.approx(1.0) and out.negative is None


@pytest.mark.parametrize("pvm", [Threshold(0), Threshold(3), FockProjector(2), CoherentProjector(0.7 - 0.3j)])
def test_pvm_completeness_and_idempotence(pvm):
    assert pvm.check(24) < 1e-10


def test_fock_projector_outside_cutoff():
    with pytest.raises(DimensionError):
        FockProjector(30).projectors(24)


@given(st.integers(0, 2 ** 31 - 1), st.integers(0, 5))
def test_branch_probabilities_sum_to_one(seed, m):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10))
    state = MultiModeState(amps / np.linalg.norm(amps))
    for pvm in (Threshold(m), FockProjector(m), CoherentProjector(0.5 + 0.2j)):
        out = apply_fock(state, Measure(1, pvm))
        assert out.p_positive + out.p_negative == pytest.approx(1.0, abs=1e-10)


def test_coherent_projector_against_overlap_oracle():
    alpha, beta, n = 0.8 + 0.3j, 0.5 - 0.1j, 24
    on_self = apply_fock(MultiModeState.product([FockState.coherent(alpha, n)]), Measure(0, CoherentProjector(alpha)))
    assert on_self.p_positive >= 1 - 1e-6
    other = apply_fock(MultiModeState.product([FockState.coherent(beta, n)]), Measure(0, CoherentProjector(alpha)))
    assert other.p_positive == pytest.approx(oracles.coherent_overlap_sq(alpha, beta), abs=1e-8)


def test_fock_budget_enforced():
    with pytest.raises(DimensionError):
        run_circuit([NonlinearPhase(0, 0.1)], 4, n_cut=8)
    with pytest.raises(DimensionError):
        run_circuit([NonlinearPhase(0, 0.1)], 1, n_cut=32)


def test_backend_auto_selection_and_post_selection():
    ops = [Displace(0, 0.5), BeamSplit(0, 1, np.pi / 2), Measure(1, Threshold(0))]
    res = run_circuit(ops, 2, n_cut=16)
    assert res.backend == "fock"
    # |0.5> through a 50:50 splitter leaves |0.5 i / sqrt 2> in mode 1
    assert res.success_probability == pytest.approx(np.exp(-0.125), abs=1e-10)
    assert run_circuit(ops[:2], 2).backend == "gaussian"


def test_post_selection_on_impossible_outcome():
    res = run_circuit([Measure(0, FockProjector(1))], 1, n_cut=8)
    assert res.success_probability == 0.0 and res.state is None


# -- cross-validation -------------------------------------------------------------------

def test_empty_circuit_agrees_exactly():
    cv = cross_validate([], [0.3 + 0.1j, -0.2j])
    assert cv.max_error < 1e-12


def test_displace_squeeze_split_chain():
    ops = [Displace(0, 0.4 + 0.2j), Squeeze(0, 0.2), BeamSplit(0, 1, np.pi / 2, 0.3)]
    assert cross_validate(ops, [0, 0]).max_error < 1e-6


@pytest.mark.parametrize("seed", range(3))
def test_random_ten_op_three_mode_circuit(seed):
    rng = np.random.default_rng(seed)
    ops = [random_linear_op(rng, 3) for _ in range(10)]
    cv = cross_validate(ops, [0.2, -0.1j, 0], n_cut=16)
    assert cv.max_error < 1e-6
    assert cv.fock_norm == pytest.approx(1.0, abs=1e-6)


def test_cross_validation_rejects_nonlinear():
    with pytest.raises(UnsupportedOpError):
        cross_validate([NonlinearPhase(0, 0.1)], [0])


# -- commutator concatenation --------------------------------------------------------------

def test_commuting_pair_gives_identity():
    Y, Z = np.diag([0.3, -1.0, 2.0]), np.diag([1.5, 0.2, -0.7])
    assert np.allclose(concatenate_commutator(Y, Z, 0.1, reps=5), np.eye(3), atol=1e-12)


def test_canonical_pair_gives_global_phase():
    lad = build_ladders(80)
    dt = 0.05
    out = concatenate_commutator(lad.q, lad.p, dt) @ FockState.fock(0, 80).amplitudes
    # [iq dt, ip dt] = -i dt^2 is central, so the loop multiplies low states by exp(-i dt^2)
    assert out[0] == pytest.approx(np.exp(-1j * dt ** 2), abs=1e-12)
    assert np.linalg.norm(out[1:]) < 1e-12


def test_remainder_is_third_order():
    rng = np.random.default_rng(7)
    Y, Z = oracles.random_hermitian(rng, 6), oracles.random_hermitian(rng, 6)
    assert commutator_slope(Y, Z) == pytest.approx(3.0, abs=0.2)
    assert commutator_error(Y, Z, 1e-3) < commutator_error(Y, Z, 1e-2)


def test_non_hermitian_generators_rejected():
    with pytest.raises(ValueError):
        concatenate_commutator(np.array([[0, 1], [0, 0]]), np.eye(2), 0.1)


# -- circuit description files ------------------------------------------------------------

def test_parse_full_grammar():
    text = """
    # two-mode interferometer
    MODES 3
    D 0 alpha=0.5+0.1i
    S 1 g=0.2
    P 0 phi=0.3
    BS 0 1 theta=1.5708 phi=0
    NL 1 mu=0.2618
    M 0 threshold m=0
    M 1 fock m=2
    M 0 coherent alpha=0.3
    """
    n, ops = parse_circuit(text)
    assert n == 3 and len(ops) == 8
    assert ops[0] == Displace(0, 0.5 + 0.1j)
    assert ops[3] == BeamSplit(0, 1, 1.5708, 0.0)
    assert ops[5].pvm == Threshold(0) and ops[6].pvm == FockProjector(2)
    assert ops[7].pvm == CoherentProjector(0.3)


def test_mode_count_inferred():
    assert parse_circuit("BS 0 2 theta=1")[0] == 3


@pytest.mark.parametrize("text", ["X 0", "D 0 beta=1", "BS 0 theta=1", "M 0 m=1", "MODES 1\nBS 0 1 theta=1",
                                  "M 0 sideways m=1", "P zero phi=1"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_circuit(text)
