import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from ionubs.core_lr import (PhysicalParams, TimeProfile, beta_from_classical, bogoliubov_at,
                            classical_trajectory, eta_zeta, fit_envelope, generalized_beta,
                            integrate_auxiliary, lr_gate)
from ionubs.errors import BoundaryError, SingularityError


def random_profile(seed, duration=12.0):
    fn = oracles.smooth_omega_sq(np.random.default_rng(seed), duration)
    return TimeProfile.from_function(fn, 0.0, duration, name="omega_sq")


def random_path(seed, duration=12.0):
    rng = np.random.default_rng(seed + 1000)
    h, c, f = rng.uniform(-1, 1), rng.uniform(-0.5, 0.5), rng.uniform(0.3, 1.5)

    def fn(t):
        t = np.asarray(t, dtype=float)
        return h * np.sin(np.pi * t / duration) ** 2 * (1 + c * np.sin(f * t))

    return TimeProfile.from_function(fn, 0.0, duration, name="s")


# -- physical constants ------------------------------------------------------

def test_l0_for_calcium_at_one_megahertz():
    p = PhysicalParams()
    assert p.l0 == pytest.approx(4.45e-6, rel=0.01)
    assert p.eps == pytest.approx(p.x0 / p.l0)


def test_seconds_conversion():
    assert PhysicalParams().seconds(2 * np.pi) == pytest.approx(1e-6)


def test_from_species_matches_default():
    a, b = PhysicalParams.from_species(39.96259098, 1e6), PhysicalParams()
    assert a.l0 == pytest.approx(b.l0, rel=1e-6)


# -- time profiles ------------------------------------------------------------

def test_profile_holds_boundary_value_outside_grid():
    p = TimeProfile.from_function(lambda t: 1 + np.asarray(t), 0.0, 2.0)
    assert p(-5.0) == pytest.approx(1.0)
    assert p(7.0) == pytest.approx(3.0)
    assert p.derivative(7.0) == 0.0


def test_profile_rejects_reversed_times():
    with pytest.raises(ValueError):
        TimeProfile(1.0, 0.0, np.ones(3))


def test_scaled_profile():
    p = TimeProfile.constant(2.0, 0.0, 1.0).scaled(3.0)
    assert p(0.5) == pytest.approx(6.0)


# -- auxiliary equation --------------------------------------------------------

def test_static_fixed_point_over_100_periods():
    T = 200 * np.pi
    traj = integrate_auxiliary(TimeProfile.constant(1.0, 0.0, T))
    assert np.max(np.abs(traj.b - 1)) <= 1e-9
    assert np.max(np.abs(traj.theta + traj.times)) <= 1e-9


def test_compressed_well_fixed_point():
    b0 = 3 ** -0.25
    traj = integrate_auxiliary(TimeProfile.constant(3.0, 0.0, 20.0), b0=b0)
    assert np.max(np.abs(traj.b - b0)) <= 1e-9


def _jump_then_release():
    """omega^2 doubles until b reaches its minimum, then returns to 1."""
    t_min = np.pi / (2 * np.sqrt(2))
    first = integrate_auxiliary(TimeProfile.constant(2.0, 0.0, t_min))
    b, bd, _ = first.state(t_min)
    return first, integrate_auxiliary(TimeProfile.constant(1.0, 0.0, 8 * np.pi), b0=b, bdot0=bd)


def test_sudden_jump_extrema():
    first, _ = _jump_then_release()
    assert np.max(first.b) == pytest.approx(1.0, abs=1e-9)
    assert first.b[-1] == pytest.approx(1 / np.sqrt(2), abs=1e-9)
    assert abs(first.b_dot[-1]) < 1e-9


def test_frequency_doubling_turning_point():
    """Energy integral b'^2/2 + 1/(2b^2) + w^2 b^2/2 fixes the turning point b = 1/2 at w = 2."""
    traj = integrate_auxiliary(TimeProfile.constant(4.0, 0.0, np.pi / 2))
    assert np.min(traj.b) == pytest.approx(0.5, abs=1e-6)


def test_jump_squeeze_magnitude():
    _, second = _jump_then_release()
    c = bogoliubov_at(second, second.t_end)
    assert abs(c.zeta) == pytest.approx(np.sinh(np.log(2) / 2), abs=1e-9)
    assert abs(c.zeta) == pytest.approx(1 / (2 * np.sqrt(2)), abs=1e-9)


def test_envelope_constant_once_omega_is_constant():
    _, second = _jump_then_release()
    fits = np.array([fit_envelope(second, t) for t in (2 * np.pi, 4 * np.pi, 6 * np.pi, 8 * np.pi)])
    assert fits[0, 0] == pytest.approx(np.log(2), abs=1e-7)
    assert np.ptp(fits[:, 0]) < 1e-7
    assert np.ptp(np.unwrap(fits[:, 1])) < 1e-7


def test_eta_zeta_identity_and_direct_substitution():
    assert eta_zeta(1.0, 0.0) == (1.0, 0.0)
    eta, zeta = eta_zeta(2.0, 0.0)
    assert (eta, zeta) == (pytest.approx(1.25), pytest.approx(-0.75))


@given(st.floats(0.05, 20.0), st.floats(-20.0, 20.0))
def test_normalization_algebraic(b, bd):
    eta, zeta = eta_zeta(b, bd)
    assert abs(eta) ** 2 - abs(zeta) ** 2 == pytest.approx(1.0, abs=1e-9 * (1 + abs(eta) ** 2))


@settings(max_examples=8)
@given(st.integers(0, 10_000))
def test_normalization_along_random_trajectories(seed):
    traj = integrate_auxiliary(random_profile(seed))
    eta, zeta = eta_zeta(traj.b, traj.b_dot)
    assert np.max(np.abs(np.abs(eta) ** 2 - np.abs(zeta) ** 2 - 1)) < 1e-9
    assert np.all(np.diff(traj.theta) < 0)


def test_defect_certificate_small():
    assert integrate_auxiliary(random_profile(4)).defect() < 1e-8


def test_identity_gate_for_static_well():
    m = lr_gate(integrate_auxiliary(TimeProfile.constant(1.0, 0.0, 5.0)))
    assert np.allclose(m, np.eye(2), atol=1e-10)


@pytest.mark.parametrize("seed", range(6))
def test_lr_gate_matches_fundamental_solutions(seed):
    prof = random_profile(seed)
    m = lr_gate(integrate_auxiliary(prof))
    S = oracles.fundamental_matrix(prof, prof.t_start, prof.t_end)
    u, v = oracles.bogoliubov_from_fundamental(S, prof.duration)
    assert abs(m[0, 0] - u) < 1e-8
    assert abs(m[0, 1] - v) < 1e-8


def test_boundary_error_when_profile_does_not_return():
    traj = integrate_auxiliary(TimeProfile.constant(1.5, 0.0, 3.0))
    with pytest.raises(BoundaryError):
        lr_gate(traj)


def test_singularity_when_b_crosses_floor():
    with pytest.raises(SingularityError):
        integrate_auxiliary(TimeProfile.constant(16.0, 0.0, 2.0), b_min=0.6)


def test_rejects_nonpositive_b0():
    with pytest.raises(ValueError):
        integrate_auxiliary(TimeProfile.constant(1.0, 0.0, 1.0), b0=0.0)


# -- classical driven oscillator -------------------------------------------------

def test_classical_zero_drive():
    w = TimeProfile.constant(1.0, 0.0, 10.0)
    ct = classical_trajectory(w, TimeProfile.constant(0.0, 0.0, 10.0))
    assert np.max(np.abs(ct.x_c)) == 0 and np.max(np.abs(ct.p_c)) == 0
    assert beta_from_classical(ct) == 0


def test_classical_displaced_equilibrium():
    w = TimeProfile.constant(1.0, 0.0, 10.0)
    ct = classical_trajectory(w, TimeProfile.constant(0.7, 0.0, 10.0), x0=0.7)
    assert np.max(np.abs(ct.x_c - 0.7)) < 1e-12


def test_classical_ramp_closed_form():
    v, T = 0.3, 10.0
    w = TimeProfile.constant(1.0, 0.0, T)
    s = TimeProfile.from_function(lambda t: v * np.asarray(t), 0.0, T, dfn=lambda t: v + 0 * np.asarray(t))
    ct = classical_trajectory(w, s)
    assert np.max(np.abs(ct.x_c - oracles.driven_ramp(ct.times, v))) < 1e-9


@pytest.mark.parametrize("seed", range(50))
def test_generalized_beta_matches_classical_oracle(seed):
    prof, s = random_profile(seed), random_path(seed)
    beta = generalized_beta(integrate_auxiliary(prof), s)
    ref = beta_from_classical(classical_trajectory(prof, s))
    assert abs(beta - ref) < 1e-6


def test_generalized_beta_vanishes_without_drive():
    traj = integrate_auxiliary(random_profile(2))
    assert generalized_beta(traj, TimeProfile.constant(0.0, 0.0, 12.0)) == 0
