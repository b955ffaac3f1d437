import numpy as np
import pytest
from hypothesis import given, strategies as st

from ionubs.templates import (ClosedGaussianDip, Constant, ExpPowerBump, SqueezeBlend,
                              omega_sq_from_b, smoothstep5)

H = 1e-5
TEMPLATES = [
    ExpPowerBump(-0.3, 2.0),
    ExpPowerBump(3 ** -0.25 - 1, 2.0, power=3, one_sided=True),
    ClosedGaussianDip(0.2, 1.0, 8.0),
    ClosedGaussianDip(-0.15, 1.0, 8.0, center=3.5),
    SqueezeBlend(0.5, 4 * np.pi),
]


def central_difference(tpl, t, order):
    """d/dt of the analytic (order - 1) derivative."""
    return (tpl.derivatives(t + H, order - 1)[order - 1] - tpl.derivatives(t - H, order - 1)[order - 1]) / (2 * H)


@pytest.mark.parametrize("tpl", TEMPLATES, ids=lambda t: type(t).__name__)
@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_analytic_derivatives_match_finite_differences(tpl, order):
    t = np.linspace(0.37, 7.3, 23)
    exact = tpl.derivatives(t, order)[order]
    approx = central_difference(tpl, t, order)
    assert np.max(np.abs(exact - approx)) < 1e-6 * max(1.0, np.max(np.abs(exact)))


def test_constant_template():
    d = Constant(2.5).derivatives(np.array([0.0, 1.0]), 3)
    assert np.all(d[0] == 2.5) and np.all(d[1:] == 0)


@pytest.mark.parametrize("k", [-0.3, 0.1, 0.5])
def test_closed_dip_returns_exactly_at_both_ends(k):
    tpl = ClosedGaussianDip(k, 1.0, 8.0)
    d = tpl.derivatives(np.array([0.0, 8.0]), 2)
    assert np.allclose(d[0], 1.0, atol=1e-13)
    assert np.allclose(d[1:], 0.0, atol=1e-13)


def test_squeeze_blend_starts_flat_and_is_continuous_at_the_end():
    T = 4 * np.pi
    tpl = SqueezeBlend(0.5, T)
    d0 = tpl.derivatives(np.array([0.0]), 2)[:, 0]
    assert d0 == pytest.approx([1.0, 0.0, 0.0], abs=1e-13)
    inside = tpl.derivatives(np.array([T - 1e-9]), 2)[:, 0]
    outside = tpl.derivatives(np.array([T + 1e-9]), 2)[:, 0]
    assert np.allclose(inside, outside, atol=1e-6)


def test_smoothstep_endpoints():
    v = smoothstep5(np.array([0.0, 1.0, 2.0]), 2.0)
    assert v[0] == pytest.approx([0.0, 0.5, 1.0])


def test_omega_sq_of_unit_b_is_one():
    b = np.zeros((5, 4))
    b[0] = 1.0
    w = omega_sq_from_b(b)
    assert np.allclose(w[0], 1.0) and np.allclose(w[1:], 0.0)


@pytest.mark.parametrize("tpl", TEMPLATES, ids=lambda t: type(t).__name__)
def test_omega_sq_derivatives_consistent(tpl):
    t = np.linspace(0.5, 7.0, 17)
    w = omega_sq_from_b(tpl.derivatives(t, 4))
    for n in (1, 2):
        wp = omega_sq_from_b(tpl.derivatives(t + H, 4))[n - 1]
        wm = omega_sq_from_b(tpl.derivatives(t - H, 4))[n - 1]
        assert np.max(np.abs((wp - wm) / (2 * H) - w[n])) < 1e-5 * max(1.0, np.max(np.abs(w[n])))


@given(st.floats(0.5, 1.5))
def test_omega_sq_inverts_static_solution(b0):
    """A constant b is a stationary auxiliary solution of omega^2 = 1 / b^4."""
    b = np.zeros((3, 1))
    b[0] = b0
    assert omega_sq_from_b(b)[0][0] == pytest.approx(b0 ** -4)
