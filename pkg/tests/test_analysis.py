import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from hybridmeas.analysis import (
    contractive_state_experiment, free_width_squared, free_width_vertex, integrate_width,
    resolution_limits, resolution_sweep, stationary_resolution, width_lyapunov_function,
    width_relaxation_experiment,
)
from hybridmeas.dynamics import width_rhs
from hybridmeas.model import HybridParams


def test_free_particle_limit_is_exact():
    r = stationary_resolution(HybridParams(omega=0.0, tau=1.0))
    assert r.sigma0_sq == 1.0
    assert r.regime == "low-frequency"


def test_high_frequency_value_and_limit():
    p = HybridParams(omega=100.0, tau=1.0)
    r = stationary_resolution(p)
    assert r.sigma0_sq == pytest.approx(1 / math.sqrt(40001), rel=1e-15)
    assert abs(r.sigma0_sq - 5e-3) / 5e-3 < 2e-5
    assert resolution_limits(p)[1] == 5e-3
    assert r.regime == "high-frequency"


@given(omega=st.floats(0, 50), tau=st.floats(0.05, 50), m=st.floats(0.1, 10), hbar=st.floats(0.1, 10))
def test_stationary_width_is_root_of_width_balance(omega, tau, m, hbar):
    p = HybridParams(omega=omega, tau=tau, m=m, hbar=hbar)
    r = stationary_resolution(p)
    assert r.sigma0_sq == pytest.approx(tau * r.delta0**2, rel=1e-14)
    K = omega**2 + 1 / (4 * tau**2)
    # numerical root of the balance -K d + hbar^2/(4 m^2 d^3), searched in log d
    balance = lambda s: -K * math.exp(s) + hbar**2 / (4 * m**2 * math.exp(3 * s))
    root = math.exp(brentq(balance, -30.0, 30.0, xtol=1e-15, rtol=1e-15))
    assert r.delta0 == pytest.approx(root, rel=1e-12)
    f = width_rhs(p)(0.0, np.array([r.delta0, 0.0]))
    assert abs(f[1]) <= 1e-12 * hbar**2 / (4 * m**2 * r.delta0**3)


def test_regime_tags():
    assert stationary_resolution(HybridParams(omega=1.0, tau=1.0)).regime == "general"
    assert stationary_resolution(HybridParams(omega=0.05, tau=1.0)).regime == "low-frequency"
    assert stationary_resolution(HybridParams(omega=11.0, tau=1.0)).regime == "high-frequency"


def test_infinite_tau_has_no_stationary_resolution():
    with pytest.raises(ValueError):
        stationary_resolution(HybridParams(tau=math.inf))


def test_sigma0_monotone_in_omega_and_tau():
    by_omega = [stationary_resolution(HybridParams(omega=w, tau=2.0)).sigma0_sq for w in np.linspace(0, 20, 41)]
    by_tau = [stationary_resolution(HybridParams(omega=0.7, tau=t)).sigma0_sq for t in np.linspace(0.1, 20, 41)]
    assert np.all(np.diff(by_omega) < 0)
    assert np.all(np.diff(by_tau) > 0)


def test_exact_value_bounded_by_smaller_limit():
    # exact = low / sqrt(1 + 4x^2) with high = low / (2x): it never exceeds the
    # smaller limit and never falls below it by more than sqrt(2)
    rows = resolution_sweep(np.logspace(-3, 3, 61))
    wt, exact, low, high = rows.T
    nearest = np.minimum(low, high)
    assert np.all(exact <= nearest * (1 + 1e-15))
    assert np.all(exact >= nearest / math.sqrt(2) * (1 - 1e-15))
    # each limit is approached in its own regime
    assert exact[0] == pytest.approx(low[0], rel=1e-5)
    assert exact[-1] == pytest.approx(high[-1], rel=1e-6)


def test_relaxation_from_fixed_point_is_immediate():
    p = HybridParams(tau=10.0, omega=1.0)
    r = width_relaxation_experiment(p, p.stationary_width(), t_end=20.0)
    assert r.convergence_time == 0.0
    assert r.final_rel_error < 1e-12


def test_relaxation_from_twice_the_width():
    p = HybridParams(tau=10.0, omega=1.0)
    r = width_relaxation_experiment(p, 2 * p.stationary_width(), t_end=30 * p.tau)
    assert r.expected_rate == 0.05
    assert abs(r.decay_rate - 0.05) / 0.05 < 0.10
    assert r.final_rel_error < 1e-6
    assert 0 < r.convergence_time < 30 * p.tau
    assert r.overshoot > 0
    assert r.max_lyapunov_increase <= 1e-14


def test_lyapunov_function_derivative():
    # dV/dt = -deltadot^2 / tau along solutions, checked by central differences
    p = HybridParams(tau=3.0, omega=0.8)
    t, d, dd = integrate_width(p, 1.7, 0.4, 20.0, dt=1e-3)
    V = width_lyapunov_function(p, d, dd)
    dV = (V[2:] - V[:-2]) / (t[2:] - t[:-2])
    np.testing.assert_allclose(dV, -dd[1:-1] ** 2 / p.tau, atol=1e-6)
    assert np.all(np.diff(V) <= 1e-15)


def test_integrate_width_rejects_nonpositive_start():
    with pytest.raises(ValueError):
        integrate_width(HybridParams(), 0.0, 0.0, 1.0)


def test_free_closed_form_solves_width_equation():
    p = HybridParams(omega=0.0, tau=math.inf)
    t, d, _ = integrate_width(p, 1.2, -0.3, 5.0, dt=1e-3)
    np.testing.assert_allclose(d**2, free_width_squared(t, 1.2, -0.3), rtol=1e-10)


def test_contractive_state_matches_free_vertex():
    p = HybridParams(omega=0.0, tau=math.inf)
    r = contractive_state_experiment(p, 1.0, -0.5, t_end=5.0)
    t_v, d_v = free_width_vertex(1.0, -0.5)
    assert d_v == pytest.approx(math.sqrt(0.5), rel=1e-15)
    assert abs(r.min_delta - d_v) < 1e-8
    assert abs(r.t_min - t_v) < 1e-6
    assert r.min_delta < 1.0
    assert not r.baseline_contracts
    assert r.beats_standard_limit
    assert r.contraction_interval[0] == 0.0 and r.contraction_interval[1] > t_v


@pytest.mark.parametrize("tau", [math.inf, 10.0, 1.0])
def test_negative_launch_contracts(tau):
    p = HybridParams(omega=0.0, tau=tau)
    r = contractive_state_experiment(p, 1.0, -0.2, t_end=5.0)
    assert r.min_delta < 1.0
    assert r.beats_standard_limit


def test_launch_at_rest_does_not_contract():
    p = HybridParams(omega=0.0, tau=math.inf)
    r = contractive_state_experiment(p, 1.0, 0.0, t_end=5.0)
    assert r.min_delta == 1.0
    assert r.contraction_interval is None
    assert not r.beats_standard_limit


def test_positive_launch_rejected():
    with pytest.raises(ValueError):
        contractive_state_experiment(HybridParams(omega=0.0), 1.0, 0.1)
