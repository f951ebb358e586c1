import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybridmeas.lyapunov import (
    DivergenceSeries, LyapunovError, divergence_series, fit_exponent, make_offset, renormalized_exponent,
    saturation_time,
)
from hybridmeas.model import HybridParams, HybridState


def synthetic(c, lam, t_end=120.0, dt=0.05):
    t = np.arange(0.0, t_end + dt / 2, dt)
    d = c * np.exp(lam * t)
    p = HybridParams()
    return DivergenceSeries(t, d, d.copy(), d.copy(), make_offset(c), p)


@pytest.fixture(scope="module")
def chaotic_series():
    p = HybridParams(gamma_cl=0.25)
    return divergence_series(p, HybridState.default(p), t_end=200.0)


@pytest.mark.parametrize("c, lam", [(8e-7, 0.17), (5e-7, 0.168)])
def test_synthetic_round_trip(c, lam):
    est = fit_exponent(synthetic(c, lam))
    assert est.exponent == pytest.approx(lam, abs=1e-6)
    assert est.prefactor == pytest.approx(c, abs=1e-9)
    assert est.method == "regression"
    assert est.window[0] < est.window[1]
    assert est.residual >= 0
    # the fit stops before the series reaches 1.0
    assert c * math.exp(lam * est.window[1]) < 1.0


@given(c=st.floats(1e-9, 1e-3), lam=st.floats(0.05, 1.0))
def test_synthetic_round_trip_any_rate(c, lam):
    t_end = math.log(1 / c) / lam + 5
    est = fit_exponent(synthetic(c, lam, t_end=t_end, dt=t_end / 400))
    assert est.exponent == pytest.approx(lam, rel=1e-8)
    assert est.prefactor == pytest.approx(c, rel=1e-6)


def test_constant_series_gives_zero():
    est = fit_exponent(synthetic(1e-7, 0.0, t_end=50.0))
    assert abs(est.exponent) < 1e-12
    assert est.prefactor == pytest.approx(1e-7, rel=1e-12)


def test_too_few_points_before_saturation():
    # saturates after ~2 time units, leaving fewer than 10 points past the skip window
    with pytest.raises(LyapunovError, match="insufficient pre-saturation data"):
        fit_exponent(synthetic(0.5, 0.4, t_end=20.0, dt=0.2))


def test_estimate_record_fields():
    rec = fit_exponent(synthetic(8e-7, 0.17)).to_record()
    assert {"exponent", "prefactor", "window", "residual", "method"} <= set(rec)


def test_zero_offset_rejected():
    p = HybridParams()
    with pytest.raises(LyapunovError, match="offset must be nonzero"):
        divergence_series(p, HybridState.default(p), offset=np.zeros(6), t_end=1.0)
    with pytest.raises(LyapunovError):
        make_offset(1e-7, "Y")


def test_harmonic_pair_stays_within_twice_offset(harmonic):
    init = HybridState.default(harmonic)
    off = make_offset(1e-7)
    ser = divergence_series(harmonic, init, off, t_end=200.0)
    assert ser.delta_cl.max() <= 2 * np.linalg.norm(off)
    assert np.all(ser.delta_cl > 0)
    # it really oscillates between the components rather than staying frozen
    assert ser.t[-1] == 200.0


def test_chaotic_separation_grows_then_saturates(chaotic_series):
    d = chaotic_series.delta_cl
    assert d[0] == pytest.approx(1e-7)
    t_sat = saturation_time(chaotic_series, "cl")
    assert t_sat < 200.0
    after = d[chaotic_series.t >= t_sat]
    assert after.max() < 10.0
    assert np.all(chaotic_series.delta_width < 1e-6)


def test_chaotic_regression_positive_and_robust_to_offset(chaotic_series):
    p = chaotic_series.params
    half = divergence_series(p, HybridState.default(p), make_offset(5e-8), t_end=200.0)
    a = fit_exponent(chaotic_series).exponent
    b = fit_exponent(half).exponent
    assert a > 0.05
    assert abs(a - b) / a < 0.10


def test_regression_agrees_with_renormalized_over_same_horizon(chaotic_series):
    p = chaotic_series.params
    reg = fit_exponent(chaotic_series)
    n = int(math.ceil(reg.window[1]))
    ren = renormalized_exponent(p, HybridState.default(p), n_intervals=n, discard=1, channels=("cl",))["cl"]
    assert abs(reg.exponent - ren.exponent) / ren.exponent < 0.20


def test_renormalized_preconditions():
    p = HybridParams()
    s = HybridState.default(p)
    with pytest.raises(LyapunovError, match="n_intervals must be >= 10"):
        renormalized_exponent(p, s, n_intervals=9)
    with pytest.raises(LyapunovError):
        renormalized_exponent(p, s, renorm_interval=0.0, n_intervals=10)
    with pytest.raises(LyapunovError):
        renormalized_exponent(p, s, n_intervals=10, channels=("bogus",))


def test_separation_underflow_reported():
    # a perturbation in X never reaches the centre channel without coupling
    p = HybridParams(lambda_c=0.0)
    with pytest.raises(LyapunovError, match="separation underflow"):
        renormalized_exponent(p, HybridState.default(p), n_intervals=10, channels=("qu",), perturb="X")


def test_harmonic_renormalized_exponents_vanish(harmonic):
    est = renormalized_exponent(harmonic, HybridState.default(harmonic), n_intervals=100)
    assert abs(est["cl"].exponent) <= 0.01
    assert abs(est["qu"].exponent) <= 0.01
    assert est["width"].exponent <= 0.01
    assert est["cl"].method == "renormalized"


def test_renormalized_offset_robustness_and_width_channel(chaotic):
    s = HybridState.default(chaotic)
    a = renormalized_exponent(chaotic, s, 1e-7, n_intervals=200)
    b = renormalized_exponent(chaotic, s, 5e-8, n_intervals=200)
    for c in ("cl", "qu"):
        assert a[c].exponent > 0.05
        assert abs(a[c].exponent - b[c].exponent) / a[c].exponent < 0.10
    assert a["width"].exponent <= 0.01
