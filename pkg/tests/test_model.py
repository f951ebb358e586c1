import math
from dataclasses import asdict, fields

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybridmeas.model import (HybridParams, HybridState, ParameterError, Trajectory,
                              params_from_mapping, params_to_config, validate)


def test_defaults_validate():
    validate(HybridParams(M=1, A=1, B=1, Lambda=0.3, Omega=1, lambda_c=0.01, m=1, omega=1, tau=10, hbar=1))


@pytest.mark.parametrize("change, message", [
    ({"tau": 0.0}, "tau must be positive"),
    ({"M": -1.0}, "M must be positive"),
    ({"m": 0.0}, "m must be positive"),
    ({"hbar": -2.0}, "hbar must be positive"),
    ({"Omega": -1.0}, "Omega must be non-negative"),
    ({"gamma_cl": -0.1}, "gamma_cl must be non-negative"),
    ({"A": math.nan}, "A must be finite"),
    ({"B": math.inf}, "B must be finite"),
    ({"tau": -math.inf}, "tau must be finite"),
])
def test_validate_names_violation(change, message):
    with pytest.raises(ParameterError, match=message):
        validate(HybridParams().with_(**change))


def test_tau_infinite_means_no_measurement():
    p = HybridParams(tau=math.inf)
    validate(p)
    assert p.inv_tau == 0.0


@given(st.dictionaries(st.sampled_from([f.name for f in fields(HybridParams)]),
                       st.floats(allow_nan=True, allow_infinity=True) | st.text(max_size=3)))
def test_validate_is_total(changes):
    p = HybridParams(**{**asdict(HybridParams()), **changes})
    try:
        validate(p)
    except ParameterError:
        pass


finite = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False)


@given(M=finite, m=finite, tau=finite, hbar=finite, A=st.floats(-1e6, 1e6), lam=st.floats(-1e3, 1e3))
def test_config_round_trip(M, m, tau, hbar, A, lam):
    p = HybridParams(M=M, m=m, tau=tau, hbar=hbar, A=A, lambda_c=lam)
    import configparser
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_string(params_to_config(p))
    assert params_from_mapping(dict(cp["params"])) == p


def test_missing_key_is_named():
    values = {k: v for k, v in asdict(HybridParams()).items() if k != "tau"}
    with pytest.raises(ParameterError, match="tau"):
        params_from_mapping(values)


def test_state_invariants():
    with pytest.raises(ParameterError, match="delta"):
        HybridState(delta=0.0)
    with pytest.raises(ParameterError):
        HybridState(X=math.nan)
    s = HybridState(1.0, 1, 2, 3, 4, 5, 6)
    assert HybridState.from_array(1.0, s.to_array()) == s


def test_default_state_sits_at_width_fixed_point():
    p = HybridParams()
    s = HybridState.default(p)
    assert (s.X, s.Xdot, s.xbar, s.xbardot, s.deltadot) == (0.1, 0.0, 0.1, 0.0, 0.0)
    assert s.delta == pytest.approx((p.tau**2 / (1 + 4 * p.omega**2 * p.tau**2)) ** 0.25, rel=1e-15)


def test_trajectory_requires_increasing_time():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), np.ones((2, 6)), HybridParams())
