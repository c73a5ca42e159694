import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mfglab import ModelParams, TimeGrid, monotonicity_flag, validate
from mfglab.errors import InvalidGridError, InvalidParameterError, NonFiniteError

from conftest import make_scenario
from oracles import lasry_lions_integral, random_measure


def test_q_zero_diagnostics():
    params, grid = make_scenario(0.0)
    diag = validate(params, grid)
    assert not diag.mfg_singular
    assert not diag.mfc_singular
    assert diag.monotone
    assert diag.contraction_constant == 0.0


def test_q_one_hits_both_singular_sets():
    params, grid = make_scenario(1.0)
    diag = validate(params, grid)
    assert diag.mfg_singular
    assert diag.mfc_singular


def test_contraction_constant_value():
    params, grid = make_scenario(0.5)
    diag = validate(params, grid)
    expected = 0.25 * (1.0 - math.exp(-2.0))
    assert abs(diag.contraction_constant - expected) < 1e-15
    assert abs(expected - 0.216166) < 1e-6


def test_validate_is_pure_and_idempotent():
    params, grid = make_scenario(-0.25, T=2.0)
    assert validate(params, grid) == validate(params, grid)


def test_near_singular_warns():
    params, grid = make_scenario(1.0 + 1e-8)
    with pytest.warns(UserWarning, match="singular set"):
        validate(params, grid)
    # exact hits do not warn, they flag
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        diag = validate(*make_scenario(1.0))
    assert diag.mfg_singular


def test_parameter_validation_errors():
    with pytest.raises(NonFiniteError):
        ModelParams(q=math.nan, T=1.0, x0=1.0)
    with pytest.raises(NonFiniteError):
        ModelParams(q=0.5, T=math.inf, x0=1.0)
    with pytest.raises(InvalidParameterError):
        ModelParams(q=0.5, T=-1.0, x0=1.0)
    with pytest.raises(InvalidParameterError):
        ModelParams(q=0.5, T=1.0, x0=1.0, sigma=0.0)
    with pytest.raises(InvalidGridError):
        TimeGrid(n_steps=1, T=1.0)
    with pytest.raises(InvalidGridError):
        validate(ModelParams(q=0.5, T=1.0, x0=1.0), TimeGrid(n_steps=10, T=2.0))


def test_monotonicity_flag_examples():
    assert monotonicity_flag(0.0)
    assert monotonicity_flag(-0.5)
    assert not monotonicity_flag(0.5)
    with pytest.raises(NonFiniteError):
        monotonicity_flag(math.nan)


@pytest.mark.parametrize("q", np.linspace(-2.0, 2.0, 17))
def test_monotonicity_flag_matches_measure_oracle(q):
    # sign of int [g(x, m') - g(x, m)] d(m' - m) over >= 100 random pairs
    rng = np.random.default_rng(7)
    integrals = [lasry_lions_integral(q, random_measure(rng), random_measure(rng))
                 for _ in range(120)]
    oracle_monotone = all(v >= -1e-12 for v in integrals)
    assert monotonicity_flag(q) == oracle_monotone
    if q > 0:  # witnesses must exist, not just sign agreement
        assert min(integrals) < -1e-12


@given(st.floats(min_value=-3, max_value=3, allow_nan=False),
       st.floats(min_value=-3, max_value=3, allow_nan=False))
def test_monotonicity_integral_closed_form(mean_shift_a, mean_shift_b):
    # the integral collapses to -q (mean' - mean)^2 for this terminal cost
    rng = np.random.default_rng(3)
    m1 = random_measure(rng)
    m2 = random_measure(rng)
    m1 = type(m1)(atoms=m1.atoms + mean_shift_a, weights=m1.weights)
    m2 = type(m2)(atoms=m2.atoms + mean_shift_b, weights=m2.weights)
    for q in (-0.7, 0.4):
        expected = -q * (m2.mean - m1.mean) ** 2
        assert abs(lasry_lions_integral(q, m1, m2) - expected) < 1e-9
