import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfglab import (
    WeightSchedule,
    check_convergence_condition,
    identify_limit,
    run_fictitious_play,
    run_fixed_point,
    run_generic,
    solve_mfc,
    solve_mfg,
    solve_p_partial,
)
from mfglab.deviation import iterate_bound
from mfglab.errors import InvalidScheduleError, OutOfRangeError

from conftest import make_scenario


# ------------------------------------------------------------- schedules

@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=0, max_size=6), st.integers(1, 12))
def test_fixed_point_rows_are_probability_vectors(p_seq, n):
    row = WeightSchedule.fixed_point(p_seq).row(n)
    assert np.all(row >= 0.0)
    assert abs(row.sum() - 1.0) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99), st.integers(1, 30))
def test_fictitious_rows_are_probability_vectors(q_tilde, n):
    row = WeightSchedule.fictitious(q_tilde).row(n)
    assert row.shape == (n + 1,)
    assert np.all(row >= 0.0)
    assert abs(row.sum() - 1.0) <= 1e-12


def test_schedule_validation():
    with pytest.raises(InvalidScheduleError):
        WeightSchedule.fixed_point([0.5, 1.2])
    with pytest.raises(InvalidScheduleError):
        WeightSchedule.fictitious(1.0)
    with pytest.raises(InvalidScheduleError):
        WeightSchedule.custom([[0.5, 0.4]])  # does not sum to 1
    with pytest.raises(InvalidScheduleError):
        WeightSchedule.custom([[1.0], [1.0]])  # wrong row length


def test_fixed_point_row_shape():
    sched = WeightSchedule.fixed_point([0.25, 0.5])
    row = sched.row(2)
    q2 = (1 - 0.25) * (1 - 0.5)
    assert np.allclose(row, [q2, 0.0, 1 - q2])


# ------------------------------------------------------------ run_generic

def test_nobody_deviates_keeps_planner_mean(scenario):
    params, grid = scenario
    m = solve_mfc(params, grid).xbar_T
    rows = [[1.0] + [0.0] * n for n in range(1, 9)]
    trace = run_generic(params, WeightSchedule.custom(rows), 8, grid)
    assert np.max(np.abs(trace.population_xbar_T - m)) <= 1e-14
    # every best response is the response to the planner mean
    from mfglab import EnvironmentMean, best_response
    br = best_response(params, EnvironmentMean(m), grid).xbar_T
    assert np.max(np.abs(trace.best_response_xbar_T - br)) <= 1e-12


def test_zero_deviation_schedule_equivalent(scenario):
    params, grid = scenario
    trace = run_generic(params, WeightSchedule.fixed_point(0.0), 8, grid)
    m = solve_mfc(params, grid).xbar_T
    assert np.max(np.abs(trace.population_xbar_T - m)) <= 1e-14


def test_everyone_deviates_is_picard_iteration(scenario):
    params, grid = scenario
    trace = run_fixed_point(params, 1.0, 30, 1e-10, grid)
    mfg = solve_mfg(params, grid).xbar_T
    assert trace.converged
    assert len(trace.ns) <= 30
    assert abs(trace.limit - mfg) <= 1e-10


def test_generic_equals_fixed_point_runner(scenario):
    params, grid = scenario
    p_seq = [0.3, 0.1, 0.0, 0.7, 0.2]
    generic = run_generic(params, WeightSchedule.fixed_point(p_seq), 40, grid)
    direct = run_fixed_point(params, p_seq, 40, 0.0, grid)
    n = len(direct.ns)  # direct runner may stop once the update is exactly zero
    assert n >= 20
    for name in ("population_xbar_T", "best_response_xbar_T", "Q", "residuals"):
        diff = np.abs(getattr(generic, name)[:n] - getattr(direct, name))
        assert np.max(diff) <= 1e-12, name


# --------------------------------------------------------- run_fixed_point

def test_constant_half_converges_to_equilibrium(scenario):
    params, grid = scenario
    trace = run_fixed_point(params, 0.5, 200, 1e-12, grid)
    mfg = solve_mfg(params, grid).xbar_T
    assert trace.converged
    assert trace.p_star_inf == 1.0
    assert abs(trace.limit - mfg) <= 1e-8
    assert trace.Q[-1] <= 1e-12


def test_single_defection_wave_limit(scenario):
    params, grid = scenario
    trace = run_fixed_point(params, [0.5], 200, 1e-13, grid)
    assert abs(trace.p_star_inf - 0.5) <= 1e-15
    assert abs(trace.limit - identify_limit(params, 0.5, grid)) <= 1e-8


def test_no_interaction_reaches_limit_in_one_step():
    params, grid = make_scenario(0.0)
    trace = run_fixed_point(params, 0.7, 100, 1e-12, grid)
    assert abs(trace.population_xbar_T[0] - math.exp(-1.0)) <= 1e-14
    assert abs(trace.limit - math.exp(-1.0)) <= 1e-14


def test_picard_contraction_rate(scenario):
    params, grid = scenario
    trace = run_fixed_point(params, 1.0, 16, 0.0, grid)
    c2 = 0.25 * (1.0 - math.exp(-2.0))
    ratios = trace.residuals[3:13] / trace.residuals[2:12]
    assert np.max(np.abs(ratios - c2)) <= 0.1 * c2


def test_iterates_bounded(scenario):
    params, grid = scenario
    bound = iterate_bound(params, grid)
    rng = np.random.default_rng(5)
    for _ in range(5):
        p_seq = list(rng.uniform(0.0, 1.0, size=4))
        trace = run_fixed_point(params, p_seq, 60, 0.0, grid)
        assert np.max(np.abs(trace.population_xbar_T)) <= bound + 1e-12


def test_limit_identification_random_sequences(scenario):
    params, grid = scenario
    rng = np.random.default_rng(42)
    for _ in range(20):
        n_active = int(rng.integers(1, 6))
        p_seq = list(rng.uniform(0.0, 0.9, size=n_active))
        trace = run_fixed_point(params, p_seq, 600, 1e-14, grid)
        p_inf = 1.0 - float(np.prod([1.0 - p for p in p_seq]))
        assert abs(trace.p_star_inf - p_inf) <= 1e-12
        assert abs(trace.limit - identify_limit(params, p_inf, grid)) <= 1e-7


# ------------------------------------------------------- fictitious play

def test_fictitious_without_interaction():
    params, grid = make_scenario(0.0)
    trace = run_fictitious_play(params, 0.5, 50, grid)
    assert abs(trace.limit - math.exp(-1.0)) <= 1e-14
    assert trace.distance_to_partial <= 1e-14


def test_fictitious_approaches_partial_equilibrium_monotone_case():
    params, grid = make_scenario(-0.5)
    trace = run_fictitious_play(params, 0.5, 500, grid)
    assert trace.distance_to_partial <= 1e-4
    assert trace.converged
    mix = solve_p_partial(params, 0.5, grid).population_xbar_T
    assert abs(trace.limit - mix) == trace.distance_to_partial


def test_fictitious_near_full_deviation_approaches_equilibrium(scenario):
    params, grid = scenario
    trace = run_fictitious_play(params, 0.999, 2000, grid)
    mfg = solve_mfg(params, grid).xbar_T
    assert abs(trace.limit - mfg) <= 1e-3


def test_fictitious_needs_two_iterations(scenario):
    params, grid = scenario
    with pytest.raises(InvalidScheduleError):
        run_fictitious_play(params, 0.5, 1, grid)


# ------------------------------------------------ condition and limits

def test_convergence_condition_examples():
    assert check_convergence_condition(make_scenario(0.0)[0]).constant == 0.0
    cond = check_convergence_condition(make_scenario(0.5)[0])
    assert abs(cond.constant - 0.216166) <= 1e-6
    assert cond.satisfied
    big = check_convergence_condition(make_scenario(3.0, T=50.0)[0])
    assert abs(big.constant - 1.5) <= 1e-10
    assert not big.satisfied


def test_identify_limit_endpoints(scenario):
    params, grid = scenario
    assert abs(identify_limit(params, 0.0, grid) - solve_mfc(params, grid).xbar_T) <= 1e-12
    assert abs(identify_limit(params, 1.0, grid) - solve_mfg(params, grid).xbar_T) <= 1e-10
    assert abs(identify_limit(params, 0.5, grid) - 0.511416) <= 1e-5
    with pytest.raises(OutOfRangeError):
        identify_limit(params, 1.2, grid)
