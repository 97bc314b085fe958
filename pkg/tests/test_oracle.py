import math

import pytest

from src.oracle import (HypothesisViolated, InexactDivision, InvalidBoundary,
                        LimitBound, Phase, adaptive_beats_fixed_threshold, adaptive_limit_utility,
                        adaptive_steady_count, brute_force_block_opinion, brute_force_block_opinions,
                        decreasing_is_exact, epsilon1, limit_agent_utility, limit_opinion,
                        measure_adaptive_boundary, skip_one_click_drift_tolerance, skip_one_click_limit_utility,
                        steady_limit_weight, upsilon_adaptive, upsilon_decreasing, upsilon_fixed)

from .conftest import BASE_U0, BASE_X0

TOL = 1e-9


@pytest.mark.parametrize("T0", [0, 1, 5, 8])
def test_fixed_closed_form_matches_recursion(baseline_params, make_policy, T0):
    oracle = brute_force_block_opinions(baseline_params, make_policy('fixed', n=12, T0=T0), BASE_U0, BASE_X0, 12)
    for i in range(13):
        weight = upsilon_fixed(baseline_params, 8, T0, i)
        assert weight.opinion(BASE_X0, BASE_U0) == pytest.approx(oracle[i], abs=TOL)
        assert weight.gamma + weight.upsilon == pytest.approx(1.0, abs=1e-12)


def test_one_passive_block(baseline_params):
    assert upsilon_fixed(baseline_params, 8, 8, 1).upsilon == pytest.approx(0.6875 * (1 - 0.2 ** 8))
    assert upsilon_fixed(baseline_params, 8, 8, 0).upsilon == 0.0


@pytest.mark.parametrize("T0, kappa", [(8, 2), (8, 4), (8, 8), (4, 2), (6, 3)])
def test_decreasing_closed_form_matches_recursion(baseline_params, make_policy, T0, kappa):
    policy = make_policy('decreasing', n=12, T0=T0, kappa=kappa)
    oracle = brute_force_block_opinions(baseline_params, policy, BASE_U0, BASE_X0, 12)
    for i in range(13):
        weight = upsilon_decreasing(baseline_params, 8, T0, kappa, i)
        assert weight.opinion(BASE_X0, BASE_U0) == pytest.approx(oracle[i], abs=TOL)


def test_decreasing_phases(baseline_params):
    transient = upsilon_decreasing(baseline_params, 8, 8, 2, 4)
    steady = upsilon_decreasing(baseline_params, 8, 8, 2, 5)
    assert transient.phase is Phase.TRANSIENT
    assert steady.phase is Phase.STEADY_STATE
    assert steady.boundaries.m_D == 4
    assert steady.upsilon == pytest.approx(baseline_params.B ** 8 * transient.upsilon)


def test_kappa_one_is_fixed_policy(baseline_params):
    for i in range(6):
        assert upsilon_decreasing(baseline_params, 8, 8, 1, i).upsilon == upsilon_fixed(baseline_params, 8, 8, i).upsilon


def test_inexact_division(baseline_params):
    assert not decreasing_is_exact(6, 4)
    assert not decreasing_is_exact(7, 2)
    assert decreasing_is_exact(8, 2)
    with pytest.raises(InexactDivision):
        upsilon_decreasing(baseline_params, 8, 6, 4, 2)


def test_measure_adaptive_boundary_at_baseline_parameters(baseline_params):
    m_AD, schedule = measure_adaptive_boundary(baseline_params, 8, 8, 3, 0.1, BASE_X0, BASE_U0, 10)
    assert m_AD == 3
    assert schedule == [8, 5, 2, 2, 2, 2, 2, 2, 2, 2, 2]


def test_adaptive_closed_form_matches_recursion(baseline_params, make_policy):
    policy = make_policy('adaptive_decreasing', n=12, tau=3, x_drift=0.1)
    oracle = brute_force_block_opinions(baseline_params, policy, BASE_U0, BASE_X0, 12)
    for i in range(13):
        weight = upsilon_adaptive(baseline_params, 8, 8, 3, i, 3)
        assert weight.opinion(BASE_X0, BASE_U0) == pytest.approx(oracle[i], abs=TOL)
    assert upsilon_adaptive(baseline_params, 8, 8, 3, 3, 3).phase is Phase.TRANSIENT
    assert upsilon_adaptive(baseline_params, 8, 8, 3, 4, 3).phase is Phase.STEADY_STATE


def test_adaptive_floored_schedule_matches_recursion(baseline_params, make_policy):
    # 每块都触发: 8, 5, 2, 0, 0, ...
    policy = make_policy('adaptive_decreasing', n=10, tau=3, x_drift=1e-6)
    m_AD, schedule = measure_adaptive_boundary(baseline_params, 8, 8, 3, 1e-6, BASE_X0, BASE_U0, 10)
    assert schedule[:5] == [8, 5, 2, 0, 0]
    assert adaptive_steady_count(8, 3, m_AD) == (m_AD - 1, 0)
    oracle = brute_force_block_opinions(baseline_params, policy, BASE_U0, BASE_X0, 10)
    for i in range(11):
        weight = upsilon_adaptive(baseline_params, 8, 8, 3, i, m_AD)
        assert weight.opinion(BASE_X0, BASE_U0) == pytest.approx(oracle[i], abs=TOL)


def test_adaptive_without_trigger_is_fixed(baseline_params):
    m_AD, schedule = measure_adaptive_boundary(baseline_params, 8, 8, 1, 1.5, BASE_X0, BASE_U0, 6)
    assert m_AD == 1
    assert set(schedule) == {8}
    for i in range(6):
        assert upsilon_adaptive(baseline_params, 8, 8, 1, i, 1).upsilon == upsilon_fixed(baseline_params, 8, 8, i).upsilon


def test_adaptive_boundary_consistency():
    with pytest.raises(InvalidBoundary):
        adaptive_steady_count(8, 3, 0)
    with pytest.raises(InvalidBoundary):
        adaptive_steady_count(8, 3, 6)


def test_extended_precision_agrees_with_float_recursion(baseline_params, make_policy):
    policy = make_policy('decreasing', n=8, kappa=2)
    exact = brute_force_block_opinion(baseline_params, policy, BASE_U0, BASE_X0, 8)
    plain = brute_force_block_opinion(baseline_params, policy, BASE_U0, BASE_X0, 8, precision=None)
    assert exact == pytest.approx(plain, abs=1e-12)


def test_limits_at_baseline_parameters(baseline_params):
    assert limit_opinion('fixed', baseline_params, BASE_X0, BASE_U0).low == pytest.approx(0.375)
    assert limit_opinion('decreasing', baseline_params, BASE_X0, BASE_U0) == LimitBound.point(BASE_X0)
    adaptive = limit_opinion('adaptive_decreasing', baseline_params, BASE_X0, BASE_U0, x_drift=0.1)
    assert (adaptive.low, adaptive.high) == (-1.0, pytest.approx(-0.9))
    assert limit_agent_utility('fixed', baseline_params, BASE_X0, BASE_U0, 0.5).low == pytest.approx(-0.1875)
    assert limit_agent_utility('decreasing', baseline_params, BASE_X0, BASE_U0, 0.5).is_point
    assert limit_agent_utility('adaptive_decreasing', baseline_params, BASE_X0, BASE_U0, 0.5) == LimitBound(0.0, 0.5)


def test_steady_limit_weight(baseline_params):
    assert steady_limit_weight(baseline_params, 8, 8) == pytest.approx(1 - baseline_params.eta)
    assert steady_limit_weight(baseline_params, 8, 0) == 0.0


def test_adaptive_limit_utility_with_two_clicks(baseline_params):
    drift = 2.0 * steady_limit_weight(baseline_params, 8, 2)
    assert drift == pytest.approx(0.0102, abs=1e-3)
    assert adaptive_limit_utility(baseline_params, 8, 2, 0.5, BASE_X0, BASE_U0) == pytest.approx(0.125 - 0.5 * drift)


def test_epsilon_threshold(baseline_params):
    eps1 = epsilon1(baseline_params, 8)
    assert 0.0 < eps1 < baseline_params.B

    value, possible = adaptive_beats_fixed_threshold(baseline_params, 8, 0.8, BASE_X0, BASE_U0)
    assert value == eps1
    assert possible
    skip = skip_one_click_limit_utility(baseline_params, 8, 0.8, BASE_X0, BASE_U0)
    fixed = limit_agent_utility('fixed', baseline_params, BASE_X0, BASE_U0, 0.8).low
    assert skip > fixed
    assert skip_one_click_drift_tolerance(baseline_params, 8, BASE_X0, BASE_U0) == pytest.approx(
        1.375 * eps1 + 1e-3)


@pytest.mark.parametrize("lam, x0, u0", [(0.5, -1.0, 1.0), (1.0, -1.0, 1.0), (0.8, 0.2, 0.2)])
def test_epsilon_threshold_hypotheses(baseline_params, lam, x0, u0):
    with pytest.raises(HypothesisViolated):
        adaptive_beats_fixed_threshold(baseline_params, 8, lam, x0, u0)


def test_block_arguments_are_checked(baseline_params):
    with pytest.raises(HypothesisViolated):
        upsilon_fixed(baseline_params, 8, 9, 1)
    with pytest.raises(HypothesisViolated):
        upsilon_fixed(baseline_params, 8, 8, -1)
    assert math.isclose(upsilon_fixed(baseline_params, 1, 1, 3).gamma + upsilon_fixed(baseline_params, 1, 1, 3).upsilon, 1.0)
