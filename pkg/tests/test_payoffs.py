import numpy as np
import pytest

from src.payoffs import (EmptyTrace, InvalidReward, RewardFn, agent_utility, clicks_per_block,
                         final_drift, platform_payoff, reward_from_dict, utility_series, validate_lambda)
from src.simulation import OpinionTrace


def _trace(x, u, clk, x0=0.0):
    return OpinionTrace(x0=x0, x=tuple(x), u=tuple(u), clk=tuple(clk),
                        agent_reward=tuple(0.0 for _ in u), platform_reward=tuple(0.0 for _ in u),
                        block_boundaries=())


def test_linear_reward_clamps_at_zero():
    reward = RewardFn('linear_distance', c=0.8)
    assert reward.at(0.5) == pytest.approx(0.6)
    assert reward.at(2.0) == 0.0
    assert np.array_equal(reward(np.array([0.5, 2.0])), np.array([reward.at(0.5), 0.0]))


def test_constant_reward_vectorized():
    reward = RewardFn('constant', value=2.0)
    assert list(reward(np.zeros(3))) == [2.0, 2.0, 2.0]


def test_reward_from_dict_validates():
    assert reward_from_dict({'kind': 'linear_distance', 'c': 0.1}) == RewardFn('linear_distance', c=0.1)
    with pytest.raises(InvalidReward) as excinfo:
        reward_from_dict({'kind': 'linear_distance', 'c': 1.5})
    assert excinfo.value.invariant == "reward_c_in_unit_interval"


def test_lambda_range():
    assert validate_lambda(0) == 0.0
    with pytest.raises(InvalidReward) as excinfo:
        validate_lambda(1.1)
    assert excinfo.value.invariant == "lambda_in_unit_interval"


def test_agent_utility_and_platform_payoff():
    trace = _trace(x=[0.0, 0.5, 0.5, 0.25], u=[1.0, 1.0, 1.0], clk=[1, 0, 1])
    reward = RewardFn('linear_distance', c=0.5)
    # 点击步 k=0 (d=1) 与 k=2 (d=0.5)
    expected_mean = (0.5 + 0.75) / 3
    assert platform_payoff(trace, reward) == pytest.approx(expected_mean)
    assert agent_utility(trace, reward, 0.5) == pytest.approx(0.5 * expected_mean - 0.5 * 0.25)
    assert final_drift(trace) == 0.25


def test_utility_series_ends_at_full_horizon():
    trace = _trace(x=[0.0, 0.5, 0.5, 0.25], u=[1.0, 1.0, 1.0], clk=[1, 0, 1])
    reward = RewardFn('constant', value=1.0)
    series = utility_series(trace, reward, reward, 0.3)
    assert [k for k, _, _ in series] == [1, 2, 3]
    assert series[0][1] == pytest.approx(0.3 * 1.0 - 0.7 * 0.5)
    assert series[-1][1] == agent_utility(trace, reward, 0.3)
    assert series[-1][2] == platform_payoff(trace, reward)


def test_empty_trace():
    with pytest.raises(EmptyTrace):
        platform_payoff(_trace(x=[0.0], u=[], clk=[]), RewardFn())


def test_clicks_per_block():
    assert clicks_per_block([1, 1, 0, 0, 1, 0, 0, 0], 4) == [2, 1]
