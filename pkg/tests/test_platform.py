import numpy as np
import pytest

from src.policies.agent import InvalidPolicy
from src.policies.distributions import Distribution, distribution_from_dict
from src.policies.platform import (ExplorePeriodically, FixedRecommendation, make_platform_policy,
                                   observe_outcome, recommend)


def test_fixed_recommendation_is_constant():
    platform = FixedRecommendation(0.4)
    assert [recommend(platform, k) for k in range(5)] == [0.4] * 5


@pytest.mark.parametrize("u0, invariant", [(1.5, "u0_in_range"), ("x", "u0_real")])
def test_fixed_recommendation_validation(u0, invariant):
    with pytest.raises(InvalidPolicy) as excinfo:
        FixedRecommendation(u0)
    assert excinfo.value.invariant == invariant


def test_explore_then_exploit_best_reward():
    platform = ExplorePeriodically(3, Distribution('uniform'), seed=11)
    u_a = recommend(platform, 0)
    observe_outcome(platform, 0, u_a, 1, 0.5)
    assert recommend(platform, 1) == u_a
    observe_outcome(platform, 1, u_a, 1, 0.5)
    observe_outcome(platform, 2, recommend(platform, 2), 0, 0.0)

    u_b = recommend(platform, 3)
    assert u_b != u_a
    observe_outcome(platform, 3, u_b, 1, 0.2)
    # 0.2 < 0.5，继续利用 u_a
    assert recommend(platform, 4) == u_a

    observe_outcome(platform, 4, u_a, 1, 0.9)
    assert platform.best.reward == 0.9
    assert platform.best.k == 4


def test_unclicked_step_earns_nothing():
    platform = ExplorePeriodically(4, Distribution('point', value=0.3), seed=0)
    u = recommend(platform, 0)
    observe_outcome(platform, 0, u, 0, 0.7)
    assert platform.best.reward == 0.0
    assert platform.best.u == 0.3
    assert platform.history == [(0.3, 0, 0.0)]


def test_exploration_is_reproducible_per_seed():
    def draws(seed):
        platform = ExplorePeriodically(1, Distribution('uniform'), seed=seed)
        out = []
        for k in range(5):
            u = recommend(platform, k)
            observe_outcome(platform, k, u, 1, 1.0)
            out.append(u)
        return out

    assert draws(5) == draws(5)
    assert draws(5) != draws(6)


def test_make_platform_policy_from_spec():
    platform = make_platform_policy({'kind': 'explore_periodically', 'delta': 18}, seed=1)
    assert isinstance(platform, ExplorePeriodically)
    assert platform.to_dict()['explore']['kind'] == 'uniform'

    with pytest.raises(InvalidPolicy) as excinfo:
        make_platform_policy({'kind': 'fixed_recommendation', 'u0': 0.0, 'delta': 3}, seed=1)
    assert excinfo.value.invariant == "unknown_key"
    with pytest.raises(InvalidPolicy) as excinfo:
        make_platform_policy({'kind': 'explore_periodically', 'delta': 0}, seed=1)
    assert excinfo.value.invariant == "delta_ge_one"


def test_truncated_gaussian_stays_in_range():
    dist = Distribution('gaussian', mean=0.0, stddev=2.0)
    rng = np.random.default_rng(0)
    samples = [dist.sample(rng) for _ in range(500)]
    assert min(samples) >= -1.0
    assert max(samples) <= 1.0


def test_distribution_from_dict():
    dist = distribution_from_dict({'kind': 'gaussian', 'mean': 0.1, 'stddev': 0.5, 'truncate': [-1, 1]})
    assert dist == Distribution('gaussian', mean=0.1, stddev=0.5)
    assert distribution_from_dict(dist.to_dict()) == dist


@pytest.mark.parametrize("data, invariant", [
    ({'kind': 'uniform', 'low': 0.5, 'high': 0.2}, "distribution_uniform_bounds"),
    ({'kind': 'gaussian', 'stddev': 0.0}, "distribution_stddev_positive"),
    ({'kind': 'point', 'value': 2.0}, "distribution_point_in_range"),
    ({'kind': 'beta'}, "distribution_kind"),
    ({'kind': 'uniform', 'scale': 1.0}, "unknown_key"),
])
def test_invalid_distributions(data, invariant):
    with pytest.raises(InvalidPolicy) as excinfo:
        distribution_from_dict(data)
    assert excinfo.value.invariant == invariant
