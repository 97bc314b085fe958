"""
平台推荐策略模块 - 固定推荐与周期性探索（贪心利用历史最佳推荐）
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .agent import InvalidPolicy
from .distributions import Distribution, distribution_from_dict

logger = logging.getLogger(__name__)


class PlatformPolicyKind(str, Enum):
    FIXED_RECOMMENDATION = 'fixed_recommendation'
    EXPLORE_PERIODICALLY = 'explore_periodically'


@dataclass(frozen=True)
class BestRecord:
    """目前观测到的最高平台收益及对应推荐"""
    reward: float
    u: float
    k: int


class PlatformPolicyState:
    """平台策略基类，每次仿真独占一个实例"""

    kind: PlatformPolicyKind

    def __init__(self):
        self.history: List[Tuple[float, int, float]] = []

    def recommend(self, k: int) -> float:
        raise NotImplementedError

    def observe_outcome(self, k: int, u_k: float, clk_k: int, reward_k: float) -> None:
        self.history.append((u_k, clk_k, reward_k if clk_k else 0.0))

    def to_dict(self) -> Dict[str, Any]:
        raise NotImplementedError


class FixedRecommendation(PlatformPolicyState):
    """每一步都推荐同一个 u0"""

    kind = PlatformPolicyKind.FIXED_RECOMMENDATION

    def __init__(self, u0: float):
        super().__init__()
        try:
            u0 = float(u0)
        except (TypeError, ValueError):
            raise InvalidPolicy(f"u0 必须是实数: {u0!r}", "u0_real")
        if not -1.0 <= u0 <= 1.0:
            raise InvalidPolicy(f"u0 必须在 [-1,1] 内: {u0}", "u0_in_range")
        self.u0 = u0

    def recommend(self, k: int) -> float:
        return self.u0

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind.value, 'u0': self.u0}


class ExplorePeriodically(PlatformPolicyState):
    """
    周期性探索策略

    在 k = 0, Δ, 2Δ, ... 时从探索分布重新抽取推荐，其余时刻推荐历史上
    clk·R^P 最高的推荐；并列时保留最早的记录。
    """

    kind = PlatformPolicyKind.EXPLORE_PERIODICALLY

    def __init__(self, delta: int, explore: Distribution, seed: int):
        super().__init__()
        if isinstance(delta, bool) or not isinstance(delta, int) or delta < 1:
            raise InvalidPolicy(f"探索周期 delta 必须是 >= 1 的整数: {delta!r}", "delta_ge_one")
        self.delta = delta
        self.explore = explore
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.best: Optional[BestRecord] = None

    def is_exploration_step(self, k: int) -> bool:
        return k % self.delta == 0

    def recommend(self, k: int) -> float:
        if self.is_exploration_step(k):
            u = self.explore.sample(self.rng)
            logger.debug(f"探索步 k={k}: 抽取推荐 u={u:.6g}")
            return u
        # k=0 总是探索步，因此利用步之前至少已有一条观测
        return self.best.u

    def observe_outcome(self, k: int, u_k: float, clk_k: int, reward_k: float) -> None:
        super().observe_outcome(k, u_k, clk_k, reward_k)
        reward = reward_k if clk_k else 0.0
        if self.best is None or reward > self.best.reward:
            if self.best is not None:
                logger.debug(f"k={k} 刷新最佳推荐: u={u_k:.6g}, 收益 {self.best.reward:.6g} -> {reward:.6g}")
            self.best = BestRecord(reward=reward, u=u_k, k=k)

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind.value, 'delta': self.delta, 'explore': self.explore.to_dict()}


def recommend(state: PlatformPolicyState, k: int) -> float:
    return state.recommend(k)


def observe_outcome(state: PlatformPolicyState, k: int, u_k: float, clk_k: int, reward_k: float) -> PlatformPolicyState:
    state.observe_outcome(k, u_k, clk_k, reward_k)
    return state


_PLATFORM_KEYS = {
    PlatformPolicyKind.FIXED_RECOMMENDATION: {'kind', 'u0'},
    PlatformPolicyKind.EXPLORE_PERIODICALLY: {'kind', 'delta', 'explore'},
}


def make_platform_policy(spec: Dict[str, Any], seed: int) -> PlatformPolicyState:
    """
    根据配置字典构造一个全新的平台策略实例

    Args:
        spec: platform 配置段
        seed: 探索分布使用的随机种子

    Raises:
        InvalidPolicy: 类型未知、字段缺失或取值不合法时
    """
    if not isinstance(spec, dict):
        raise InvalidPolicy(f"platform 配置必须是字典: {spec!r}", "platform_mapping")
    try:
        kind = PlatformPolicyKind(spec.get('kind', PlatformPolicyKind.FIXED_RECOMMENDATION.value))
    except ValueError:
        raise InvalidPolicy(f"未知的平台策略类型: {spec.get('kind')!r}", "platform_policy_kind")

    unknown = set(spec) - _PLATFORM_KEYS[kind]
    if unknown:
        raise InvalidPolicy(f"platform 配置包含未知字段: {sorted(unknown)}", "unknown_key")

    if kind == PlatformPolicyKind.FIXED_RECOMMENDATION:
        if 'u0' not in spec:
            raise InvalidPolicy("固定推荐策略需要 u0", "u0_required")
        return FixedRecommendation(spec['u0'])

    if 'delta' not in spec:
        raise InvalidPolicy("周期性探索策略需要 delta", "delta_ge_one")
    explore = distribution_from_dict(spec.get('explore', {'kind': 'uniform'}))
    return ExplorePeriodically(spec['delta'], explore, seed)
