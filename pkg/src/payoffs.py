"""
收益模块 - 奖励函数、智能体效用与平台收益
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class PayoffError(Exception):
    """收益计算相关错误的基类"""
    pass


class EmptyTrace(PayoffError):
    """轨迹中没有任何已完成的步"""
    pass


class InvalidReward(PayoffError):
    """奖励函数或效用权重不合法"""

    def __init__(self, reason: str, invariant: str):
        super().__init__(reason)
        self.reason = reason
        self.invariant = invariant


@dataclass(frozen=True)
class RewardFn:
    """
    奖励函数 R(d)，d = |x - u|

    constant:        R(d) = value
    linear_distance: R(d) = max(0, 1 - c*d)，c > 1/2 时在 d 接近 2 处截断为 0
    """
    kind: str = 'constant'
    value: float = 1.0
    c: float = 0.0

    def __post_init__(self):
        if self.kind == 'constant':
            if self.value < 0.0:
                raise InvalidReward(f"常数奖励必须非负: {self.value}", "reward_non_negative")
        elif self.kind == 'linear_distance':
            if not 0.0 <= self.c <= 1.0:
                raise InvalidReward(f"线性奖励系数 c 必须在 [0,1] 内: {self.c}", "reward_c_in_unit_interval")
        else:
            raise InvalidReward(f"未知的奖励函数类型: {self.kind!r}", "reward_kind")

    def __call__(self, distance):
        """对单个距离或 numpy 数组求值"""
        if self.kind == 'constant':
            return np.full(np.shape(distance), self.value, dtype=float)
        return np.maximum(0.0, 1.0 - self.c * np.asarray(distance, dtype=float))

    def at(self, distance: float) -> float:
        """标量求值，与 __call__ 的逐元素结果逐位一致"""
        if self.kind == 'constant':
            return self.value
        return max(0.0, 1.0 - self.c * distance)

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == 'constant':
            return {'kind': 'constant', 'value': self.value}
        return {'kind': 'linear_distance', 'c': self.c}


def reward_from_dict(data: Dict[str, Any]) -> RewardFn:
    """从配置字典构造奖励函数"""
    if not isinstance(data, dict):
        raise InvalidReward(f"奖励配置必须是字典: {data!r}", "reward_mapping")
    kind = data.get('kind', 'constant')
    allowed = {'kind', 'value'} if kind == 'constant' else {'kind', 'c'}
    unknown = set(data) - allowed
    if unknown:
        raise InvalidReward(f"奖励配置包含未知字段: {sorted(unknown)}", "unknown_key")
    try:
        if kind == 'linear_distance':
            return RewardFn(kind=kind, c=float(data.get('c', 0.0)))
        return RewardFn(kind=kind, value=float(data.get('value', 1.0)))
    except (TypeError, ValueError):
        raise InvalidReward(f"奖励参数必须是实数: {data!r}", "reward_real")


def validate_lambda(lam: float) -> float:
    """校验效用权重 λ ∈ [0,1]"""
    try:
        lam = float(lam)
    except (TypeError, ValueError):
        raise InvalidReward(f"lambda 必须是实数: {lam!r}", "lambda_real")
    if not 0.0 <= lam <= 1.0:
        raise InvalidReward(f"lambda 必须在 [0,1] 内: {lam}", "lambda_in_unit_interval")
    return lam


def _step_rewards(trace, reward_fn: RewardFn) -> np.ndarray:
    if trace.K < 1:
        raise EmptyTrace("轨迹为空，无法计算效用")
    x = np.asarray(trace.x[:-1], dtype=float)
    u = np.asarray(trace.u, dtype=float)
    clk = np.asarray(trace.clk, dtype=float)
    return clk * reward_fn(np.abs(x - u))


def agent_utility(trace, reward_fn: RewardFn, lam: float) -> float:
    """
    智能体效用: λ·(1/K)·Σ clk_i·R^A(|x_i-u_i|) - (1-λ)·|x_K - x0|

    Raises:
        EmptyTrace: 轨迹没有已完成的步
    """
    rewards = _step_rewards(trace, reward_fn)
    mean_reward = float(np.sum(rewards)) / trace.K
    drift = abs(trace.x[-1] - trace.x0)
    return lam * mean_reward - (1.0 - lam) * drift


def platform_payoff(trace, reward_fn: RewardFn) -> float:
    """
    平台收益: (1/K)·Σ clk_i·R^P(|x_i-u_i|)

    Raises:
        EmptyTrace: 轨迹没有已完成的步
    """
    rewards = _step_rewards(trace, reward_fn)
    return float(np.sum(rewards)) / trace.K


def utility_series(trace, agent_reward: RewardFn, platform_reward: RewardFn,
                   lam: float) -> List[Tuple[int, float, float]]:
    """
    逐前缀的效用序列

    第 k 项 (k = 1..K) 把前 k 步视为一个完整的视界，漂移惩罚取 x_k。
    最后一项与整条轨迹的 agent_utility / platform_payoff 一致。
    """
    agent_rewards = _step_rewards(trace, agent_reward)
    platform_rewards = _step_rewards(trace, platform_reward)
    agent_cum = np.cumsum(agent_rewards)
    platform_cum = np.cumsum(platform_rewards)
    # 末项单独按全轨迹求和，保证与整条轨迹的结果逐位一致
    agent_cum[-1] = np.sum(agent_rewards)
    platform_cum[-1] = np.sum(platform_rewards)

    series = []
    for idx in range(trace.K):
        k = idx + 1
        drift = abs(trace.x[k] - trace.x0)
        series.append((
            k,
            lam * (float(agent_cum[idx]) / k) - (1.0 - lam) * drift,
            float(platform_cum[idx]) / k,
        ))
    return series


def final_drift(trace) -> float:
    """终端漂移 |x_K - x0|"""
    return abs(trace.x[-1] - trace.x0)


def clicks_per_block(clk: Sequence[int], s: int) -> List[int]:
    """按区块统计点击次数"""
    return [int(sum(clk[i:i + s])) for i in range(0, len(clk), s)]
