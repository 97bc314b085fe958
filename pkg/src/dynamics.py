"""
核心动力学模块 - 单步观点更新与动力学参数校验
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict

logger = logging.getLogger(__name__)

# 凸组合守卫的浮点余量
CONVEXITY_SLACK = 1e-12


class DynamicsError(Exception):
    """动力学相关错误的基类"""
    pass


class InvalidParams(DynamicsError):
    """动力学参数不满足约束"""

    def __init__(self, reason: str, invariant: str):
        super().__init__(reason)
        self.reason = reason
        self.invariant = invariant


@dataclass(frozen=True)
class DynamicsParams:
    """
    观点动力学参数 (alpha, beta) 及派生常数

    Z = alpha + beta, B = beta / Z, eta = alpha / (1 - beta)，
    只能通过 validate_params 构造。
    """
    alpha: float
    beta: float
    Z: float = field(init=False)
    B: float = field(init=False)
    eta: float = field(init=False)
    # 不点击时 x0 的权重 alpha / Z
    A: float = field(init=False)
    # 点击时推荐内容的权重 1 - alpha - beta
    gamma: float = field(init=False)

    def __post_init__(self):
        z = self.alpha + self.beta
        object.__setattr__(self, 'Z', z)
        object.__setattr__(self, 'B', self.beta / z)
        object.__setattr__(self, 'A', self.alpha / z)
        object.__setattr__(self, 'eta', self.alpha / (1 - self.beta))
        object.__setattr__(self, 'gamma', 1 - self.alpha - self.beta)

    def to_dict(self) -> Dict[str, Any]:
        return {'alpha': self.alpha, 'beta': self.beta}


def validate_params(alpha: float, beta: float) -> DynamicsParams:
    """
    校验动力学参数并构造 DynamicsParams

    Args:
        alpha: 先天观点的权重
        beta: 上一时刻观点的权重

    Returns:
        带缓存派生常数的参数对象

    Raises:
        InvalidParams: 任一约束不满足时，invariant 字段给出被违反的约束名
    """
    try:
        alpha = float(alpha)
        beta = float(beta)
    except (TypeError, ValueError):
        raise InvalidParams(f"alpha/beta 必须是实数: alpha={alpha!r}, beta={beta!r}", "params_real")

    if not 0.0 <= alpha <= 1.0:
        raise InvalidParams(f"alpha 必须在 [0,1] 内: {alpha}", "alpha_in_unit_interval")
    if not 0.0 <= beta <= 1.0:
        raise InvalidParams(f"beta 必须在 [0,1] 内: {beta}", "beta_in_unit_interval")
    if beta <= 0.0:
        raise InvalidParams(f"beta 必须严格大于 0: {beta}", "beta_positive")
    if not 0.0 < alpha + beta <= 1.0:
        raise InvalidParams(f"alpha+beta 必须在 (0,1] 内: {alpha + beta}", "alpha_plus_beta_in_unit_interval")
    if alpha < beta:
        raise InvalidParams(f"要求 alpha >= beta: alpha={alpha}, beta={beta}", "alpha_ge_beta")

    params = DynamicsParams(alpha, beta)
    logger.debug(f"动力学参数校验通过: alpha={alpha}, beta={beta}, Z={params.Z}, B={params.B}, eta={params.eta}")
    return params


def step(params: DynamicsParams, x0: float, x_prev: float, u_prev: float, clicked: int) -> float:
    """
    观点单步更新

    Args:
        params: 已校验的动力学参数
        x0: 先天观点
        x_prev: 上一时刻观点 x_{k-1}
        u_prev: 上一时刻推荐 u_{k-1}
        clicked: 上一时刻是否点击 (1/0)

    Returns:
        新观点 x_k
    """
    if clicked:
        x = params.alpha * x0 + params.beta * x_prev + params.gamma * u_prev
        assert min(x0, x_prev, u_prev) - CONVEXITY_SLACK <= x <= max(x0, x_prev, u_prev) + CONVEXITY_SLACK, \
            f"点击更新越出凸包: x0={x0}, x_prev={x_prev}, u={u_prev}, x={x}"
    else:
        x = params.A * x0 + params.B * x_prev
        assert min(x0, x_prev) - CONVEXITY_SLACK <= x <= max(x0, x_prev) + CONVEXITY_SLACK, \
            f"未点击更新越出凸包: x0={x0}, x_prev={x_prev}, x={x}"
    return x


def check_unit_interval(value: float, name: str) -> float:
    """校验取值位于 [-1, 1]，返回 float 值"""
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidParams(f"{name} 必须是实数: {value!r}", f"{name}_real")
    if not -1.0 <= value <= 1.0:
        raise InvalidParams(f"{name} 必须在 [-1,1] 内: {value}", f"{name}_in_range")
    return value
