"""
智能体点击策略模块 - 固定 / 递减 / 自适应递减三种分块点击策略

每个区块长度为 s，智能体在区块 i 的前 T_i 步点击推荐内容，其余步不点击。
策略状态是不可变值，区块结束时由 end_of_block_update 产生新状态。
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)


class PolicyError(Exception):
    """策略相关错误的基类"""
    pass


class InvalidPolicy(PolicyError):
    """策略参数不合法"""

    def __init__(self, reason: str, invariant: str):
        super().__init__(reason)
        self.reason = reason
        self.invariant = invariant


class NotApplicable(PolicyError):
    """操作不适用于当前策略类型或参数"""
    pass


class AgentPolicyKind(str, Enum):
    FIXED = 'fixed'
    DECREASING = 'decreasing'
    ADAPTIVE_DECREASING = 'adaptive_decreasing'


@dataclass(frozen=True)
class BlockGeometry:
    """区块几何: 每块 s 步，共 n 块，总步数 K = n * s"""
    s: int
    n: int

    def __post_init__(self):
        if isinstance(self.s, bool) or not isinstance(self.s, int) or self.s < 1:
            raise InvalidPolicy(f"区块长度 s 必须是正整数: {self.s!r}", "block_length_positive")
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise InvalidPolicy(f"区块数 n 必须是正整数: {self.n!r}", "block_count_positive")

    @property
    def K(self) -> int:
        return self.n * self.s

    def to_dict(self) -> Dict[str, Any]:
        return {'s': self.s, 'n': self.n}


@dataclass(frozen=True)
class AgentPolicyState:
    """
    点击策略状态

    kappa 仅用于递减策略，tau / x_drift 仅用于自适应递减策略。
    current_block 为当前区块序号 i，current_T 为本区块的点击步数 T_i。
    """
    kind: AgentPolicyKind
    geometry: BlockGeometry
    T0: int
    kappa: Optional[float] = None
    tau: Optional[int] = None
    x_drift: Optional[float] = None
    current_block: int = 0
    current_T: int = 0
    name: Optional[str] = None

    @property
    def label(self) -> str:
        return self.name or self.kind.value

    def to_dict(self) -> Dict[str, Any]:
        """导出为配置字典（只包含该策略用到的字段）"""
        data: Dict[str, Any] = {'kind': self.kind.value, 'T0': self.T0}
        if self.kind == AgentPolicyKind.DECREASING:
            data['kappa'] = self.kappa
        if self.kind == AgentPolicyKind.ADAPTIVE_DECREASING:
            data['tau'] = self.tau
            data['x_drift'] = self.x_drift
        if self.name:
            data['name'] = self.name
        return data


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def make_agent_policy(kind: str,
                      geometry: BlockGeometry,
                      T0: int,
                      kappa: Optional[float] = None,
                      tau: Optional[int] = None,
                      x_drift: Optional[float] = None,
                      name: Optional[str] = None) -> AgentPolicyState:
    """
    构造并校验初始策略状态（区块 0）

    Args:
        kind: fixed / decreasing / adaptive_decreasing
        geometry: 区块几何
        T0: 初始点击步数，0 <= T0 <= s
        kappa: 递减因子 (>= 1)，仅递减策略
        tau: 递减步数 (>= 1)，仅自适应递减策略
        x_drift: 漂移容忍度 (> 0)，仅自适应递减策略
        name: 可选的显示名称

    Returns:
        区块 0 的策略状态

    Raises:
        InvalidPolicy: 参数不合法时
    """
    try:
        kind_enum = AgentPolicyKind(kind)
    except ValueError:
        raise InvalidPolicy(f"未知的点击策略类型: {kind!r}", "agent_policy_kind")

    if not _is_int(T0) or not 0 <= T0 <= geometry.s:
        raise InvalidPolicy(f"T0 必须是 [0, s={geometry.s}] 内的整数: {T0!r}", "T0_in_block")

    if kind_enum == AgentPolicyKind.DECREASING:
        if kappa is None or isinstance(kappa, bool):
            raise InvalidPolicy("递减策略需要 kappa", "kappa_required")
        kappa = float(kappa)
        if kappa < 1.0:
            raise InvalidPolicy(f"kappa 必须 >= 1: {kappa}", "kappa_ge_one")
        tau, x_drift = None, None
    elif kind_enum == AgentPolicyKind.ADAPTIVE_DECREASING:
        if not _is_int(tau) or tau < 1:
            raise InvalidPolicy(f"tau 必须是 >= 1 的整数: {tau!r}", "tau_ge_one")
        if x_drift is None or isinstance(x_drift, bool):
            raise InvalidPolicy("自适应递减策略需要 x_drift", "x_drift_required")
        x_drift = float(x_drift)
        if x_drift <= 0.0:
            raise InvalidPolicy(f"x_drift 必须 > 0: {x_drift}", "x_drift_positive")
        kappa = None
    else:
        kappa, tau, x_drift = None, None, None

    return AgentPolicyState(
        kind=kind_enum,
        geometry=geometry,
        T0=T0,
        kappa=kappa,
        tau=tau,
        x_drift=x_drift,
        current_block=0,
        current_T=T0,
        name=name,
    )


def decide_click(state: AgentPolicyState, step_in_block: int) -> int:
    """区块内第 step_in_block 步是否点击：当且仅当 step_in_block < T_i"""
    return 1 if step_in_block < state.current_T else 0


def end_of_block_update(state: AgentPolicyState, x_block_end: float, x0: float) -> AgentPolicyState:
    """
    区块结束时更新点击步数

    Args:
        state: 刚结束区块的策略状态
        x_block_end: 时刻 (i+1)*s 的观点
        x0: 先天观点

    Returns:
        下一区块的策略状态
    """
    next_T = state.current_T
    if state.kind == AgentPolicyKind.DECREASING:
        next_T = max(0, math.floor(state.current_T / state.kappa))
    elif state.kind == AgentPolicyKind.ADAPTIVE_DECREASING:
        drift = abs(x_block_end - x0)
        if drift >= state.x_drift:
            next_T = max(0, state.current_T - state.tau)
            logger.debug(
                f"区块 {state.current_block} 结束漂移 {drift:.6g} >= x_drift={state.x_drift}，"
                f"点击步数 {state.current_T} -> {next_T}"
            )

    return replace(state, current_block=state.current_block + 1, current_T=next_T)


def first_zero_block(state: AgentPolicyState) -> int:
    """
    递减策略下点击步数首次为 0 的区块序号 m_D（不做仿真，反复整除）

    Raises:
        NotApplicable: 非递减策略，或 kappa = 1，或 T0 < 1
    """
    if state.kind != AgentPolicyKind.DECREASING:
        raise NotApplicable(f"m_D 只对递减策略有定义，当前为 {state.kind.value}")
    if state.kappa <= 1.0:
        raise NotApplicable("kappa = 1 时点击步数不递减，m_D 不存在")
    if state.T0 < 1:
        raise NotApplicable("T0 = 0 时不存在递减过程")

    T, block = state.T0, 0
    while T > 0:
        T = math.floor(T / state.kappa)
        block += 1
    return block


def clicking_schedule(state: AgentPolicyState, blocks: int) -> List[int]:
    """
    开环下各区块的点击步数 [T_0, ..., T_{blocks-1}]

    自适应递减策略的点击步数依赖观点轨迹，不能开环计算。
    """
    if state.kind == AgentPolicyKind.ADAPTIVE_DECREASING:
        raise NotApplicable("自适应递减策略的点击步数由观点漂移决定，需通过仿真获得")
    schedule = []
    current = state
    for _ in range(blocks):
        schedule.append(current.current_T)
        current = end_of_block_update(current, 0.0, 0.0)
    return schedule
