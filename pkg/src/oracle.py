"""
解析预言模块 - 区块边界权重闭式解、极限、极限效用与暴力递推预言

区块 i 边界处的观点写成凸组合 x_{i*s} = Γ_i·x0 + Υ_i·u0（固定推荐平台）。
三种点击策略对应的 Υ 都由同一个区块递推
    Υ_{i+1} = B^s·Z^{T_i}·Υ_i + (1-η)·B^{s-T_i}·(1-β^{T_i})
展开得到；这里实现的是展开后的闭式，递推只出现在暴力预言里。
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

from mpmath import mp, mpf

from .dynamics import DynamicsParams, check_unit_interval, step
from .policies.agent import (
    AgentPolicyKind,
    AgentPolicyState,
    BlockGeometry,
    decide_click,
    end_of_block_update,
    first_zero_block,
    make_agent_policy,
)

logger = logging.getLogger(__name__)

# 暴力预言默认的十进制精度
DEFAULT_ORACLE_DPS = 40
# 判断 T0/κ^j 是否为整数的容差
EXACT_DIVISION_TOL = 1e-9
# 构造 ε₁ 时给漂移容忍度额外加上的余量 ε₂
DEFAULT_EPSILON2 = 1e-3


class OracleError(Exception):
    """解析预言相关错误的基类"""
    pass


class DegenerateDenominator(OracleError):
    """几何级数公比为 1，闭式分母退化"""
    pass


class InexactDivision(OracleError):
    """递减策略的 T0/κ^j 不是整数，闭式不精确，需回退到仿真"""
    pass


class InvalidBoundary(OracleError):
    """m_AD 与参数不一致，或点击步数序列不符合闭式假设"""
    pass


class HypothesisViolated(OracleError):
    """调用不满足闭式前提条件"""
    pass


class Phase(str, Enum):
    TRANSIENT = 'transient'
    STEADY_STATE = 'steady_state'


@dataclass(frozen=True)
class PhaseBoundaries:
    m_D: Optional[int] = None
    m_AD: Optional[int] = None


@dataclass(frozen=True)
class BlockWeight:
    """区块 i 边界处先天观点与推荐的权重 (Γ, Υ)"""
    gamma: float
    upsilon: float
    phase: Phase
    block_index: int
    boundaries: PhaseBoundaries = field(default_factory=PhaseBoundaries)
    exact: bool = True

    def opinion(self, x0: float, u0: float) -> float:
        return self.gamma * x0 + self.upsilon * u0


@dataclass(frozen=True)
class LimitBound:
    """极限值：low == high 时退化为一个点"""
    low: float
    high: float

    @classmethod
    def point(cls, value: float) -> 'LimitBound':
        return cls(value, value)

    @property
    def is_point(self) -> bool:
        return self.low == self.high

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.low - tol <= value <= self.high + tol


def _weight(upsilon: float, phase: Phase, i: int,
            boundaries: Optional[PhaseBoundaries] = None) -> BlockWeight:
    return BlockWeight(
        gamma=1.0 - upsilon,
        upsilon=upsilon,
        phase=phase,
        block_index=i,
        boundaries=boundaries or PhaseBoundaries(),
    )


def _check_block_args(s: int, T0: int, i: int) -> None:
    if isinstance(s, bool) or not isinstance(s, int) or s < 1:
        raise HypothesisViolated(f"区块长度 s 必须是正整数: {s!r}")
    if isinstance(T0, bool) or not isinstance(T0, int) or not 0 <= T0 <= s:
        raise HypothesisViolated(f"T0 必须是 [0, s={s}] 内的整数: {T0!r}")
    if isinstance(i, bool) or not isinstance(i, int) or i < 0:
        raise HypothesisViolated(f"区块序号 i 必须是非负整数: {i!r}")


def block_gain(params: DynamicsParams, s: int, T: int) -> Tuple[float, float]:
    """
    点击 T 步的区块对 Υ 的仿射作用 Υ -> q·Υ + c

    Returns:
        (q, c)，q = B^s·Z^T，c = (1-η)·B^{s-T}·(1-β^T)
    """
    q = params.B ** s * params.Z ** T
    c = (1.0 - params.eta) * params.B ** (s - T) * (1.0 - params.beta ** T)
    return q, c


def _fixed_series(params: DynamicsParams, s: int, T: int, i: int) -> float:
    q, c = block_gain(params, s, T)
    denominator = 1.0 - q
    if denominator == 0.0:
        raise DegenerateDenominator(f"B^s·Z^T = 1 (s={s}, T={T})，几何级数退化")
    return (1.0 - q ** i) / denominator * c


def upsilon_fixed(params: DynamicsParams, s: int, T0: int, i: int) -> BlockWeight:
    """固定策略: Υ_i = (1-(B^s Z^T0)^i)/(1-B^s Z^T0)·(1-η)·B^{s-T0}·(1-β^T0)"""
    _check_block_args(s, T0, i)
    return _weight(_fixed_series(params, s, T0, i), Phase.STEADY_STATE, i)


def decreasing_is_exact(T0: int, kappa: float) -> bool:
    """递减策略闭式的精确性条件: 对 j < m_D，T0/κ^j 均为整数"""
    if kappa <= 1.0 or T0 < 1:
        return True
    T, j = T0, 0
    while T > 0:
        if abs(T - T0 / kappa ** j) > EXACT_DIVISION_TOL:
            return False
        T = math.floor(T / kappa)
        j += 1
    return True


def upsilon_decreasing(params: DynamicsParams, s: int, T0: int, kappa: float, i: int) -> BlockWeight:
    """
    递减策略的区块权重

    过渡阶段 (i <= m_D):
        Υ_i = (1-η)·Z^{-T0·κ^{1-i}/(κ-1)}·Σ_{j<i} B^{(i-1-j)s + s-T_j}·Z^{T_j/(κ-1)}·(1-β^{T_j})，T_j = T0/κ^j
    稳态阶段 (i > m_D):
        Υ_i = B^{(i-m_D)s}·Υ_{m_D}

    κ = 1 时即固定策略。

    Raises:
        InexactDivision: 存在 j < m_D 使 T0/κ^j 不是整数
    """
    _check_block_args(s, T0, i)
    if kappa < 1.0:
        raise HypothesisViolated(f"kappa 必须 >= 1: {kappa}")
    if kappa == 1.0:
        return upsilon_fixed(params, s, T0, i)
    if T0 == 0:
        return _weight(0.0, Phase.STEADY_STATE, i)
    if not decreasing_is_exact(T0, kappa):
        raise InexactDivision(f"T0={T0}, kappa={kappa} 时 T0/κ^j 不全为整数，请改用仿真")

    m_D = first_zero_block(make_agent_policy('decreasing', BlockGeometry(s, 1), T0, kappa=kappa))
    boundaries = PhaseBoundaries(m_D=m_D)

    if i <= m_D:
        return _weight(_decreasing_transient(params, s, T0, kappa, i), Phase.TRANSIENT, i, boundaries)
    upsilon_m = _decreasing_transient(params, s, T0, kappa, m_D)
    return _weight(params.B ** ((i - m_D) * s) * upsilon_m, Phase.STEADY_STATE, i, boundaries)


def _decreasing_transient(params: DynamicsParams, s: int, T0: int, kappa: float, i: int) -> float:
    if i == 0:
        return 0.0
    B, Z, beta = params.B, params.Z, params.beta
    total = 0.0
    for j in range(i):
        T_j = T0 / kappa ** j
        total += B ** ((i - 1 - j) * s + s - T_j) * Z ** (T_j / (kappa - 1.0)) * (1.0 - beta ** T_j)
    return (1.0 - params.eta) * Z ** (-T0 * kappa ** (1 - i) / (kappa - 1.0)) * total


def _adaptive_transient(params: DynamicsParams, s: int, T0: int, tau: int, i: int) -> float:
    # r 为区块 i-1-r 之后剩余的区块数
    if i == 0:
        return 0.0
    B, Z, beta = params.B, params.Z, params.beta
    total = 0.0
    for r in range(i):
        T_j = T0 - (i - 1 - r) * tau
        b_exp = (r + 1) * s - T0 + (i - 1 - r) * tau
        z_exp = r * (T0 - tau * i) + tau * (r * r + r) / 2
        total += B ** b_exp * Z ** z_exp * (1.0 - beta ** T_j)
    return (1.0 - params.eta) * total


def adaptive_steady_count(T0: int, tau: int, m_AD: int) -> Tuple[int, int]:
    """
    自适应策略的稳态锚点与稳态点击步数

    Returns:
        (anchor, T_ss)。未被 0 截断时 anchor = m_AD、T_ss = T0-(m_AD-1)τ；
        截断生效时 T_ss = 0，且从区块 m_AD-1 起点击步数已为 0，anchor = m_AD-1。

    Raises:
        InvalidBoundary: m_AD 与参数不一致
    """
    if isinstance(m_AD, bool) or not isinstance(m_AD, int) or m_AD < 1:
        raise InvalidBoundary(f"m_AD 必须是 >= 1 的整数: {m_AD!r}")
    T_ss = T0 - (m_AD - 1) * tau
    if T_ss >= 0:
        return m_AD, T_ss
    if T0 - (m_AD - 2) * tau < 0:
        raise InvalidBoundary(
            f"m_AD={m_AD} 与 T0={T0}, tau={tau} 不一致: 区块 {m_AD - 2} 的点击步数已为负"
        )
    return m_AD - 1, 0


def upsilon_adaptive(params: DynamicsParams, s: int, T0: int, tau: int, i: int, m_AD: int) -> BlockWeight:
    """
    自适应递减策略的区块权重（m_AD 由外部测得）

    过渡阶段 (i <= m_AD):
        Υ_i = (1-η)·Σ_{r<i} B^{(r+1)s-T0+(i-1-r)τ}·Z^{r(T0-τi)+τ(r²+r)/2}·(1-β^{T0-(i-1-r)τ})
    稳态阶段 (i > m_AD):
        Υ_i = Υ⁽¹⁾_{i-m_AD}(T_ss) + (B^s·Z^{T_ss})^{i-m_AD}·Υ_{m_AD}，T_ss = T0-(m_AD-1)τ

    点击步数被 0 截断时，稳态部分改以截断后的 T_ss = 0 为准。

    Raises:
        InvalidBoundary: m_AD 与参数不一致
    """
    _check_block_args(s, T0, i)
    if isinstance(tau, bool) or not isinstance(tau, int) or tau < 1:
        raise HypothesisViolated(f"tau 必须是 >= 1 的整数: {tau!r}")
    anchor, T_ss = adaptive_steady_count(T0, tau, m_AD)
    boundaries = PhaseBoundaries(m_AD=m_AD)

    if m_AD == 1:
        weight = upsilon_fixed(params, s, T0, i)
        phase = Phase.TRANSIENT if i <= 1 else Phase.STEADY_STATE
        return _weight(weight.upsilon, phase, i, boundaries)

    if i <= anchor:
        return _weight(_adaptive_transient(params, s, T0, tau, i), Phase.TRANSIENT, i, boundaries)

    q, _ = block_gain(params, s, T_ss)
    upsilon_m = _adaptive_transient(params, s, T0, tau, anchor)
    upsilon = _fixed_series(params, s, T_ss, i - anchor) + q ** (i - anchor) * upsilon_m
    return _weight(upsilon, Phase.STEADY_STATE, i, boundaries)


def measure_adaptive_boundary(params: DynamicsParams, s: int, T0: int, tau: int, x_drift: float,
                              x0: float, u0: float, n: int) -> Tuple[int, List[int]]:
    """
    在固定推荐平台下仿真 n 个区块，测得 m_AD 与点击步数序列

    m_AD 取点击步数此后不再变化的首个区块序号加一，使 T0-(m_AD-1)τ 为稳态点击步数。

    Returns:
        (m_AD, [T_0, ..., T_n])

    Raises:
        InvalidBoundary: 点击步数序列不是“每块递减 τ（0 截断）后保持不变”的形式
    """
    policy = make_agent_policy('adaptive_decreasing', BlockGeometry(s, n), T0, tau=tau, x_drift=x_drift)
    x0 = check_unit_interval(x0, 'x0')
    u0 = check_unit_interval(u0, 'u0')

    schedule = [policy.current_T]
    state, x = policy, x0
    for _ in range(n):
        for j in range(s):
            x = step(params, x0, x, u0, decide_click(state, j))
        state = end_of_block_update(state, x, x0)
        schedule.append(state.current_T)

    settle = len(schedule) - 1
    while settle > 0 and schedule[settle - 1] == schedule[-1]:
        settle -= 1
    for j in range(settle):
        if schedule[j + 1] != max(0, schedule[j] - tau):
            raise InvalidBoundary(f"点击步数序列不规则（暂停后再次触发）: {schedule}")

    m_AD = settle + 1
    logger.debug(f"测得 m_AD={m_AD}, 点击步数序列 {schedule}")
    return m_AD, schedule


def steady_limit_weight(params: DynamicsParams, s: int, T: int) -> float:
    """每块点击 T 步时 Υ 的极限 (1-η)·B^{s-T}·(1-β^T)/(1-B^s·Z^T)"""
    q, c = block_gain(params, s, T)
    if q == 1.0:
        raise DegenerateDenominator(f"B^s·Z^T = 1 (s={s}, T={T})，极限不存在")
    return c / (1.0 - q)


def limit_opinion(policy_kind: str, params: DynamicsParams, x0: float, u0: float,
                  x_drift: Optional[float] = None) -> LimitBound:
    """
    T0 = s 时各策略的无限视界观点极限

    固定: η·x0 + (1-η)·u0；递减: x0；
    自适应: 位于 x0 与 x0 ± x_drift 之间（朝 u0 一侧，截断在 [-1,1]）。
    """
    kind = AgentPolicyKind(policy_kind)
    if kind == AgentPolicyKind.FIXED:
        return LimitBound.point(params.eta * x0 + (1.0 - params.eta) * u0)
    if kind == AgentPolicyKind.DECREASING:
        return LimitBound.point(x0)
    if x_drift is None:
        raise HypothesisViolated("自适应策略的极限需要 x_drift")
    if x0 == u0:
        return LimitBound.point(x0)
    if x0 < u0:
        return LimitBound(x0, min(1.0, x0 + x_drift))
    return LimitBound(max(-1.0, x0 - x_drift), x0)


def limit_agent_utility(policy_kind: str, params: DynamicsParams, x0: float, u0: float, lam: float,
                        tau: Optional[int] = None, x_drift: Optional[float] = None) -> LimitBound:
    """
    R^A ≡ 1、T0 = s 时的极限智能体效用

    固定: λ - (1-λ)(1-η)|u0-x0|；递减: 0；自适应: 区间 [0, λ]。
    """
    kind = AgentPolicyKind(policy_kind)
    if kind == AgentPolicyKind.FIXED:
        return LimitBound.point(lam - (1.0 - lam) * (1.0 - params.eta) * abs(u0 - x0))
    if kind == AgentPolicyKind.DECREASING:
        return LimitBound.point(0.0)
    return LimitBound(0.0, lam)


def epsilon1(params: DynamicsParams, s: int) -> float:
    """ε₁ = B(1-β^{s-1})/(1-B·β^{s-1})"""
    beta_pow = params.beta ** (s - 1)
    return params.B * (1.0 - beta_pow) / (1.0 - params.B * beta_pow)


def adaptive_beats_fixed_threshold(params: DynamicsParams, s: int, lam: float,
                                   x0: float, u0: float) -> Tuple[float, bool]:
    """
    ε₁ 阈值与“自适应策略严格优于固定策略”的判定

    条件成立时，每块跳过一次点击的自适应构造取得
    λ - λ/s - (1-λ)(1-η)|u0-x0|·ε₁，严格大于固定策略的极限效用。

    Returns:
        (ε₁, 条件是否成立)

    Raises:
        HypothesisViolated: λ >= 1、x0 = u0 或固定策略极限效用 < 0
    """
    if lam >= 1.0:
        raise HypothesisViolated(f"要求 lambda < 1: {lam}")
    if x0 == u0:
        raise HypothesisViolated("要求 x0 != u0")
    fixed_limit = limit_agent_utility('fixed', params, x0, u0, lam).low
    if fixed_limit < 0.0:
        raise HypothesisViolated(f"固定策略极限效用为负 ({fixed_limit:.6g})，前提不成立")

    eps1 = epsilon1(params, s)
    rhs = 1.0 - (lam / s) / ((1.0 - lam) * (1.0 - params.eta) * abs(u0 - x0))
    return eps1, eps1 < rhs


def skip_one_click_drift_tolerance(params: DynamicsParams, s: int, x0: float, u0: float,
                                   epsilon2: float = DEFAULT_EPSILON2) -> float:
    """τ = 1、T0 = s 时使自适应策略稳定在每块 s-1 次点击的漂移容忍度"""
    return (1.0 - params.eta) * abs(u0 - x0) * epsilon1(params, s) + epsilon2


def skip_one_click_limit_utility(params: DynamicsParams, s: int, lam: float, x0: float, u0: float) -> float:
    """每块跳过一次点击的极限效用 λ - λ/s - (1-λ)(1-η)|u0-x0|·ε₁"""
    return lam - lam / s - (1.0 - lam) * (1.0 - params.eta) * abs(u0 - x0) * epsilon1(params, s)


def fixed_imitation_drift_tolerance(params: DynamicsParams, x0: float, u0: float,
                                    epsilon2: float = DEFAULT_EPSILON2) -> float:
    """漂移容忍度大于固定策略的极限漂移时，自适应策略从不触发，效用与固定策略相同"""
    return (1.0 - params.eta) * abs(u0 - x0) + epsilon2


def adaptive_limit_utility(params: DynamicsParams, s: int, T_ss: int, lam: float,
                           x0: float, u0: float) -> float:
    """R^A ≡ 1 时，稳态每块点击 T_ss 次的自适应策略极限效用"""
    drift = abs(u0 - x0) * steady_limit_weight(params, s, T_ss)
    return lam * T_ss / s - (1.0 - lam) * drift


def brute_force_block_opinions(params: DynamicsParams, policy_state: AgentPolicyState, platform_u0: float,
                               x0: float, blocks: int,
                               precision: Optional[int] = DEFAULT_ORACLE_DPS) -> List[float]:
    """
    逐步递推得到 [x_0, x_s, ..., x_{blocks*s}]，不使用任何闭式

    precision 为十进制有效位数；为 None 时使用与仿真引擎相同的双精度 step，结果逐位一致。
    """
    s = policy_state.geometry.s
    state = policy_state
    if precision is None:
        x = x0
        out = [x]
        for _ in range(blocks):
            for j in range(s):
                x = step(params, x0, x, platform_u0, decide_click(state, j))
            state = end_of_block_update(state, x, x0)
            out.append(x)
        return out

    with mp.workdps(precision):
        alpha, beta = mpf(params.alpha), mpf(params.beta)
        gamma = 1 - alpha - beta
        weight_x0 = alpha / (alpha + beta)
        weight_prev = beta / (alpha + beta)
        m_x0, m_u0 = mpf(x0), mpf(platform_u0)
        x = m_x0
        out = [x0]
        for _ in range(blocks):
            for j in range(s):
                if decide_click(state, j):
                    x = alpha * m_x0 + beta * x + gamma * m_u0
                else:
                    x = weight_x0 * m_x0 + weight_prev * x
            state = end_of_block_update(state, float(x), x0)
            out.append(float(x))
    return out


def brute_force_block_opinion(params: DynamicsParams, policy_state: AgentPolicyState, platform_u0: float,
                              x0: float, i: int, precision: Optional[int] = DEFAULT_ORACLE_DPS) -> float:
    """区块边界观点 x_{i*s} 的暴力递推预言"""
    return brute_force_block_opinions(params, policy_state, platform_u0, x0, i, precision)[-1]
