"""
仿真引擎模块 - 驱动一次完整的平台-智能体反馈回路并记录轨迹

单步顺序: 平台推荐 -> 智能体决定是否点击 -> 在 (x_k, u_k) 上计算奖励
-> 观点更新得到 x_{k+1} -> 平台观测结果。区块最后一步之后，智能体读取
x_{(i+1)s} 更新下一区块的点击步数。
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple, Union

from .dynamics import DynamicsParams, check_unit_interval, step, validate_params
from .payoffs import RewardFn, reward_from_dict
from .policies.agent import (
    AgentPolicyState,
    BlockGeometry,
    InvalidPolicy,
    decide_click,
    end_of_block_update,
    make_agent_policy,
)
from .policies.platform import PlatformPolicyState, make_platform_policy

logger = logging.getLogger(__name__)


class SimulationError(Exception):
    """仿真相关错误的基类"""
    pass


class CorruptTrace(SimulationError):
    """轨迹结构损坏或元数据无法重建仿真输入"""
    pass


@dataclass(frozen=True)
class OpinionTrace:
    """
    一次运行的完整历史（按列存储）

    x 含 K+1 个元素（x_0 .. x_K），u / clk / 奖励各 K 个；
    block_boundaries 为每个完成区块一条 (i, x_{i*s}, T_i)，i = 1..n。
    """
    x0: float
    x: Tuple[float, ...]
    u: Tuple[float, ...]
    clk: Tuple[int, ...]
    agent_reward: Tuple[float, ...]
    platform_reward: Tuple[float, ...]
    block_boundaries: Tuple[Tuple[int, float, int], ...]
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def K(self) -> int:
        return len(self.u)

    @property
    def final_opinion(self) -> float:
        return self.x[-1]

    @property
    def clicking_counts(self) -> Tuple[int, ...]:
        """各区块实际使用的点击步数 T_0 .. T_{n-1}"""
        t0 = self.metadata['agent_policy']['T0']
        return (t0,) + tuple(T for _, _, T in self.block_boundaries[:-1])

    def block_opinion(self, i: int) -> float:
        """区块边界观点 x_{i*s}"""
        s = self.metadata['geometry']['s']
        return self.x[i * s]

    def steps(self):
        """逐步记录 (k, x_k, u_k, clk_k, agent_reward_k, platform_reward_k)"""
        for k in range(self.K):
            yield (k, self.x[k], self.u[k], self.clk[k], self.agent_reward[k], self.platform_reward[k])


def run(params: DynamicsParams,
        agent_policy: AgentPolicyState,
        platform_policy: Union[PlatformPolicyState, Dict[str, Any]],
        reward_fns: Tuple[RewardFn, RewardFn],
        x0: float,
        geometry: Optional[BlockGeometry] = None,
        seed: int = 0) -> OpinionTrace:
    """
    执行一次 K = n*s 步的反馈回路仿真

    Args:
        params: 已校验的动力学参数
        agent_policy: 区块 0 的智能体策略状态
        platform_policy: 平台策略配置字典（按 seed 构造），或已按同一 seed 构造的新实例
        reward_fns: (R^A, R^P)
        x0: 先天观点
        geometry: 区块几何，缺省时取策略自带的几何
        seed: 随机种子，写入元数据供回放使用

    Returns:
        完整的观点轨迹
    """
    geometry = geometry or agent_policy.geometry
    if geometry != agent_policy.geometry:
        raise InvalidPolicy(f"区块几何与策略不一致: {geometry} != {agent_policy.geometry}", "geometry_mismatch")
    if agent_policy.current_block != 0:
        raise InvalidPolicy(f"策略状态必须从区块 0 开始: {agent_policy.current_block}", "policy_fresh")
    x0 = check_unit_interval(x0, 'x0')

    if isinstance(platform_policy, dict):
        platform = make_platform_policy(platform_policy, seed)
    else:
        platform = platform_policy
    agent_r, platform_r = reward_fns

    metadata = {
        'seed': seed,
        'dynamics': params.to_dict(),
        'geometry': geometry.to_dict(),
        'agent_policy': agent_policy.to_dict(),
        'platform': platform.to_dict(),
        'rewards': {'agent': agent_r.to_dict(), 'platform': platform_r.to_dict()},
        'x0': x0,
    }

    s, n = geometry.s, geometry.n
    xs = [x0]
    us, clks, ras, rps = [], [], [], []
    boundaries = []
    state = agent_policy
    x = x0

    for i in range(n):
        for j in range(s):
            k = i * s + j
            u = platform.recommend(k)
            c = decide_click(state, j)
            if c:
                d = abs(x - u)
                ra = agent_r.at(d)
                rp = platform_r.at(d)
            else:
                ra = rp = 0.0
            x_next = step(params, x0, x, u, c)
            platform.observe_outcome(k, u, c, rp)

            us.append(u)
            clks.append(c)
            ras.append(ra)
            rps.append(rp)
            xs.append(x_next)
            x = x_next

        state = end_of_block_update(state, x, x0)
        boundaries.append((i + 1, x, state.current_T))

    logger.debug(
        f"仿真完成: 策略={agent_policy.label}, K={geometry.K}, 点击={sum(clks)}, "
        f"终端观点={x:.6g}"
    )
    return OpinionTrace(
        x0=x0,
        x=tuple(xs),
        u=tuple(us),
        clk=tuple(clks),
        agent_reward=tuple(ras),
        platform_reward=tuple(rps),
        block_boundaries=tuple(boundaries),
        metadata=metadata,
    )


def inputs_from_metadata(metadata: Dict[str, Any]):
    """
    从轨迹元数据重建仿真输入

    Returns:
        (params, agent_policy, platform_spec, reward_fns, x0, seed)

    Raises:
        CorruptTrace: 元数据缺失字段或取值不合法时
    """
    try:
        params = validate_params(metadata['dynamics']['alpha'], metadata['dynamics']['beta'])
        geometry = BlockGeometry(metadata['geometry']['s'], metadata['geometry']['n'])
        policy_spec = dict(metadata['agent_policy'])
        agent_policy = make_agent_policy(geometry=geometry, **policy_spec)
        reward_fns = (reward_from_dict(metadata['rewards']['agent']),
                      reward_from_dict(metadata['rewards']['platform']))
        return params, agent_policy, metadata['platform'], reward_fns, metadata['x0'], metadata['seed']
    except (KeyError, TypeError) as e:
        raise CorruptTrace(f"轨迹元数据不完整: {e}")
    except (InvalidPolicy, ValueError) as e:
        raise CorruptTrace(f"轨迹元数据无法重建仿真输入: {e}")


def find_replay_mismatch(trace: OpinionTrace, seed: Optional[int] = None) -> Optional[int]:
    """
    按元数据重新执行递推，返回第一条不一致的步序号 k；完全一致时返回 None

    末态 x_K 不一致时返回 K。seed 不为 None 时覆盖元数据中的种子。
    """
    lengths = {len(trace.u), len(trace.clk), len(trace.agent_reward), len(trace.platform_reward)}
    if len(lengths) != 1 or len(trace.x) != trace.K + 1:
        raise CorruptTrace(f"轨迹各列长度不一致: x={len(trace.x)}, 其余={sorted(lengths)}")

    params, agent_policy, platform_spec, reward_fns, x0, meta_seed = inputs_from_metadata(trace.metadata)
    if agent_policy.geometry.K != trace.K:
        raise CorruptTrace(f"轨迹长度 {trace.K} 与元数据中的 K={agent_policy.geometry.K} 不一致")

    replay = run(params, agent_policy, platform_spec, reward_fns, x0,
                 seed=meta_seed if seed is None else seed)
    for record, expected in zip(trace.steps(), replay.steps()):
        if record != expected:
            logger.warning(f"回放在 k={record[0]} 处不一致: 记录={record}, 重算={expected}")
            return record[0]
    if trace.x[-1] != replay.x[-1]:
        return trace.K
    return None


def replay_check(trace: OpinionTrace, seed: Optional[int] = None) -> bool:
    """回放校验: 逐位一致时返回 True"""
    return find_replay_mismatch(trace, seed) is None
