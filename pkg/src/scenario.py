"""
场景模块 - 一次运行所需的全部已校验输入
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

from .dynamics import DynamicsParams
from .payoffs import RewardFn, agent_utility, final_drift, platform_payoff
from .policies.agent import AgentPolicyState, BlockGeometry
from .simulation import OpinionTrace, run

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScenarioConfig:
    """
    已解析并校验的场景

    platform 保留配置字典形式，每条仿真都按 seed 重新构造独立的平台状态。
    """
    name: str
    params: DynamicsParams
    geometry: BlockGeometry
    agent_policies: Tuple[AgentPolicyState, ...]
    platform: Dict[str, Any]
    rewards: Tuple[RewardFn, RewardFn]
    lam: float
    x0: float
    seed: int

    def to_dict(self) -> Dict[str, Any]:
        """导出为可重新解析的配置字典（不含 output / logging / database）"""
        return {
            'scenario': {'name': self.name},
            'dynamics': self.params.to_dict(),
            'geometry': self.geometry.to_dict(),
            'agent_policies': [policy.to_dict() for policy in self.agent_policies],
            'platform': dict(self.platform),
            'rewards': {'agent': self.rewards[0].to_dict(), 'platform': self.rewards[1].to_dict()},
            'lambda': self.lam,
            'x0': self.x0,
            'seed': self.seed,
        }


def run_policy(scenario: ScenarioConfig, policy: AgentPolicyState) -> OpinionTrace:
    """按场景对单个点击策略执行一次仿真"""
    return run(scenario.params, policy, scenario.platform, scenario.rewards,
               scenario.x0, scenario.geometry, scenario.seed)


def run_all_policies(scenario: ScenarioConfig) -> List[Tuple[AgentPolicyState, OpinionTrace]]:
    """依次运行场景中的全部点击策略（单次运行本身是顺序的）"""
    results = []
    for policy in scenario.agent_policies:
        trace = run_policy(scenario, policy)
        logger.debug(f"策略 {policy.label} 运行完成: 终端观点 {trace.final_opinion:.6g}")
        results.append((policy, trace))
    return results


def summarize(scenario: ScenarioConfig, policy: AgentPolicyState, trace: OpinionTrace) -> Dict[str, Any]:
    """终端时刻的测量值"""
    return {
        'policy': policy.label,
        'final_opinion': trace.final_opinion,
        'final_drift': final_drift(trace),
        'agent_utility': agent_utility(trace, scenario.rewards[0], scenario.lam),
        'platform_payoff': platform_payoff(trace, scenario.rewards[1]),
        'clicks': sum(trace.clk),
    }
