import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

# 导入项目模块时，使用相对导入
from .. import utils
from ..config import Config
from ..history import DatabaseError, RunLedger
from ..population import SWEEP_COLUMNS, run_population, run_sweep
from ..scenario import run_all_policies, summarize
from ..payoffs import utility_series
from ..verification import SUITES, run_suites

# 设置日志记录器
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO_ERROR = 2
EXIT_VERIFY_FAILED = 3
EXIT_INTERNAL_ERROR = 4

SUMMARY_COLUMNS = ['policy', 'final_opinion', 'final_drift', 'agent_utility', 'platform_payoff', 'clicks']
DISTANCE_COLUMNS = ['policy', 'w_final_innate', 'w_final_recommendation']


@dataclass
class CommandContext:
    """一次命令调用共享的依赖项（相当于 bot_data）"""
    command: str
    config: Optional[Config]
    ledger: Optional[RunLedger]
    output_dir: str
    jobs: int = 1
    suites: List[str] = field(default_factory=list)
    page: int = 1
    command_filter: Optional[str] = None
    clear: bool = False


@dataclass
class CommandOutcome:
    """命令执行结果，写入运行记录"""
    exit_code: int
    status: str
    files: List[str] = field(default_factory=list)
    extra: Dict[str, Any] = field(default_factory=dict)


def _metadata_path(context: CommandContext) -> str:
    return os.path.join(context.output_dir, 'metadata.json')


async def cmd_run(context: CommandContext) -> CommandOutcome:
    """处理 run 命令：每个点击策略一条轨迹，外加汇总表与元数据"""
    config = context.config
    scenario = config.scenario
    files = []
    summary_rows = []

    for policy, trace in run_all_policies(scenario):
        policy_dir = os.path.join(context.output_dir, policy.label)
        files.extend(utils.write_trace(trace, policy_dir))
        series = utility_series(trace, scenario.rewards[0], scenario.rewards[1], scenario.lam)
        files.append(utils.write_table(series, utils.UTILITY_COLUMNS, os.path.join(policy_dir, 'utility_series.csv')))
        summary_rows.append(summarize(scenario, policy, trace))
        logger.info(f"策略 {policy.label}: 终端观点 {trace.final_opinion:.6g}, 共 {trace.K} 步")

    files.append(utils.write_table(summary_rows, SUMMARY_COLUMNS, os.path.join(context.output_dir, 'summary.csv')))
    files.append(utils.write_json(config.to_dict(), _metadata_path(context)))
    logger.info(f"run 完成，产物写入 {context.output_dir}")
    return CommandOutcome(EXIT_OK, 'ok', files, {'policies': [row['policy'] for row in summary_rows]})


async def cmd_population(context: CommandContext) -> CommandOutcome:
    """处理 population 命令：直方图、逐智能体终端观点与分布距离"""
    config = context.config
    result = await run_population(config.population, context.jobs)
    files = []

    for name, hist in result.histograms.items():
        files.append(utils.write_histogram(hist, os.path.join(context.output_dir, f'histogram_{name}.csv')))

    labels = list(result.final)
    agent_rows = [
        [idx, result.x0[idx], result.u0[idx]] + [result.final[label][idx] for label in labels]
        for idx in range(len(result.x0))
    ]
    agent_columns = ['agent', 'x0', 'u0'] + [f'final_{label}' for label in labels]
    files.append(utils.write_table(agent_rows, agent_columns, os.path.join(context.output_dir, 'agents.csv')))

    distances = result.distances()
    files.append(utils.write_table(distances, DISTANCE_COLUMNS, os.path.join(context.output_dir, 'distances.csv')))
    files.append(utils.write_json(config.to_dict(), _metadata_path(context)))
    for row in distances:
        logger.info(f"策略 {row['policy']}: W(终端, 先天)={row['w_final_innate']:.4g}, "
                    f"W(终端, 推荐)={row['w_final_recommendation']:.4g}")
    return CommandOutcome(EXIT_OK, 'ok', files, {'agents': config.population.count})


async def cmd_sweep(context: CommandContext) -> CommandOutcome:
    """处理 sweep 命令：每个 (取值, 策略) 一行"""
    config = context.config
    rows = await run_sweep(config.sweep, context.jobs)
    files = [
        utils.write_table(rows, SWEEP_COLUMNS, os.path.join(context.output_dir, 'sweep.csv')),
        utils.write_json(config.to_dict(), _metadata_path(context)),
    ]
    return CommandOutcome(EXIT_OK, 'ok', files,
                          {'parameter': config.sweep.parameter, 'cells': len(config.sweep.values)})


async def cmd_verify(context: CommandContext) -> CommandOutcome:
    """处理 verify 命令：运行性质套件，任一性质不成立时退出码为 3"""
    suites = context.suites or list(SUITES)
    report = await run_suites(suites, context.jobs)
    path = utils.write_json(report, os.path.join(context.output_dir, 'report.json'))

    failed = [row for row in report['rows'] if not row['pass']]
    xfail = [row for row in report['rows'] if row['status'] == 'xfail']
    logger.info(f"验证完成: {len(report['rows'])} 条性质, {len(failed)} 条不成立, {len(xfail)} 条预期不成立")
    if failed:
        return CommandOutcome(EXIT_VERIFY_FAILED, 'failed', [path],
                              {'suites': suites, 'failed': [f"{r['suite']}/{r['property']}" for r in failed]})
    return CommandOutcome(EXIT_OK, 'ok', [path], {'suites': suites})


def format_run_rows(runs: List[Dict[str, Any]]) -> List[str]:
    """把运行记录格式化为纯文本行"""
    lines = []
    for item in runs:
        scenario = item['scenario'] or '-'
        seed = '-' if item['seed'] is None else item['seed']
        lines.append(f"#{item['id']:<5} {item['datetime']}  {item['command']:<10} {item['status']:<8} "
                     f"exit={item['exit_code']}  {scenario}  seed={seed}  {item['output_dir'] or ''}".rstrip())
    return lines


async def cmd_history(context: CommandContext) -> CommandOutcome:
    """处理 history 命令：分页列出最近的运行记录，或清空记录"""
    ledger = context.ledger
    if ledger is None:
        raise DatabaseError("运行记录数据库不可用")

    if context.clear:
        deleted = await ledger.clear_history()
        print(f"已清空 {deleted} 条运行记录")
        return CommandOutcome(EXIT_OK, 'ok', extra={'deleted': deleted})

    runs, total = await ledger.get_runs(page=context.page, command=context.command_filter)
    if not runs:
        print("暂无运行记录")
    for line in format_run_rows(runs):
        print(line)
    if total:
        print(f"第 {context.page} 页，共 {total} 条记录")
    return CommandOutcome(EXIT_OK, 'ok', extra={'total': total})
