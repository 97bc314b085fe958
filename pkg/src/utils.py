"""
工具函数模块 - 产物写出（CSV / JSON）、配置摘要与批量任务分发
"""

import asyncio
import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Dict, Iterable, List, Sequence

import pandas as pd

logger = logging.getLogger(__name__)

# 17 位有效数字保证浮点数可以逐位还原
FLOAT_FORMAT = "%.17g"

TRACE_COLUMNS = ['k', 'x', 'u', 'clk', 'agent_reward', 'platform_reward']
BLOCK_COLUMNS = ['i', 'x_block', 'T_i']
UTILITY_COLUMNS = ['k', 'agent_utility', 'platform_payoff']
HISTOGRAM_COLUMNS = ['bin_left', 'bin_right', 'count']


def canonical_json(data: Any) -> str:
    """键排序、缩进 2 的 JSON 文本（以换行结尾），同一数据总是得到同一字节序列"""
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def config_digest(data: Dict[str, Any]) -> str:
    """规范化配置的 sha256 摘要"""
    return hashlib.sha256(canonical_json(data).encode('utf-8')).hexdigest()


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def write_json(data: Any, path: str) -> str:
    ensure_dir(os.path.dirname(path) or '.')
    with open(path, 'w', encoding='utf-8', newline='\n') as file:
        file.write(canonical_json(data))
    logger.debug(f"已写出 {path}")
    return path


def write_table(rows: Iterable[Sequence[Any]], columns: List[str], path: str) -> str:
    """
    把若干行写成 CSV

    Args:
        rows: 行序列（元组或字典）
        columns: 列名及顺序
        path: 输出路径
    """
    ensure_dir(os.path.dirname(path) or '.')
    frame = pd.DataFrame(list(rows), columns=columns)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    logger.debug(f"已写出 {path} ({len(frame)} 行)")
    return path


def write_trace(trace, directory: str) -> List[str]:
    """写出单条轨迹的 trace.csv 与 blocks.csv"""
    return [
        write_table(trace.steps(), TRACE_COLUMNS, os.path.join(directory, 'trace.csv')),
        write_table(trace.block_boundaries, BLOCK_COLUMNS, os.path.join(directory, 'blocks.csv')),
    ]


def write_histogram(hist, path: str) -> str:
    return write_table(hist.rows(), HISTOGRAM_COLUMNS, path)


async def fan_out(fn: Callable, arg_sets: List[tuple], jobs: int = 1) -> List[Any]:
    """
    并发执行相互独立的批量任务，结果顺序与 arg_sets 一致

    jobs = 1 时在当前进程内顺序执行；否则通过 run_in_executor 交给进程池，
    fn 与参数必须可以被 pickle。
    """
    if jobs <= 1 or len(arg_sets) <= 1:
        return [fn(*args) for args in arg_sets]
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        futures = [loop.run_in_executor(executor, fn, *args) for args in arg_sets]
        return list(await asyncio.gather(*futures))
