"""
Opinion Lab 命令行入口

子命令: run | population | sweep | verify | history
退出码: 0 成功, 1 配置校验失败, 2 读写失败, 3 验证性质不成立, 4 内部错误
"""

import argparse
import asyncio
import logging
import logging.handlers
import os
import sys
from typing import Any, Dict, List, Optional

from src.app import ExperimentApplication
from src.verification import SUITES

# 配置日志记录器
logger = logging.getLogger()  # 获取根 logger

DEFAULT_LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(log_config: Optional[Dict[str, Any]] = None) -> None:
    """根据配置设置日志记录，可重复调用（只替换本程序添加的 handler）"""
    log_config = log_config or {}
    log_level_str = str(log_config.get("level", "INFO")).upper()
    log_level = getattr(logging, log_level_str, logging.INFO)
    formatter = logging.Formatter(log_config.get("format", DEFAULT_LOG_FORMAT))

    for handler in list(logger.handlers):
        if getattr(handler, "_opinion_lab", False):
            logger.removeHandler(handler)
            handler.close()

    # 配置根 logger
    logger.setLevel(log_level)

    # 配置控制台输出，stderr 只留给错误文档
    stream_handler = logging.StreamHandler(sys.stdout)
    stream_handler.setFormatter(formatter)
    stream_handler._opinion_lab = True
    logger.addHandler(stream_handler)

    # 配置文件输出（如果指定了路径）
    log_file = log_config.get("file")
    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir and not os.path.exists(log_dir):
            os.makedirs(log_dir, exist_ok=True)

        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=log_config.get("max_size", 10 * 1024 * 1024),  # 默认 10MB
            backupCount=log_config.get("backup_count", 3),
            encoding=log_config.get("encoding", "utf-8"),
        )
        file_handler.setFormatter(formatter)
        file_handler._opinion_lab = True
        logger.addHandler(file_handler)
        logger.info(f"日志将记录到文件: {log_file}")

    # 设置第三方库的日志级别，减少冗余信息
    logging.getLogger("aiosqlite").setLevel(logging.WARNING)
    logging.getLogger("asyncio").setLevel(logging.WARNING)

    logger.debug(f"日志级别设置为: {log_level_str}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opinion-lab", description="推荐平台与反应式智能体的观点动力学实验")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("run", "对每个点击策略运行一条轨迹"),
        ("population", "运行独立智能体群体实验"),
        ("sweep", "运行单参数扫描"),
    ):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", help="场景配置文件 (YAML/JSON)")
        sub.add_argument("--preset", help="内置预设名称，见 presets/")
        sub.add_argument("--out", help="输出目录，优先于环境变量与配置文件")
        sub.add_argument("--seed", type=int, help="随机种子 (u64)，覆盖配置文件")
        sub.add_argument("--jobs", type=int, help="并发进程数")

    verify = subparsers.add_parser("verify", help="运行解析式与仿真之间的性质套件")
    verify.add_argument("--suite", action="append", choices=list(SUITES),
                        help="要运行的套件，可重复；缺省时运行全部")
    verify.add_argument("--out", help="报告输出目录")
    verify.add_argument("--jobs", type=int, help="并发进程数")

    history = subparsers.add_parser("history", help="列出最近的运行记录")
    history.add_argument("--page", type=int, default=1, help="页码（从 1 开始）")
    history.add_argument("--command", dest="filter", choices=["run", "population", "sweep", "verify"],
                         help="只列出指定命令的记录")
    history.add_argument("--clear", action="store_true", help="清空全部运行记录")
    return parser


async def main(argv: Optional[List[str]] = None) -> int:
    """主异步函数，返回退出码"""
    args = build_parser().parse_args(argv)
    setup_logging()

    app = ExperimentApplication(args, configure_logging=setup_logging)
    app.setup()
    exit_code = await app.run()
    logger.debug(f"{args.command} 结束，退出码 {exit_code}")
    return exit_code


if __name__ == "__main__":
    try:
        sys.exit(asyncio.run(main()))
    except KeyboardInterrupt:
        logger.info("通过 KeyboardInterrupt 强制退出")
        sys.exit(130)
