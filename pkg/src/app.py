import argparse
import json
import logging
import sys
from typing import Any, Awaitable, Callable, Dict, Optional

# 导入项目模块
from .config import (Config, ConfigError, DEFAULT_MAX_HISTORY, default_database_path,
                     default_output_directory, resolve_preset)
from .history import HistoryError, RunLedger
from . import utils
from .handlers import command_handlers
from .handlers.command_handlers import (CommandContext, CommandOutcome, EXIT_INTERNAL_ERROR, EXIT_INVALID,
                                        EXIT_IO_ERROR)

# 设置日志记录器
logger = logging.getLogger(__name__)

SCENARIO_COMMANDS = ('run', 'population', 'sweep')

Handler = Callable[[CommandContext], Awaitable[CommandOutcome]]


# --- 错误处理函数 ---
def error_document(error: BaseException) -> Dict[str, Any]:
    """机器可读的错误描述: {error, invariant, message}"""
    return {
        'error': type(error).__name__,
        'invariant': getattr(error, 'invariant', None) or 'unknown',
        'message': getattr(error, 'message', None) or str(error),
    }


def error_handler(error: BaseException) -> CommandOutcome:
    """把异常映射为退出码，并把错误文档写到 stderr"""
    if isinstance(error, OSError):
        logger.error(f"读写文件失败: {error}")
        exit_code, status = EXIT_IO_ERROR, 'io_error'
        document = {'error': type(error).__name__, 'invariant': 'io', 'message': str(error)}
    elif isinstance(error, ConfigError) or hasattr(error, 'invariant'):
        logger.error(f"配置校验失败 [{getattr(error, 'invariant', '')}]: {error}")
        exit_code, status = EXIT_INVALID, 'invalid'
        document = error_document(error)
    else:
        logger.error("发生异常:", exc_info=error)
        exit_code, status = EXIT_INTERNAL_ERROR, 'failed'
        document = {'error': type(error).__name__, 'invariant': 'internal_error', 'message': str(error)}

    print(json.dumps(document, sort_keys=True, ensure_ascii=False), file=sys.stderr)
    return CommandOutcome(exit_code, status, extra={'error': document})


# --- 命令行应用运行器 ---
class ExperimentApplication:
    """负责加载配置、分发子命令、映射退出码并写运行记录"""

    def __init__(self, args: argparse.Namespace,
                 configure_logging: Optional[Callable[[Dict[str, Any]], None]] = None):
        """
        初始化 ExperimentApplication

        Args:
            args: 解析后的命令行参数
            configure_logging: 配置加载后按 logging 部分重新设置日志
        """
        self.args = args
        self.configure_logging = configure_logging
        self.config: Optional[Config] = None
        self.handlers: Dict[str, Handler] = {}
        logger.debug("ExperimentApplication 初始化...")

    def setup(self) -> None:
        """注册命令处理器"""
        command_mapping = {
            "run": command_handlers.cmd_run,
            "population": command_handlers.cmd_population,
            "sweep": command_handlers.cmd_sweep,
            "verify": command_handlers.cmd_verify,
            "history": command_handlers.cmd_history,
        }
        for name, handler_func in command_mapping.items():
            self.handlers[name] = handler_func
            logger.debug(f"注册命令处理器: {name}")

    def load_config(self) -> Optional[Config]:
        """
        按 --config / --preset 加载场景配置，命令行参数优先

        Raises:
            ConfigError: 配置缺失、冲突或不合法
            OSError: 配置文件无法读取
        """
        command = self.args.command
        if command not in SCENARIO_COMMANDS:
            return None

        config_path = getattr(self.args, 'config', None)
        preset = getattr(self.args, 'preset', None)
        if bool(config_path) == bool(preset):
            raise ConfigError(f"{command} 命令需要且只能指定 --config 或 --preset 之一", "config_source")
        path = config_path or resolve_preset(preset)

        config = Config(path, seed=getattr(self.args, 'seed', None), command=command)
        if getattr(self.args, 'out', None):
            config.override_output(self.args.out)
        if self.configure_logging:
            self.configure_logging(config.logging_config)
        return config

    def _jobs(self) -> int:
        jobs = getattr(self.args, 'jobs', None)
        if jobs is None:
            jobs = self.config.jobs if self.config else 1
        if jobs < 1:
            raise ConfigError(f"--jobs 必须是正整数: {jobs}", "jobs_positive")
        return jobs

    def _output_dir(self) -> str:
        if self.config:
            return self.config.output_directory
        return getattr(self.args, 'out', None) or default_output_directory()

    def _ledger(self) -> RunLedger:
        if self.config:
            return RunLedger(self.config.database_path, self.config.max_history)
        return RunLedger(default_database_path(), DEFAULT_MAX_HISTORY)

    def build_context(self, ledger: Optional[RunLedger]) -> CommandContext:
        return CommandContext(
            command=self.args.command,
            config=self.config,
            ledger=ledger,
            output_dir=self._output_dir(),
            jobs=self._jobs(),
            suites=list(getattr(self.args, 'suite', None) or []),
            page=getattr(self.args, 'page', 1),
            command_filter=getattr(self.args, 'filter', None),
            clear=getattr(self.args, 'clear', False),
        )

    async def _record(self, outcome: CommandOutcome, output_dir: Optional[str]) -> None:
        """写运行记录；记录失败只写日志，不影响退出码和产物"""
        if self.args.command == 'history':
            return
        extra = dict(outcome.extra)
        if self.config:
            scenario, seed = self.config.scenario_name, self.config.scenario.seed
            digest = utils.config_digest(self.config.to_dict())
        elif self.args.command == 'verify':
            suites = sorted(getattr(self.args, 'suite', None) or [])
            scenario, seed, digest = ','.join(suites) or 'all', None, utils.config_digest({'suites': suites})
        else:
            scenario, seed, digest = getattr(self.args, 'preset', None) or getattr(self.args, 'config', None), None, None
        try:
            async with self._ledger() as ledger:
                await ledger.add_run(self.args.command, outcome.status, outcome.exit_code, scenario=scenario,
                                     seed=seed, config_digest=digest, output_dir=output_dir, extra=extra)
        except (HistoryError, OSError) as e:
            logger.error(f"写入运行记录失败（已忽略）: {e}")

    async def run(self) -> int:
        """执行子命令并返回退出码"""
        if not self.handlers:
            self.setup()

        output_dir = None
        try:
            self.config = self.load_config()
            handler = self.handlers[self.args.command]
            if self.args.command == 'history':
                async with self._ledger() as ledger:
                    outcome = await handler(self.build_context(ledger))
            else:
                context = self.build_context(None)
                output_dir = context.output_dir
                logger.info(f"开始执行 {self.args.command}，输出目录: {output_dir}")
                outcome = await handler(context)
        except Exception as e:
            outcome = error_handler(e)

        await self._record(outcome, output_dir)
        return outcome.exit_code
