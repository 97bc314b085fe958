"""
配置管理模块 - 负责加载和验证场景配置文件（YAML，JSON 元数据同样可读）
"""

import copy
import json
import logging
import os
from typing import Any, Dict, List, Optional

import yaml

from .dynamics import InvalidParams, check_unit_interval, validate_params
from .payoffs import InvalidReward, reward_from_dict, validate_lambda
from .policies.agent import BlockGeometry, InvalidPolicy, make_agent_policy
from .policies.distributions import distribution_from_dict
from .policies.platform import make_platform_policy
from .population import DEFAULT_BINS, InvalidPopulation, PopulationSpec, SweepSpec
from .scenario import ScenarioConfig

logger = logging.getLogger(__name__)

ENV_OUTPUT_DIR = 'OPINION_LAB_OUTPUT_DIR'
ENV_DB_PATH = 'OPINION_LAB_DB_PATH'
DEFAULT_OUTPUT_DIR = 'opinion_lab_output'
DEFAULT_DB_PATH = 'opinion_lab_data/runs.db'
DEFAULT_MAX_HISTORY = 200
DEFAULT_LAMBDA = 0.5
PRESET_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'presets')

COMMANDS = ('run', 'population', 'sweep')
SECTION_KEYS = {
    'scenario': {'name', 'command'},
    'dynamics': {'alpha', 'beta'},
    'geometry': {'s', 'n'},
    'agent_policies': None,
    'platform': None,
    'rewards': {'agent', 'platform'},
    'lambda': None,
    'x0': None,
    'seed': None,
    'population': {'count', 'innate', 'recommendation', 'bins', 'jobs'},
    'sweep': {'parameter', 'values'},
    'output': {'directory'},
    'logging': {'level', 'file', 'max_size', 'backup_count', 'encoding', 'format'},
    'database': {'path', 'max_history'},
}
POLICY_KEYS = {'kind', 'T0', 'kappa', 'tau', 'x_drift', 'name'}
SWEEP_PARAMETERS = ('alpha', 'beta', 'x0', 'u0', 'lambda', 'c', 'T0', 'kappa', 'tau', 'x_drift')
# population 命令不使用 platform，缺省时用占位的固定推荐
POPULATION_PLATFORM_PLACEHOLDER = {'kind': 'fixed_recommendation', 'u0': 0.0}


class ConfigError(Exception):
    """配置错误异常类，invariant 给出被违反的规则名"""

    def __init__(self, message: str, invariant: str = 'config'):
        super().__init__(message)
        self.message = message
        self.invariant = invariant


def resolve_preset(name: str) -> str:
    """
    预设名称 -> 预设文件路径

    Raises:
        ConfigError: 预设不存在时
    """
    path = os.path.join(PRESET_DIR, f"{name}.yaml")
    if not os.path.exists(path):
        available = sorted(f[:-5] for f in os.listdir(PRESET_DIR) if f.endswith('.yaml'))
        raise ConfigError(f"未知的预设: {name}，可用预设: {', '.join(available)}", "preset_exists")
    return path


def sweep_values(spec: Any) -> List[float]:
    """把 values 列表或 {start, stop, step} 展开为取值列表"""
    if isinstance(spec, list):
        return list(spec)
    if isinstance(spec, dict) and set(spec) == {'start', 'stop', 'step'}:
        start, stop, step = float(spec['start']), float(spec['stop']), float(spec['step'])
        if step <= 0.0 or stop < start:
            raise ConfigError(f"扫描范围不合法: {spec}", "sweep_range")
        count = int(round((stop - start) / step)) + 1
        return [round(start + k * step, 12) for k in range(count)]
    raise ConfigError(f"sweep.values 必须是列表或 {{start, stop, step}}: {spec!r}", "sweep_values")


def apply_sweep_value(data: Dict[str, Any], parameter: str, value: Any) -> Dict[str, Any]:
    """返回代入扫描取值后的配置副本"""
    data = copy.deepcopy(data)
    if parameter in ('alpha', 'beta'):
        data['dynamics'][parameter] = value
    elif parameter in ('x0', 'lambda'):
        data[parameter] = value
    elif parameter == 'u0':
        if data.get('platform', {}).get('kind', 'fixed_recommendation') != 'fixed_recommendation':
            raise ConfigError("只有固定推荐平台可以扫描 u0", "sweep_parameter_applicable")
        data['platform']['u0'] = value
    elif parameter == 'c':
        rewards = data.setdefault('rewards', {})
        for role in ('agent', 'platform'):
            rewards[role] = {'kind': 'linear_distance', 'c': value}
    else:
        applicable = {
            'T0': ('fixed', 'decreasing', 'adaptive_decreasing'),
            'kappa': ('decreasing',),
            'tau': ('adaptive_decreasing',),
            'x_drift': ('adaptive_decreasing',),
        }[parameter]
        if parameter in ('T0', 'tau') and float(value) == int(value):
            value = int(value)
        touched = False
        for policy in data['agent_policies']:
            if policy.get('kind') in applicable:
                policy[parameter] = value
                touched = True
        if not touched:
            raise ConfigError(f"没有可代入 {parameter} 的点击策略", "sweep_parameter_applicable")
    return data


def default_output_directory() -> str:
    """没有场景配置的命令（verify）使用的输出目录"""
    return os.getenv(ENV_OUTPUT_DIR) or DEFAULT_OUTPUT_DIR


def default_database_path() -> str:
    """没有场景配置的命令（verify / history）使用的运行记录数据库"""
    return os.getenv(ENV_DB_PATH) or DEFAULT_DB_PATH


class Config:
    """配置类，负责加载、验证和提供对场景配置的访问"""

    def __init__(self, config_path: Optional[str] = None, data: Optional[Dict[str, Any]] = None,
                 seed: Optional[int] = None, command: Optional[str] = None):
        """
        初始化配置

        Args:
            config_path: 配置文件路径（YAML 或 JSON）
            data: 直接给出的配置字典，优先于 config_path
            seed: 命令行指定的随机种子，覆盖配置文件
            command: 命令行子命令；配置文件未写 scenario.command 时以它为准

        Raises:
            ConfigError: 配置无法解析或不合法时
            OSError: 配置文件无法读取时
        """
        self.config_path = config_path or '<dict>'
        self.config_data: Dict[str, Any] = {}
        self.seed_override = seed
        self.command_override = command
        if data is not None:
            self.config_data = copy.deepcopy(data)
        else:
            self.load_config()
        self.apply_environment()
        self.validate_config()

    @classmethod
    def from_preset(cls, name: str, seed: Optional[int] = None, command: Optional[str] = None) -> 'Config':
        return cls(resolve_preset(name), seed=seed, command=command)

    def load_config(self) -> None:
        """
        从指定路径加载配置文件

        Raises:
            ConfigError: 文件内容无法解析或为空时
            OSError: 文件不存在或无法读取时
        """
        with open(self.config_path, 'r', encoding='utf-8') as file:
            try:
                # YAML 1.1 会把 1e-05 这类 JSON 浮点数读成字符串
                if self.config_path.endswith('.json'):
                    self.config_data = json.load(file)
                else:
                    self.config_data = yaml.safe_load(file)
            except json.JSONDecodeError as e:
                raise ConfigError(f"JSON 解析错误: {e}", "config_syntax")
            except yaml.YAMLError as e:
                raise ConfigError(f"YAML 解析错误: {e}", "config_syntax")

        if not self.config_data or not isinstance(self.config_data, dict):
            raise ConfigError("配置文件为空或格式不正确", "config_mapping")
        logger.info(f"已成功加载配置文件: {self.config_path}")

    def apply_environment(self) -> None:
        """环境变量覆盖输出目录与运行记录数据库路径"""
        env_output = os.getenv(ENV_OUTPUT_DIR)
        if env_output:
            self.config_data.setdefault('output', {})
            if isinstance(self.config_data['output'], dict):
                self.config_data['output']['directory'] = env_output
                logger.info(f"使用环境变量 {ENV_OUTPUT_DIR} 设置输出目录: {env_output}")
        env_db = os.getenv(ENV_DB_PATH)
        if env_db:
            self.config_data.setdefault('database', {})
            if isinstance(self.config_data['database'], dict):
                self.config_data['database']['path'] = env_db
        if self.seed_override is not None:
            self.config_data['seed'] = self.seed_override

    def override_output(self, directory: str) -> None:
        """命令行 --out 优先于环境变量和配置文件"""
        output = self.config_data.setdefault('output', {})
        output['directory'] = directory

    def validate_config(self) -> None:
        """
        验证配置并构造场景；任何运行开始之前完成全部校验

        Raises:
            ConfigError: 存在未知字段或任一取值不合法时
        """
        self._check_keys()
        file_command = self.get('scenario', 'command')
        if self.command_override and file_command and file_command != self.command_override:
            raise ConfigError(
                f"配置文件用于 {file_command} 命令，不能用 {self.command_override} 运行", "scenario_command_matches")
        self.command = self.command_override or file_command or 'run'
        if self.command not in COMMANDS:
            raise ConfigError(f"未知的命令: {self.command!r}，可选 {', '.join(COMMANDS)}", "scenario_command")

        try:
            self.scenario = self._build_scenario(self.config_data)
            self.population = self._build_population() if self.command == 'population' else None
            self.sweep = self._build_sweep() if self.command == 'sweep' else None
        except (InvalidParams, InvalidPolicy, InvalidReward, InvalidPopulation) as e:
            raise ConfigError(str(e), e.invariant)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"配置取值类型不正确: {e}", "config_value_type")

        logger.info(f"配置验证通过: 场景 {self.scenario.name}, 命令 {self.command}")

    def _check_keys(self) -> None:
        for section, value in self.config_data.items():
            if section not in SECTION_KEYS:
                raise ConfigError(f"配置包含未知的部分: {section}", "unknown_key")
            allowed = SECTION_KEYS[section]
            if allowed is None:
                continue
            if not isinstance(value, dict):
                raise ConfigError(f"配置部分 '{section}' 必须是一个字典", "section_mapping")
            unknown = set(value) - allowed
            if unknown:
                raise ConfigError(f"配置部分 '{section}' 包含未知字段: {sorted(unknown)}", "unknown_key")

        for section in ('dynamics', 'geometry', 'agent_policies'):
            if section not in self.config_data:
                raise ConfigError(f"配置缺少必要的部分: {section}", f"{section}_required")
        for field in ('alpha', 'beta'):
            if field not in self.config_data['dynamics']:
                raise ConfigError(f"配置部分 'dynamics' 缺少必要的字段: {field}", f"{field}_required")
        for field in ('s', 'n'):
            if field not in self.config_data['geometry']:
                raise ConfigError(f"配置部分 'geometry' 缺少必要的字段: {field}", f"{field}_required")

        policies = self.config_data['agent_policies']
        if not isinstance(policies, list) or not policies:
            raise ConfigError("agent_policies 必须是非空列表", "agent_policies_non_empty")
        for policy in policies:
            if not isinstance(policy, dict):
                raise ConfigError(f"点击策略配置必须是字典: {policy!r}", "section_mapping")
            unknown = set(policy) - POLICY_KEYS
            if unknown:
                raise ConfigError(f"点击策略配置包含未知字段: {sorted(unknown)}", "unknown_key")
            if 'kind' not in policy:
                raise ConfigError("点击策略配置缺少 kind", "agent_policy_kind")
            if 'T0' not in policy:
                raise ConfigError("点击策略配置缺少 T0", "T0_in_block")

    def _build_scenario(self, data: Dict[str, Any], seed: Optional[int] = None) -> ScenarioConfig:
        params = validate_params(data['dynamics']['alpha'], data['dynamics']['beta'])
        geometry = BlockGeometry(data['geometry']['s'], data['geometry']['n'])

        policies = tuple(
            make_agent_policy(geometry=geometry, **spec) for spec in data['agent_policies']
        )
        labels = [policy.label for policy in policies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"点击策略名称重复: {labels}，请用 name 区分", "policy_label_unique")

        seed = data.get('seed', 0) if seed is None else seed
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise ConfigError(f"seed 必须是 64 位无符号整数: {seed!r}", "seed_u64")

        if 'platform' in data:
            platform = make_platform_policy(data['platform'], seed).to_dict()
        elif self.command == 'population':
            platform = dict(POPULATION_PLATFORM_PLACEHOLDER)
        else:
            raise ConfigError("配置缺少必要的部分: platform", "platform_required")

        rewards_data = data.get('rewards', {})
        rewards = (
            reward_from_dict(rewards_data.get('agent', {'kind': 'constant', 'value': 1.0})),
            reward_from_dict(rewards_data.get('platform', {'kind': 'constant', 'value': 1.0})),
        )

        if 'x0' not in data and self.command != 'population':
            raise ConfigError("配置缺少必要的字段: x0", "x0_required")

        return ScenarioConfig(
            name=self.get('scenario', 'name', self._default_name()),
            params=params,
            geometry=geometry,
            agent_policies=policies,
            platform=platform,
            rewards=rewards,
            lam=validate_lambda(data.get('lambda', DEFAULT_LAMBDA)),
            x0=check_unit_interval(data.get('x0', 0.0), 'x0'),
            seed=seed,
        )

    def _build_population(self) -> PopulationSpec:
        section = self.config_data.get('population')
        if section is None:
            raise ConfigError("population 命令需要 population 部分", "population_required")
        return PopulationSpec(
            count=section.get('count', 0),
            innate=distribution_from_dict(section.get('innate', {'kind': 'uniform'})),
            recommendation=distribution_from_dict(section.get('recommendation', {'kind': 'gaussian'})),
            scenario=self.scenario,
            bins=section.get('bins', DEFAULT_BINS),
        )

    def _build_sweep(self) -> SweepSpec:
        section = self.config_data.get('sweep')
        if section is None or 'parameter' not in section or 'values' not in section:
            raise ConfigError("sweep 命令需要 sweep.parameter 与 sweep.values", "sweep_required")
        parameter = section['parameter']
        if parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"不支持扫描的参数: {parameter}，可选 {', '.join(SWEEP_PARAMETERS)}", "sweep_parameter")

        values = sweep_values(section['values'])
        cells = []
        for index, value in enumerate(values):
            cell_data = apply_sweep_value(self.config_data, parameter, value)
            try:
                cells.append(self._build_scenario(cell_data, seed=self.scenario.seed + index))
            except (InvalidParams, InvalidPolicy, InvalidReward) as e:
                raise ConfigError(f"扫描取值 {parameter}={value} 不合法: {e}", e.invariant)
        return SweepSpec(parameter=parameter, values=tuple(values), cells=tuple(cells))

    def _default_name(self) -> str:
        if self.config_path == '<dict>':
            return 'scenario'
        return os.path.splitext(os.path.basename(self.config_path))[0]

    def get(self, section: str, key: Optional[str] = None, default: Any = None) -> Any:
        """
        获取配置项

        Args:
            section: 配置部分名称
            key: 配置项名称，如果为 None，则返回整个部分
            default: 当配置项不存在时返回的默认值
        """
        if section not in self.config_data:
            return default
        if key is None:
            return self.config_data[section]
        return self.config_data[section].get(key, default)

    def to_dict(self) -> Dict[str, Any]:
        """
        规范化的场景配置，写入产物的 metadata.json

        不含 output / logging / database，重新解析后得到同一场景。
        """
        data = self.scenario.to_dict()
        data['scenario']['command'] = self.command
        if self.command == 'population':
            del data['platform']
            del data['x0']
            data['population'] = self.population.to_dict()
        if self.command == 'sweep':
            data['sweep'] = {'parameter': self.sweep.parameter, 'values': list(self.sweep.values)}
        return data

    @property
    def scenario_name(self) -> str:
        return self.scenario.name

    @property
    def jobs(self) -> int:
        """并发进程数"""
        return int(self.get('population', 'jobs', 1))

    @property
    def output_directory(self) -> str:
        """获取输出目录（环境变量已在加载时处理）"""
        return self.get('output', 'directory', DEFAULT_OUTPUT_DIR)

    @property
    def database_path(self) -> str:
        """获取运行记录数据库路径"""
        return self.get('database', 'path', DEFAULT_DB_PATH)

    @property
    def max_history(self) -> int:
        """获取最大历史记录数"""
        return self.get('database', 'max_history', DEFAULT_MAX_HISTORY)

    @property
    def logging_config(self) -> Dict[str, Any]:
        """获取日志配置"""
        return self.get('logging', default={})
