"""
分布模块 - [-1,1] 上可复现采样的分布（均匀 / 截断高斯 / 点质量）
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

from .agent import InvalidPolicy

logger = logging.getLogger(__name__)

DEFAULT_GAUSSIAN_STDDEV = 0.5
# 截断高斯重采样的上限，避免几乎全部质量落在区间外时死循环
MAX_RESAMPLE = 100000


@dataclass(frozen=True)
class Distribution:
    """
    [-1,1] 上的一维分布

    kind 取 uniform（[low, high] 均匀）、gaussian（按 truncate 截断，截断方式为重采样）
    或 point（点质量 value）。
    """
    kind: str = 'uniform'
    low: float = -1.0
    high: float = 1.0
    mean: float = 0.0
    stddev: float = DEFAULT_GAUSSIAN_STDDEV
    value: float = 0.0
    truncate: Tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        lo, hi = self.truncate
        if not -1.0 <= lo < hi <= 1.0:
            raise InvalidPolicy(f"截断区间必须是 [-1,1] 的子区间: {self.truncate}", "distribution_truncate")
        if self.kind == 'uniform':
            if not lo <= self.low < self.high <= hi:
                raise InvalidPolicy(f"均匀分布区间不合法: [{self.low}, {self.high}]", "distribution_uniform_bounds")
        elif self.kind == 'gaussian':
            if self.stddev <= 0.0:
                raise InvalidPolicy(f"高斯分布标准差必须 > 0: {self.stddev}", "distribution_stddev_positive")
        elif self.kind == 'point':
            if not lo <= self.value <= hi:
                raise InvalidPolicy(f"点质量必须落在截断区间内: {self.value}", "distribution_point_in_range")
        else:
            raise InvalidPolicy(f"未知的分布类型: {self.kind!r}", "distribution_kind")

    def sample(self, rng: np.random.Generator) -> float:
        """用给定生成器抽取一个样本"""
        if self.kind == 'point':
            return float(self.value)
        if self.kind == 'uniform':
            return float(rng.uniform(self.low, self.high))

        lo, hi = self.truncate
        for _ in range(MAX_RESAMPLE):
            draw = float(rng.normal(self.mean, self.stddev))
            if lo <= draw <= hi:
                return draw
        raise InvalidPolicy(
            f"截断高斯重采样 {MAX_RESAMPLE} 次仍未落入 {self.truncate}: mean={self.mean}, stddev={self.stddev}",
            "distribution_truncation_mass",
        )

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {'kind': self.kind, 'truncate': [self.truncate[0], self.truncate[1]]}
        if self.kind == 'uniform':
            data.update(low=self.low, high=self.high)
        elif self.kind == 'gaussian':
            data.update(mean=self.mean, stddev=self.stddev)
        else:
            data['value'] = self.value
        return data


_DISTRIBUTION_KEYS = {'kind', 'low', 'high', 'mean', 'stddev', 'value', 'truncate'}


def distribution_from_dict(data: Dict[str, Any]) -> Distribution:
    """
    从配置字典构造分布

    Raises:
        InvalidPolicy: 存在未知字段或取值不合法时
    """
    if not isinstance(data, dict):
        raise InvalidPolicy(f"分布配置必须是字典: {data!r}", "distribution_mapping")
    unknown = set(data) - _DISTRIBUTION_KEYS
    if unknown:
        raise InvalidPolicy(f"分布配置包含未知字段: {sorted(unknown)}", "unknown_key")

    kwargs: Dict[str, Any] = {}
    for key in ('low', 'high', 'mean', 'stddev', 'value'):
        if key in data:
            kwargs[key] = float(data[key])
    if 'truncate' in data:
        bounds = data['truncate']
        if not isinstance(bounds, (list, tuple)) or len(bounds) != 2:
            raise InvalidPolicy(f"truncate 必须是两个数: {bounds!r}", "distribution_truncate")
        kwargs['truncate'] = (float(bounds[0]), float(bounds[1]))
    return Distribution(kind=data.get('kind', 'uniform'), **kwargs)
