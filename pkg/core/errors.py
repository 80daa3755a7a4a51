# core/errors.py
# 功能：实验室统一异常层级
# 主要类：TwngError 及其子类（配置、参数、区域、查询、统计、不收敛、失控、协议违规、试验失败）
# CLI 按异常类型映射退出码：ConfigurationError -> 2，其余 TwngError -> 1

from __future__ import annotations

from typing import Any, Optional


class TwngError(Exception):
    """所有实验室异常的基类"""


class ConfigurationError(TwngError, ValueError):
    """配置或前置条件不满足，消息中直接写出被违反的约束（如 eps < h）"""


class ParameterError(ConfigurationError):
    """博弈参数非法，例如 p <= 2"""


class GeometryError(ConfigurationError):
    """势垒或圆柱几何不满足符号条件"""

    def __init__(self, message: str, sample_point: Optional[Any] = None):
        super().__init__(message)
        self.sample_point = sample_point


class DomainError(TwngError):
    """在定义域之外求值（非内部点、差分模板越界、极点）"""


class QueryError(TwngError):
    """查询超出预计算范围，或没有满足条件的点对"""


class UsageError(TwngError):
    """调用方式错误：区域不一致、边界数据不满足假设"""


class StatisticsError(TwngError):
    """样本不足以给出统计结论"""


class NonConvergenceError(TwngError):
    """迭代达到上限仍未收敛，携带求解报告"""

    def __init__(self, message: str, report: Any):
        super().__init__(message)
        self.report = report


class RunawayError(TwngError):
    """单局博弈或游走超过步数上限"""


class ProtocolViolationError(TwngError):
    """策略给出的落点不在允许的开球内"""


class TrialError(TwngError):
    """某次独立试验失败，记录试验序号与种子以便复现"""

    def __init__(self, trial_index: int, seed: int, cause: BaseException):
        super().__init__(f"试验 {trial_index} 失败（seed={seed}）：{cause}")
        self.trial_index = trial_index
        self.seed = seed
        self.cause = cause


class DegenerateGradientError(DomainError):
    """差分梯度过小（|Du| <= 10h），归一化 p-Laplace 算子无定义"""
