# core/modules/base.py
# 功能：所有工作流模块的抽象基类
# 主要类：BaseModule, ModuleResult
# 核心能力：定义模块通用接口、检查登记、日志（rich 控制台 + 运行事件存储）、网格与边界数据的公共构造

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from rich.console import Console

from core.domain_grid import DiscreteDomain, build_grid
from core.dpp_core import boundary_from_function, load_boundary_table
from core.errors import ConfigurationError
from core.models import CheckResult, GameParams, RunConfig, RunEvent, event_store
from core.reference_analysis import ReferenceSolution, affine_reference, radial_reference
from core.settings import Settings


_LEVEL_STYLE = {"info": "cyan", "warning": "yellow", "error": "red", "debug": "dim"}


@dataclass
class ModuleResult:
    """
    模块执行结果封装

    checks 与 constants 进入 report.json，tables 按名字写成 CSV（stats -> stats.csv）
    """
    checks: List[CheckResult] = field(default_factory=list)
    constants: Dict[str, float] = field(default_factory=dict)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    data: Any = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.hard)


class BaseModule(ABC):
    """
    所有工作流模块的基类

    子类需要实现：
    - run(): 执行模块主逻辑，返回 ModuleResult
    """

    # 模块名称（子类必须定义）
    name: str = "base_module"
    description: str = "基础模块"

    def __init__(
        self,
        config: RunConfig,
        settings: Settings,
        base_dir: Optional[Path] = None,
        console: Optional[Console] = None,
    ):
        """
        Args:
            config: 本次运行的配置
            settings: config.yaml 的全局默认
            base_dir: 解析相对路径（如边界表）的目录
            console: rich 控制台，默认新建
        """
        self.config = config
        self.settings = settings
        self.base_dir = base_dir or Path.cwd()
        self.console = console or Console()
        self.result = ModuleResult()

    @abstractmethod
    def run(self) -> ModuleResult:
        """执行模块主逻辑"""

    # ===== 检查与日志 =====

    def check(
        self,
        name: str,
        passed: bool,
        measured: Optional[Dict[str, Any]] = None,
        hard: bool = True,
        detail: str = "",
    ) -> CheckResult:
        """登记一条检查并记录日志"""
        result = CheckResult(name=name, passed=bool(passed), hard=hard,
                             measured=_plain(measured or {}), detail=detail)
        self.result.checks.append(result)
        level = "info" if passed or not hard else "error"
        verdict = "通过" if passed else ("未通过" if hard else "未满足（参考）")
        self.log(f"检查 {name}: {verdict}", level, **result.measured)
        return result

    def constant(self, name: str, value: float) -> None:
        self.result.constants[name] = float(value)
        self.log(f"常数 {name} = {value:.6g}")

    def log(self, message: str, level: str = "info", **data: Any) -> None:
        """
        日志输出：控制台打印 [module] [LEVEL] message，同时写入运行事件存储

        Args:
            message: 日志消息
            level: info / warning / error / debug
            data: 附带的数值
        """
        style = _LEVEL_STYLE.get(level, "white")
        self.console.print(f"[{style}][{self.name}] [{level.upper()}][/{style}] {message}",
                           highlight=False)
        event_store.add(RunEvent(module=self.name, stage=self.config.command, level=level,
                                 message=message, data=_plain(data)))

    # ===== 公共构造 =====

    @property
    def threads(self) -> Optional[int]:
        return self.config.threads if self.config.threads is not None else self.settings.simulation.threads

    def game_params(self, eps: Optional[float] = None) -> GameParams:
        return GameParams(p=self.config.params.p, n=self.config.dimension,
                          eps=self.config.params.eps if eps is None else eps)

    def build_domain(self, eps: Optional[float] = None) -> DiscreteDomain:
        eps = self.config.params.eps if eps is None else eps
        h = self.config.params.grid_spacing(eps, self.settings.reference.h_ratio)
        domain = build_grid(self.config.domain, h, eps)
        self.log(f"网格：h={h:.6g}, ε={eps:.6g}, 内部点 {domain.interior_indices.size}，"
                 f"边界带点 {domain.strip_indices.size}，球内格点 {domain.ball_population}")
        return domain

    def reference(self) -> ReferenceSolution:
        """由边界配置给出的参考解（plane -> 仿射，radial -> 径向 p-调和）"""
        boundary = self.config.boundary
        if boundary is None:
            raise ConfigurationError("配置错误：需要 boundary")
        if boundary.kind == "plane":
            return affine_reference(boundary.nu, boundary.b)
        if boundary.kind == "radial":
            shape = self.config.domain.shape
            center = getattr(shape, "center", None)
            return radial_reference(self.config.params.p, self.config.dimension, center)
        raise ConfigurationError(f"配置错误：边界类型 {boundary.kind} 没有参考解（需要 plane 或 radial）")

    def boundary_values(self, domain: DiscreteDomain) -> np.ndarray:
        """按边界配置在边界带上取 F"""
        boundary = self.config.boundary
        if boundary is None:
            raise ConfigurationError("配置错误：需要 boundary")
        if boundary.kind == "table":
            path = Path(boundary.path)
            return load_boundary_table(domain, path if path.is_absolute() else self.base_dir / path)
        if boundary.kind == "radial":
            return boundary_from_function(domain, self.reference().evaluate)
        return boundary_from_function(domain, boundary.evaluate)


def _plain(data: Dict[str, Any]) -> Dict[str, Any]:
    """numpy 标量/数组转成 YAML/JSON 可写的纯 Python 值"""
    out: Dict[str, Any] = {}
    for key, value in data.items():
        if isinstance(value, np.generic):
            value = value.item()
        elif isinstance(value, np.ndarray):
            value = value.tolist()
        elif isinstance(value, tuple):
            value = list(value)
        out[key] = value
    return out


def domain_center(config: RunConfig) -> List[float]:
    """区域的默认扫描中心：box/ball 取中心，annulus 取环带中线上 +x₁ 方向的点"""
    shape = config.domain.shape
    if shape.kind == "box":
        return [(a + b) / 2 for a, b in zip(shape.lo, shape.hi)]
    center = list(shape.center)
    if shape.kind == "annulus":
        center[0] += (shape.inner_radius + shape.outer_radius) / 2
    return center
