# core/models/run_config.py
# 功能：单次运行的 JSON 配置模型
# 主要类：RunConfig, ParamsConfig, 各类边界数据（Plane/PerturbedPlane/Quadratic/Radial/Constant/Table）,
#        各命令的参数段（LineSection, CylinderSection, CouplingSection, BarrierSection,
#        LipschitzSection, ExitTimeSection, ConvergenceSection）
# 核心设计：未给出的数值回落到 config.yaml 的全局默认；约束违反时消息直接写出约束

from __future__ import annotations

from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import Field, model_validator

from .base import BaseModel
from .params import DomainSpec
from core.errors import ConfigurationError


COMMANDS = (
    "solve", "play", "cylinder", "linewalk",
    "verify-convergence", "verify-lipschitz", "verify-appendixC",
    "verify-barriers", "verify-coupling", "verify-exit-time",
)
Command = Literal[
    "solve", "play", "cylinder", "linewalk",
    "verify-convergence", "verify-lipschitz", "verify-appendixC",
    "verify-barriers", "verify-coupling", "verify-exit-time",
]

# 需要离散网格的命令
GRID_COMMANDS = {"solve", "play", "verify-convergence", "verify-lipschitz", "verify-exit-time"}


class ParamsConfig(BaseModel):
    """p、ε（或 ε 列表）、h（或 h/ε）"""
    p: float = 4.0
    eps: Optional[float] = None
    eps_list: Optional[List[float]] = None
    h: Optional[float] = None
    h_ratio: Optional[float] = None

    @model_validator(mode="after")
    def _check(self) -> "ParamsConfig":
        if not self.p > 2:
            raise ConfigurationError(f"配置错误：需要 p > 2（p={self.p}）")
        if self.eps is not None and self.h is not None and self.eps < self.h:
            raise ConfigurationError(f"配置错误：eps < h（eps={self.eps}, h={self.h}）")
        if self.eps is not None and self.h is not None and self.eps == self.h:
            raise ConfigurationError(f"配置错误：需要 eps > h，eps = h 时开球内只有中心点（eps={self.eps}）")
        if self.eps_list is not None:
            if any(b >= a for a, b in zip(self.eps_list, self.eps_list[1:])):
                raise ConfigurationError("配置错误：eps_list 必须严格降序")
        if self.h_ratio is not None and not 0 < self.h_ratio < 1:
            raise ConfigurationError("配置错误：需要 0 < h_ratio < 1（否则 eps <= h）")
        return self

    def grid_spacing(self, eps: float, default_ratio: float) -> float:
        """给定 ε 时的网格步长：显式 h 优先，其次 h/ε 比例"""
        if self.h is not None:
            return self.h
        return eps * (self.h_ratio if self.h_ratio is not None else default_ratio)


# ===== 边界数据 =====

class PlaneBoundary(BaseModel):
    """F = ν·x + b"""
    kind: Literal["plane"] = "plane"
    nu: List[float]
    b: float = 0.0

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_2d(x) @ np.asarray(self.nu, dtype=float) + self.b


class PerturbedPlaneBoundary(BaseModel):
    """F = ν·x + b + δ·sin(10 x_k)，k 由 perturbation 决定"""
    kind: Literal["plane-perturbed"] = "plane-perturbed"
    nu: List[float]
    b: float = 0.0
    delta: float = Field(..., ge=0)
    perturbation: Literal["sin10x1", "sin10x2"] = "sin10x1"

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        axis = 0 if self.perturbation == "sin10x1" else 1
        return x @ np.asarray(self.nu, dtype=float) + self.b + self.delta * np.sin(10.0 * x[:, axis])


class QuadraticBoundary(BaseModel):
    """F = Σ a_i x_i²，例如 [1, -1] 给出 x₁² − x₂²"""
    kind: Literal["quadratic"] = "quadratic"
    coefficients: List[float]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return (x ** 2) @ np.asarray(self.coefficients, dtype=float)


class RadialBoundary(BaseModel):
    """F = |x - center|^κ，κ=(p-n)/(p-1)，由参考解模块给出"""
    kind: Literal["radial"] = "radial"


class ConstantBoundary(BaseModel):
    kind: Literal["constant"] = "constant"
    c: float

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return np.full(np.atleast_2d(x).shape[0], self.c, dtype=float)


class TableBoundary(BaseModel):
    """CSV 表（坐标..., value），按最近点匹配到边界带，容差 h/2"""
    kind: Literal["table"] = "table"
    path: str


Boundary = Annotated[
    Union[PlaneBoundary, PerturbedPlaneBoundary, QuadraticBoundary,
          RadialBoundary, ConstantBoundary, TableBoundary],
    Field(discriminator="kind"),
]


# ===== 各命令参数段 =====

class LineSection(BaseModel):
    t0: float = 0.5

    @model_validator(mode="after")
    def _check(self) -> "LineSection":
        if not 0 < self.t0 < 1:
            raise ConfigurationError("配置错误：需要 0 < t0 < 1")
        return self


class CylinderSection(BaseModel):
    r: float = 1.0
    t0_list: List[float] = Field(default_factory=lambda: [0.1, 0.2, 0.4])


class CouplingSection(BaseModel):
    """耦合运行；pairs 为 (|x-y|, ε) 列表，第一对用于 H=0 硬检查"""
    r: float = 0.25
    pairs: List[List[float]] = Field(default_factory=lambda: [[0.05, 0.1]])
    center: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check(self) -> "CouplingSection":
        for pair in self.pairs:
            if len(pair) != 2 or pair[0] <= 0 or pair[1] <= 0:
                raise ConfigurationError("配置错误：pairs 每项须为正的 [separation, eps]")
        return self


class BarrierSection(BaseModel):
    r: Optional[float] = None
    R: Optional[float] = None
    C: Optional[float] = None
    nu_mag: float = 1.0
    delta: float = 0.01
    b: float = 0.0
    separation: float = 0.1       # |x-z|，决定圆柱高度
    boundary_samples: int = 1000
    residual_points: int = 100
    correction: Optional[float] = None


class LipschitzSection(BaseModel):
    center: Optional[List[float]] = None
    r: float = 0.45
    min_separation: Optional[float] = None
    guard_c: Optional[float] = None


class ExitTimeSection(BaseModel):
    z: List[float]
    start: List[float]
    shallow_start: Optional[List[float]] = None


class ConvergenceSection(BaseModel):
    scan_center: Optional[List[float]] = None
    scan_r: float = 0.15
    scan_min_separation: float = 0.2
    bump_center: Optional[List[float]] = None
    bump_radius: float = 0.1


class RunConfig(BaseModel):
    """一次运行的完整配置"""

    command: Command
    domain: Optional[DomainSpec] = None
    params: ParamsConfig = Field(default_factory=ParamsConfig)
    boundary: Optional[Boundary] = None
    trials: int = Field(default=1000, ge=1)
    base_seed: int = Field(default=0, ge=0, lt=2 ** 64)
    tol: Optional[float] = Field(default=None, gt=0)
    max_iter: Optional[int] = Field(default=None, ge=1)
    threads: Optional[int] = Field(default=None, ge=1)
    record: bool = False
    output_dir: str = "runs"

    start: Optional[List[float]] = None
    line: LineSection = Field(default_factory=LineSection)
    cylinder: CylinderSection = Field(default_factory=CylinderSection)
    coupling: CouplingSection = Field(default_factory=CouplingSection)
    barrier: BarrierSection = Field(default_factory=BarrierSection)
    lipschitz: LipschitzSection = Field(default_factory=LipschitzSection)
    exit_time: Optional[ExitTimeSection] = None
    convergence: ConvergenceSection = Field(default_factory=ConvergenceSection)

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        if self.command in GRID_COMMANDS and self.domain is None:
            raise ConfigurationError(f"配置错误：命令 {self.command} 需要 domain")
        if self.command in {"solve", "play", "verify-lipschitz", "verify-convergence"} \
                and self.boundary is None:
            raise ConfigurationError(f"配置错误：命令 {self.command} 需要 boundary")
        if self.command == "verify-convergence" and not self.params.eps_list:
            raise ConfigurationError("配置错误：verify-convergence 需要 params.eps_list")
        if self.command != "verify-convergence" and self.params.eps is None \
                and self.command not in {"verify-coupling"}:
            raise ConfigurationError(f"配置错误：命令 {self.command} 需要 params.eps")
        if self.command == "verify-exit-time" and self.exit_time is None:
            raise ConfigurationError("配置错误：verify-exit-time 需要 exit_time 段")
        if self.command == "play" and self.trials < 2:
            raise ConfigurationError("配置错误：play 需要 trials >= 2")
        if self.params.eps is not None and not (0 < self.params.eps < 1):
            raise ConfigurationError("配置错误：需要 0 < eps < 1")
        if self.domain is not None:
            n = self.domain.dimension
            for name in ("start",):
                vec = getattr(self, name)
                if vec is not None and len(vec) != n:
                    raise ConfigurationError(f"配置错误：{name} 的维数应为 {n}")
            nu = getattr(self.boundary, "nu", None)
            if nu is not None and len(nu) != n:
                raise ConfigurationError(f"配置错误：boundary.nu 的维数应为 {n}")
        return self

    @property
    def dimension(self) -> int:
        return self.domain.dimension if self.domain is not None else 2

    def output_name(self) -> str:
        """输出子目录名，由 (command, base_seed) 唯一决定"""
        return f"{self.command}-seed{self.base_seed}"

