# core/models/report.py
# 功能：数值实验的报告模型
# 主要类：SolveReport, ValueEstimate, Interval, LineWalkStats, CylinderStats, CouplingStats,
#        ExitTimeStats, ConvergenceRow, ConvergenceReport, LipschitzReport, BinRow, MartingaleReport,
#        FaceCheck, CheckResult, RunReport
# 核心设计：所有耗时字段都排除在序列化之外，产物只含确定性的数值

from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional, Tuple
from pydantic import Field

from .base import BaseModel


class SolveReport(BaseModel):
    """DPP不动点迭代的结果摘要"""
    iterations: int = Field(default=0, description="实际迭代轮数")
    final_residual: float = Field(default=0.0, ge=0, description="最后一轮的上确界残差")
    monotone_violations: int = Field(default=0, description="单调性被破坏的轮数")
    converged: bool = False
    wall_time: float = Field(default=0.0, exclude=True, description="耗时（秒），不写入产物")


class ValueEstimate(BaseModel):
    """蒙特卡洛对局收益的均值估计"""
    mean: float
    stderr: float
    trials: int = Field(..., ge=1)
    base_seed: int


class Interval(BaseModel):
    """点估计 + 置信半宽"""
    estimate: float
    half_width: float

    @property
    def low(self) -> float:
        return self.estimate - self.half_width

    @property
    def high(self) -> float:
        return self.estimate + self.half_width

    def contains(self, value: float, widen: float = 1.0) -> bool:
        return abs(value - self.estimate) <= widen * self.half_width


class LineWalkStats(BaseModel):
    """变步长直线游走的统计量"""
    t0: float
    eps: float
    trials: int
    base_seed: int
    p_bottom: Interval
    mean_tau: Interval
    second_moment_increment: Interval
    first_moment_increment: Interval
    stated_bound: float = Field(..., description="(t0+4ε)/ε²")
    corrected_bound: float = Field(..., description="3(t0+4ε)/ε²")
    stated_bound_holds: bool
    corrected_bound_holds: bool
    overshoot_ok: bool = Field(..., description="所有退出点都在 [-ε,0] ∪ [1,1+ε) 内")


class CylinderStats(BaseModel):
    """圆柱游走的出口面频率"""
    t0: float
    height: float
    eps: float
    trials: int
    base_seed: int
    p_bottom: Interval
    p_top: float
    p_side: float
    mean_steps: float


class CouplingStats(BaseModel):
    """耦合抵消博弈的停止原因统计"""
    separation: float
    eps: float
    r: float
    trials: int
    base_seed: int
    p_c1: Interval
    p_c2: float
    p_c3: float
    fitted_constant: float = Field(..., description="(1-P(C1))/(|x-y|+ε)")
    max_h_defect: float = Field(..., description="C1 停止时 |x_τ - z - Σh| / steps 的最大值")
    h_exact: bool
    draws_identical: bool


class ExitTimeStats(BaseModel):
    """拉向 z 策略下的退出时间统计"""
    eps: float
    trials: int
    base_seed: int
    start: List[float]
    mean_exit_steps: float
    stderr: float
    mean_increment: float = Field(..., description="每轮 |x_k-z|² 增量的平均")
    drift_constant: float = Field(..., description="mean_increment / ε²")


class ConvergenceRow(BaseModel):
    eps: float
    h: float
    sup_error: float = Field(..., ge=0)
    max_gradient: float
    iterations: int
    pairing_gap: Optional[float] = Field(default=None, description="|pairingField - pairingRef|，未给试验场时为空")


class ConvergenceReport(BaseModel):
    """收敛研究：各 ε 一行，按 ε 降序"""
    rows: List[ConvergenceRow] = Field(default_factory=list)
    monotone: bool = False

    def gradient_spread(self) -> float:
        """maxGradient 列的相对波动 (max-min)/min"""
        values = [row.max_gradient for row in self.rows]
        if not values or min(values) <= 0:
            return float("inf")
        return (max(values) - min(values)) / min(values)


class LipschitzReport(BaseModel):
    """改进 Lipschitz 检查的结果"""
    excess_slope: float
    threshold: float
    passed: bool
    worst_pair: Tuple[int, int]
    guard_c: float
    measured_constant: float = Field(..., description="(max |Δu|/|x-y| - |ν|)/δ，δ=0 时为 0")
    pairs: int


class BinRow(BaseModel):
    """状态分箱后的一条增量统计"""
    bin_center_r: float
    bin_center_t: float
    count: int
    mean_increment: float
    ci: float


class MartingaleReport(BaseModel):
    """超/下鞅诊断结果"""
    orientation: Literal["super", "sub"]
    eps: float
    trials: int
    correction: float
    fitted: bool
    max_violation: float = Field(..., description="各箱 (违背量 - 3·CI) 的最大值，<=0 即通过")
    passed: bool
    occupied_bins: int
    bins: List[BinRow] = Field(default_factory=list)


class FaceCheck(BaseModel):
    """显式势垒在某个面上的边界条件检查"""
    face: Literal["top", "sides", "bottom", "origin"]
    passed: bool
    min_margin: float
    required_constant: Optional[float] = None


class CheckResult(BaseModel):
    """一条检查的判定"""
    name: str
    passed: bool
    hard: bool = True
    measured: Dict[str, Any] = Field(default_factory=dict)
    detail: str = ""


class RunReport(BaseModel):
    """一次 CLI 运行的完整报告"""
    command: str
    base_seed: int
    config: Dict[str, Any] = Field(default_factory=dict)
    checks: List[CheckResult] = Field(default_factory=list)
    constants: Dict[str, float] = Field(default_factory=dict)
    artifacts: List[str] = Field(default_factory=list)
    wall_time: float = Field(default=0.0, exclude=True)

    def add_check(self, check: CheckResult) -> None:
        if any(c.name == check.name for c in self.checks):
            raise ValueError(f"检查 {check.name} 重复登记")
        self.checks.append(check)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.hard)

    def failed_checks(self) -> List[CheckResult]:
        return [c for c in self.checks if c.hard and not c.passed]

    def format_summary(self) -> str:
        """格式化为简短文本，供终端输出"""
        lines = [f"命令: {self.command}  seed: {self.base_seed}"]
        for c in self.checks:
            mark = "✓" if c.passed else ("✗" if c.hard else "·")
            lines.append(f"  {mark} {c.name}{'' if c.hard else '（参考）'}")
        verdict = "通过" if self.passed else "未通过"
        lines.append(f"结论: {verdict}")
        return "\n".join(lines)
