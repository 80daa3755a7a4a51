# core/models/__init__.py
# 功能：数据模型包，定义实验室的配置与报告数据结构
# 主要模型：GameParams, DomainSpec, RunConfig, SolveReport, ValueEstimate, LineWalkStats, RunReport, RunEvent

from .base import BaseModel
from .params import GameParams, DomainSpec, BoxShape, BallShape, AnnulusShape, alpha_beta
from .report import (
    SolveReport, ValueEstimate, Interval, LineWalkStats, CylinderStats, CouplingStats,
    ExitTimeStats, ConvergenceRow, ConvergenceReport, LipschitzReport, BinRow,
    MartingaleReport, FaceCheck, CheckResult, RunReport,
)
from .run_config import (
    RunConfig, ParamsConfig, COMMANDS,
    PlaneBoundary, PerturbedPlaneBoundary, QuadraticBoundary, RadialBoundary,
    ConstantBoundary, TableBoundary,
)
from .run_log import RunEvent, RunEventStore, event_store

__all__ = [
    # 基类
    "BaseModel",
    # 参数与区域
    "GameParams", "DomainSpec", "BoxShape", "BallShape", "AnnulusShape", "alpha_beta",
    # 报告
    "SolveReport", "ValueEstimate", "Interval", "LineWalkStats", "CylinderStats",
    "CouplingStats", "ExitTimeStats", "ConvergenceRow", "ConvergenceReport",
    "LipschitzReport", "BinRow", "MartingaleReport", "FaceCheck", "CheckResult", "RunReport",
    # 运行配置
    "RunConfig", "ParamsConfig", "COMMANDS",
    "PlaneBoundary", "PerturbedPlaneBoundary", "QuadraticBoundary", "RadialBoundary",
    "ConstantBoundary", "TableBoundary",
    # 日志
    "RunEvent", "RunEventStore", "event_store",
]
