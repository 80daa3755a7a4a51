# core/settings.py
# 功能：加载 config.yaml 中的全局数值默认值
# 主要类：Settings（及各配置段 SolverSettings / SimulationSettings / DiagnosticsSettings / BarrierSettings / ReferenceSettings）
# 主要函数：load_settings()

from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from typing import Optional
import yaml
from pydantic import Field

from core.models.base import BaseModel


class SolverSettings(BaseModel):
    tol: float = 1e-8
    max_iter: int = 1_000_000
    monotone_slack: float = 1e-12
    comparison_slack: float = 1e-10


class SimulationSettings(BaseModel):
    max_rounds: int = 100_000_000
    max_walk_steps: int = 1_000_000_000
    record_cap: int = 1000
    threads: Optional[int] = None


class DiagnosticsSettings(BaseModel):
    ci_level: float = 0.95
    radial_bins: int = 16
    height_bins: int = 16
    min_bin_occupancy: int = 30
    stderr_factor: float = 4.0


class BarrierSettings(BaseModel):
    r: float = 1.0
    R: float = 2.0
    C: float = 2.5
    guard_c: float = 50.0


class ReferenceSettings(BaseModel):
    h_ratio: float = 0.25
    oracle_h: float = 1e-3
    oracle_tol: float = 2e-5
    lipschitz_band: float = 0.2


class Settings(BaseModel):
    """config.yaml 的类型化视图，缺失的段使用内置默认"""
    solver: SolverSettings = Field(default_factory=SolverSettings)
    simulation: SimulationSettings = Field(default_factory=SimulationSettings)
    diagnostics: DiagnosticsSettings = Field(default_factory=DiagnosticsSettings)
    barrier: BarrierSettings = Field(default_factory=BarrierSettings)
    reference: ReferenceSettings = Field(default_factory=ReferenceSettings)


def _read_yaml(config_path: Optional[str | Path]) -> dict:
    """读取配置文件，默认查找项目根目录的 config.yaml"""
    if config_path is None:
        config_path = Path(__file__).parent.parent / "config.yaml"
    else:
        config_path = Path(config_path)

    if config_path.exists():
        with open(config_path, 'r', encoding='utf-8') as f:
            return yaml.safe_load(f) or {}
    return {}


@lru_cache(maxsize=8)
def load_settings(config_path: Optional[str] = None) -> Settings:
    """加载并缓存全局设置"""
    return Settings.from_dict(_read_yaml(config_path))
