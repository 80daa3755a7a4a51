# core/modules/__init__.py
# 功能：工作流模块包，每个命令族一个模块
# 主要模块：SolveModule, PlayModule, CylinderModule, LineWalkModule, BarrierModule,
#          ConvergenceModule, LipschitzModule, CouplingModule, ExitTimeModule

from .base import BaseModule, ModuleResult
from .dpp_solver import SolveModule, PlayModule
from .walk_runner import CylinderModule, LineWalkModule
from .barrier_verifier import BarrierModule
from .convergence_verifier import ConvergenceModule, LipschitzModule
from .coupling_verifier import CouplingModule, ExitTimeModule

__all__ = [
    "BaseModule",
    "ModuleResult",
    "SolveModule",
    "PlayModule",
    "CylinderModule",
    "LineWalkModule",
    "BarrierModule",
    "ConvergenceModule",
    "LipschitzModule",
    "CouplingModule",
    "ExitTimeModule",
]
