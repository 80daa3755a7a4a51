# core/__init__.py
# 功能：核心包，包含数据模型、数值模块、工作流模块与编排器
# 主要子模块：models/, modules/, domain_grid.py, dpp_core.py, game_engine.py, walks_barriers.py,
#            reference_analysis.py, orchestrator.py, report_engine.py

__version__ = "0.1.0"
