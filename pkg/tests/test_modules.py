# tests/test_modules.py
# 功能：测试各命令的工作流模块（经由编排器运行，使用小规模配置）
# 验证点：
#   1. 每个命令登记预期的检查，并写出对应的统计表
#   2. 小规模下各命令的硬检查通过（耦合与势垒只检查产物结构）

import sys
sys.path.insert(0, '.')

import json

import pandas as pd
import pytest
from rich.console import Console

from core.models import RunConfig
from core.modules import BaseModule, ModuleResult, SolveModule
from core.orchestrator import Orchestrator
from core.settings import load_settings


@pytest.fixture
def orchestrator(tmp_path):
    return Orchestrator(console=Console(quiet=True), base_dir=tmp_path)


def run(orchestrator, tmp_path, data):
    config = RunConfig.from_dict({**data, "output_dir": str(tmp_path)})
    report = orchestrator.run(config)
    return report, tmp_path / config.output_name()


UNIT_SQUARE = {"shape": {"kind": "box", "lo": [0, 0], "hi": [1, 1]}}


def test_base_module_is_abstract():
    with pytest.raises(TypeError):
        BaseModule(RunConfig.from_dict({"command": "linewalk", "params": {"eps": 0.1}}), load_settings())


def test_solve_module_result(tmp_path):
    config = RunConfig.from_dict({
        "command": "solve", "domain": UNIT_SQUARE, "params": {"p": 4, "eps": 0.25, "h": 0.0625},
        "boundary": {"kind": "quadratic", "coefficients": [1, -1]}, "tol": 1e-10,
    })
    module = SolveModule(config, load_settings(), console=Console(quiet=True))
    result = module.run()
    assert isinstance(result, ModuleResult)
    assert result.passed
    assert "plane_exactness" not in {c.name for c in result.checks}
    assert set(result.tables) == {"field", "stats"}


def test_play(orchestrator, tmp_path):
    report, out = run(orchestrator, tmp_path, {
        "command": "play", "domain": UNIT_SQUARE, "params": {"p": 4, "eps": 0.25, "h": 0.0625},
        "boundary": {"kind": "plane", "nu": [1, 0]}, "tol": 1e-10,
        "trials": 200, "base_seed": 7, "start": [0.5, 0.5], "record": True,
    })
    assert report.passed, report.format_summary()
    transcripts = pd.read_csv(out / "transcripts.csv")
    assert transcripts["trial"].nunique() == 200
    stats = pd.read_csv(out / "stats.csv")
    assert list(stats.columns) == ["start", "solver_value", "mc_mean", "stderr", "trials", "base_seed"]


def test_cylinder(orchestrator, tmp_path):
    report, out = run(orchestrator, tmp_path, {
        "command": "cylinder", "params": {"p": 4, "eps": 0.05},
        "cylinder": {"r": 0.3, "t0_list": [0.3, 0.05, 0.15]}, "trials": 400, "base_seed": 1,
    })
    assert report.passed, report.format_summary()
    stats = pd.read_csv(out / "stats.csv")
    assert list(stats["t0"]) == [0.05, 0.15, 0.3], "按 t0 升序输出"
    assert "hitting_constant" in report.constants


def test_exit_time(orchestrator, tmp_path):
    report, out = run(orchestrator, tmp_path, {
        "command": "verify-exit-time",
        "domain": {"shape": {"kind": "ball", "center": [0, 0], "radius": 0.5}},
        "params": {"p": 4, "eps": 0.1, "h": 0.05},
        "exit_time": {"z": [0, 0], "start": [0, 0], "shallow_start": [0.3, 0]},
        "trials": 100, "base_seed": 2,
    })
    assert report.passed, report.format_summary()
    stats = pd.read_csv(out / "stats.csv")
    assert list(stats["label"]) == ["start", "shallow"]
    assert {"start_x1", "start_x2", "mean_exit_steps", "drift_constant"} <= set(stats.columns)


def test_convergence_with_plane(orchestrator, tmp_path):
    report, out = run(orchestrator, tmp_path, {
        "command": "verify-convergence", "domain": UNIT_SQUARE,
        "params": {"p": 4, "eps_list": [0.25, 0.125], "h_ratio": 0.5},
        "boundary": {"kind": "plane", "nu": [1, 0]}, "tol": 1e-10,
    })
    assert report.passed, report.format_summary()
    names = [c.name for c in report.checks]
    assert "plane_exactness" in names and "reference_certified" not in names
    stats = pd.read_csv(out / "stats.csv")
    assert list(stats["eps"]) == [0.25, 0.125]
    assert (out / "field.csv").exists()


def test_lipschitz_with_perturbed_plane(orchestrator, tmp_path):
    report, out = run(orchestrator, tmp_path, {
        "command": "verify-lipschitz", "domain": {"shape": {"kind": "box", "lo": [0, 0], "hi": [2, 2]}},
        "params": {"p": 4, "eps": 0.1, "h": 0.05},
        "boundary": {"kind": "plane-perturbed", "nu": [1, 0], "delta": 0.01},
        "lipschitz": {"center": [1, 1], "r": 0.9}, "tol": 1e-10,
    })
    assert report.passed, report.format_summary()
    soft = {c.name for c in report.checks if not c.hard}
    assert soft == {"improved_lipschitz_without_guard"}
    assert {"lipschitz_measured_C", "lipschitz_scan_max"} <= set(report.constants)


def test_coupling_artifacts(orchestrator, tmp_path):
    report, out = run(orchestrator, tmp_path, {
        "command": "verify-coupling", "params": {"p": 4},
        "coupling": {"r": 0.2, "pairs": [[0.05, 0.1], [0.1, 0.1]]}, "trials": 100, "base_seed": 13,
    })
    checks = {c.name: c for c in report.checks}
    assert checks["draw_logs_identical"].passed and checks["draw_logs_identical"].hard
    # 每一对起点的 H = 0 与随机量一致性都是硬检查
    for name in ("cancellation_exact_1", "draw_logs_identical_1"):
        assert checks[name].hard and checks[name].passed, name
    stats = pd.read_csv(out / "stats.csv")
    assert len(stats) == 2
    assert {"coupling_C", "coupling_C_1"} <= set(report.constants)


def test_barrier_artifacts(orchestrator, tmp_path):
    report, out = run(orchestrator, tmp_path, {
        "command": "verify-barriers", "params": {"p": 4, "eps": 0.1},
        "barrier": {"r": 0.5, "boundary_samples": 90, "residual_points": 6, "separation": 0.1},
        "trials": 200, "base_seed": 4,
    })
    checks = {c.name: c for c in report.checks}
    assert checks["barrier_bottom"].passed and checks["barrier_origin"].passed
    assert not checks["barrier_sides"].hard and checks["barrier_sides_fitted_C"].hard
    assert checks["barrier_sides_fitted_C"].passed and checks["barrier_top_fitted_C"].passed
    faces = pd.read_csv(out / "faces.csv")
    assert set(faces["face"]) == {"top", "sides", "bottom", "origin"}
    stats = pd.read_csv(out / "stats.csv")
    assert set(stats["orientation"]) <= {"super", "sub"}
    saved = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert saved["command"] == "verify-barriers"
