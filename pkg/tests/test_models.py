# tests/test_models.py
# 功能：测试运行配置、报告模型与事件存储
# 验证点：
#   1. RunConfig 的字段校验（eps <= h、缺少 domain、维数不一致等）
#   2. JSON / YAML 保存后重新加载得到相同模型
#   3. RunReport 的检查登记与结论
#   4. 事件存储的自动编号与持久化

import sys
sys.path.insert(0, '.')

import pytest
import yaml

from core.models import (
    CheckResult, DomainSpec, Interval, RunConfig, RunEvent, RunReport, event_store,
)


def solve_config(**overrides):
    data = {
        "command": "solve",
        "domain": {"shape": {"kind": "box", "lo": [0, 0], "hi": [1, 1]}},
        "params": {"p": 4, "eps": 0.125, "h": 0.03125},
        "boundary": {"kind": "plane", "nu": [1, 0], "b": 0},
    }
    data.update(overrides)
    return data


def test_run_config_valid():
    cfg = RunConfig.from_dict(solve_config())
    assert cfg.dimension == 2
    assert cfg.params.grid_spacing(cfg.params.eps, 0.25) == 0.03125
    assert cfg.output_name() == "solve-seed0"
    assert cfg.boundary.evaluate([[0.3, 0.9]])[0] == pytest.approx(0.3)


def test_eps_smaller_than_h():
    with pytest.raises(ValueError, match="eps < h"):
        RunConfig.from_dict(solve_config(params={"p": 4, "eps": 0.01, "h": 0.1}))


def test_eps_equal_to_h_rejected():
    with pytest.raises(ValueError, match="eps > h"):
        RunConfig.from_dict(solve_config(params={"p": 4, "eps": 0.125, "h": 0.125}))
    with pytest.raises(ValueError, match="h_ratio"):
        RunConfig.from_dict(solve_config(params={"p": 4, "eps": 0.125, "h_ratio": 1.0}))


@pytest.mark.parametrize("overrides", [
    {"domain": None},
    {"boundary": None},
    {"params": {"p": 2, "eps": 0.1}},
    {"params": {"p": 4, "eps": 1.5}},
    {"boundary": {"kind": "plane", "nu": [1, 0, 0]}},
    {"boundary": {"kind": "spiral"}},
    {"base_seed": -1},
    {"unknown_field": 1},
])
def test_invalid_run_configs(overrides):
    with pytest.raises(ValueError):
        RunConfig.from_dict(solve_config(**overrides))


def test_convergence_needs_descending_eps_list():
    data = {
        "command": "verify-convergence",
        "domain": {"shape": {"kind": "ball", "center": [0, 0], "radius": 1}},
        "params": {"p": 4, "eps_list": [0.1, 0.2]},
        "boundary": {"kind": "radial"},
    }
    with pytest.raises(ValueError, match="降序"):
        RunConfig.from_dict(data)


def test_save_and_load_roundtrip(tmp_path):
    cfg = RunConfig.from_dict(solve_config(trials=17, base_seed=5))
    for name in ("run.json", "run.yaml"):
        path = cfg.save(tmp_path / name)
        assert RunConfig.load(path) == cfg


def test_domain_spec_contains_ball():
    spec = DomainSpec.annulus([0, 0], 0.25, 1.0)
    assert spec.contains_ball([0.6, 0.0], 0.3)
    assert not spec.contains_ball([0.6, 0.0], 0.4)


def test_interval_contains():
    ci = Interval(estimate=1.0, half_width=0.1)
    assert ci.low == pytest.approx(0.9) and ci.high == pytest.approx(1.1)
    assert ci.contains(1.05) and not ci.contains(1.2) and ci.contains(1.2, widen=3)


def test_run_report_checks():
    report = RunReport(command="solve", base_seed=0)
    report.add_check(CheckResult(name="converged", passed=True))
    report.add_check(CheckResult(name="note_only", passed=False, hard=False))
    assert report.passed, "参考性检查不影响结论"
    with pytest.raises(ValueError, match="重复"):
        report.add_check(CheckResult(name="converged", passed=False))
    report.add_check(CheckResult(name="bounds", passed=False))
    assert not report.passed
    assert [c.name for c in report.failed_checks()] == ["bounds"]
    assert "未通过" in report.format_summary()


def test_run_report_excludes_wall_time():
    report = RunReport(command="solve", base_seed=0, wall_time=3.2)
    assert "wall_time" not in report.to_dict()


def test_event_store(tmp_path):
    first = event_store.add(RunEvent(module="dpp_solver", stage="solve", message="开始"))
    second = event_store.add(RunEvent(module="dpp_solver", stage="solve", level="warning", message="慢"))
    assert (first.seq, second.seq) == (0, 1)
    assert len(event_store.get_by_stage("solve")) == 2
    path = event_store.save(tmp_path / "events.yaml")
    loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
    assert [e["message"] for e in loaded] == ["开始", "慢"]
    event_store.clear()
    assert event_store.get_all() == []
