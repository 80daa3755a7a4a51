# tests/test_cli_runner.py
# 功能：测试命令行入口与产物写出
# 验证点：
#   1. solve 成功时退出码 0，并写出 report.json / stats.csv / field.csv / events.yaml / summary.md
#   2. 配置错误（eps < h、JSON 语法、命令不一致）退出码 2
#   3. 同一配置两次运行（线程数、输出目录不同）report.json 逐字节一致
#   4. linewalk 与 verify-appendixC 的统计表

import sys
sys.path.insert(0, '.')

import json

import pandas as pd
import pytest
from typer.testing import CliRunner

from ui.cli import app

runner = CliRunner()

SOLVE = {
    "command": "solve",
    "domain": {"shape": {"kind": "box", "lo": [0, 0], "hi": [1, 1]}},
    "params": {"p": 4, "eps": 0.25, "h": 0.0625},
    "boundary": {"kind": "plane", "nu": [1, 0], "b": 0},
    "tol": 1e-10,
}

LINEWALK = {
    "command": "linewalk",
    "params": {"p": 4, "eps": 0.2},
    "line": {"t0": 0.5},
    "trials": 1000,
    "base_seed": 3,
}


def test_solve_writes_artifacts(write_config, tmp_path):
    result = runner.invoke(app, ["solve", "--config", str(write_config(SOLVE))])
    assert result.exit_code == 0, result.output
    out = tmp_path / "runs" / "solve-seed0"
    for name in ("report.json", "stats.csv", "field.csv", "events.yaml", "summary.md"):
        assert (out / name).exists(), f"缺少产物 {name}"
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    names = {c["name"] for c in report["checks"]}
    assert {"converged", "monotone_iteration", "bounds", "comparison", "plane_exactness"} <= names
    assert "threads" not in report["config"] and "output_dir" not in report["config"]
    assert "solve-seed0/report.json" in report["artifacts"]
    stats = pd.read_csv(out / "stats.csv")
    assert list(stats.columns) == ["iterations", "final_residual", "monotone_violations",
                                   "interior_points", "strip_points"]


def test_eps_smaller_than_h_exits_two(write_config):
    bad = dict(SOLVE, params={"p": 4, "eps": 0.01, "h": 0.1})
    result = runner.invoke(app, ["solve", "--config", str(write_config(bad))])
    assert result.exit_code == 2
    assert "eps < h" in result.output


def test_bad_json_exits_two(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"command": "solve",\n  "params": {', encoding="utf-8")
    result = runner.invoke(app, ["solve", "--config", str(path)])
    assert result.exit_code == 2
    assert "第 2 行" in result.output


def test_command_mismatch_exits_two(write_config):
    result = runner.invoke(app, ["play", "--config", str(write_config(SOLVE))])
    assert result.exit_code == 2


def test_missing_config_exits_two(tmp_path):
    result = runner.invoke(app, ["solve", "--config", str(tmp_path / "nope.json")])
    assert result.exit_code == 2


def test_report_is_reproducible(write_config, tmp_path):
    path = str(write_config(LINEWALK))
    first = runner.invoke(app, ["linewalk", "-c", path, "--out", str(tmp_path / "a"), "--threads", "1"])
    second = runner.invoke(app, ["linewalk", "-c", path, "--out", str(tmp_path / "b"), "--threads", "4"])
    assert first.exit_code == 0 and second.exit_code == 0, first.output + second.output
    for name in ("report.json", "stats.csv", "events.yaml", "summary.md"):
        a = (tmp_path / "a" / "linewalk-seed3" / name).read_bytes()
        b = (tmp_path / "b" / "linewalk-seed3" / name).read_bytes()
        assert a == b, f"{name} 两次运行不一致"


def test_seed_override_changes_directory(write_config, tmp_path):
    result = runner.invoke(app, ["linewalk", "-c", str(write_config(LINEWALK)), "--seed", "11"])
    assert result.exit_code == 0, result.output
    stats = pd.read_csv(tmp_path / "runs" / "linewalk-seed11" / "stats.csv")
    assert stats.loc[0, "trials"] == 1000
    assert stats.loc[0, "corrected_bound"] == pytest.approx(3 * stats.loc[0, "stated_bound"])


def test_verify_appendix_c_hard_checks(write_config, tmp_path):
    config = dict(LINEWALK, command="verify-appendixC")
    result = runner.invoke(app, ["verify-appendixC", "-c", str(write_config(config))])
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "runs" / "verify-appendixC-seed3" / "report.json").read_text(encoding="utf-8"))
    hard = {c["name"] for c in report["checks"] if c["hard"]}
    assert {"bottom_probability", "second_moment_increment", "mean_exit_time_corrected", "overshoot"} <= hard
    assert "mean_exit_time_stated" not in hard


def test_version():
    result = runner.invoke(app, ["version"])
    assert result.exit_code == 0
    assert "twng" in result.output
