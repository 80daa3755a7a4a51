# tests/conftest.py
# 功能：pytest全局配置和fixture定义
# 主要fixture：unit_square, square_grid, plane_field, saddle_field, params4, small_cylinder, write_config

import json
import sys
from pathlib import Path

# 确保项目根目录在Python路径中
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pytest

from core.domain_grid import build_grid
from core.dpp_core import boundary_from_function, solve_dpp
from core.models import DomainSpec, GameParams, event_store


@pytest.fixture(autouse=True)
def clean_event_store():
    """每个测试前清空运行事件"""
    event_store.clear()
    yield
    event_store.clear()


@pytest.fixture
def project_root_path():
    """返回项目根目录路径"""
    return project_root


@pytest.fixture
def unit_square():
    return DomainSpec.box([0.0, 0.0], [1.0, 1.0])


@pytest.fixture
def params4():
    """p=4, n=2, ε=1/4：α=1/3, β=2/3"""
    return GameParams(p=4.0, n=2, eps=0.25)


@pytest.fixture
def square_grid(unit_square):
    """[0,1]² 上 h=1/16, ε=1/4 的小网格"""
    return build_grid(unit_square, 1 / 16, 0.25)


@pytest.fixture
def plane_field(square_grid, params4):
    """F = x₁ 的解"""
    F = boundary_from_function(square_grid, lambda x: x[:, 0])
    field, report = solve_dpp(square_grid, F, params4, tol=1e-12)
    return field


@pytest.fixture
def saddle_field(square_grid, params4):
    """F = x₁² − x₂² 的解"""
    F = boundary_from_function(square_grid, lambda x: x[:, 0] ** 2 - x[:, 1] ** 2)
    field, report = solve_dpp(square_grid, F, params4, tol=1e-10)
    return field


@pytest.fixture
def write_config(tmp_path):
    """
    把字典写成 JSON 配置文件，返回路径；output_dir 默认指向临时目录
    """

    def _write(data, name="run.json"):
        data = dict(data)
        data.setdefault("output_dir", str(tmp_path / "runs"))
        path = tmp_path / name
        path.write_text(json.dumps(data, indent=2), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
