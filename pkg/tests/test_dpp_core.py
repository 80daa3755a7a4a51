# tests/test_dpp_core.py
# 功能：测试 DPP 算子与不动点求解
# 验证点：
#   1. 硬币概率与分层权重
#   2. 平面边界数据在 ε 球完全位于内部的点上被精确保持
#   3. 迭代单调、有界、比较原理、常数平移
#   4. 离散 Lipschitz 扫描与边界表读取
#   5. 手算的 T(u) 与平均极值；T 单调且不超出邻居的取值范围
#   6. n < 2 与 eps = h 的拒绝

import sys
sys.path.insert(0, '.')

import numpy as np
import pandas as pd
import pytest

from core.domain_grid import build_grid
from core.dpp_core import (
    ValueField, alpha_beta, averaged_extrema, boundary_from_function, check_bounds, check_comparison,
    dpp_apply, dpp_values, field_table, layer_weights, lipschitz_scan, load_boundary_table, residual,
    solve_dpp,
)
from core.errors import ConfigurationError, NonConvergenceError, ParameterError, QueryError, UsageError
from core.models import GameParams


def test_alpha_beta():
    alpha, beta = alpha_beta(4.0, 2)
    assert alpha == pytest.approx(1 / 3)
    assert beta == pytest.approx(2 / 3)
    with pytest.raises(ParameterError, match="p > 2"):
        alpha_beta(2.0, 2)


def test_game_params_rejects_p_two():
    with pytest.raises(ValueError):
        GameParams(p=2.0, n=2, eps=0.1)


def test_game_needs_two_dimensions():
    with pytest.raises(ParameterError, match="n >= 2"):
        alpha_beta(4.0, 1)
    with pytest.raises(ParameterError):
        GameParams(p=4.0, n=1, eps=0.1)


def test_layer_weights_sum_to_one(square_grid):
    w = layer_weights(square_grid.neighbor_dist, square_grid.eps)
    assert w.sum() == pytest.approx(1.0)
    assert np.all(w >= 0)
    # 同一距离层内只有最后一项有权重
    same_layer = np.diff(square_grid.neighbor_dist) == 0
    assert np.all(w[:-1][same_layer] == 0)


def test_plane_is_preserved(plane_field, square_grid):
    """F = x₁ 时解在所有内部点上等于 x₁"""
    idx = square_grid.interior_indices
    error = np.max(np.abs(plane_field.values[idx] - square_grid.points[idx, 0]))
    assert error < 1e-9, f"平面解误差 {error:.3e}"


def test_averaged_extrema_symmetric_for_plane(plane_field, square_grid):
    i = square_grid.index_of([0.5, 0.5])
    sup, inf = averaged_extrema(plane_field, i)
    assert sup > inf
    assert 0.5 * (sup + inf) == pytest.approx(0.5, abs=1e-9)


def test_averaged_extrema_rejects_strip_point(plane_field, square_grid):
    with pytest.raises(Exception) as info:
        averaged_extrema(plane_field, int(square_grid.strip_indices[0]))
    assert type(info.value).__name__ == "DomainError"


def test_solve_is_monotone_and_bounded(square_grid, params4):
    F = boundary_from_function(square_grid, lambda x: x[:, 0] ** 2 - x[:, 1] ** 2)
    field, report = solve_dpp(square_grid, F, params4, tol=1e-10)
    assert report.converged
    assert report.monotone_violations == 0
    assert check_bounds(field)
    assert residual(field) < 1e-10


def test_constant_shift_and_comparison(saddle_field, params4):
    shifted, _ = solve_dpp(saddle_field.domain, saddle_field.boundary_data + 1.0, params4, tol=1e-10)
    assert check_comparison(saddle_field, shifted)
    gap = np.max(np.abs(shifted.values - saddle_field.values - 1.0))
    assert gap < 1e-7, f"常数平移误差 {gap:.3e}"


def test_comparison_requires_ordered_boundary(saddle_field, params4):
    lower, _ = solve_dpp(saddle_field.domain, saddle_field.boundary_data - 1.0, params4, tol=1e-8)
    with pytest.raises(UsageError, match="F1 <= F2"):
        check_comparison(saddle_field, lower)


def test_dpp_apply_keeps_boundary(saddle_field):
    once = dpp_apply(saddle_field)
    strip = saddle_field.domain.strip_indices
    assert np.array_equal(once.values[strip], saddle_field.values[strip])


def test_non_convergence_carries_report(square_grid, params4):
    F = boundary_from_function(square_grid, lambda x: x[:, 0])
    with pytest.raises(NonConvergenceError) as info:
        solve_dpp(square_grid, F, params4, tol=1e-12, max_iter=2)
    assert info.value.report.iterations == 2
    assert not info.value.report.converged


def test_solver_preconditions(square_grid, params4):
    F = boundary_from_function(square_grid, lambda x: x[:, 0])
    with pytest.raises(ConfigurationError, match="tol > 0"):
        solve_dpp(square_grid, F, params4, tol=0.0)
    with pytest.raises(ConfigurationError):
        solve_dpp(square_grid, F, GameParams(p=4.0, n=3, eps=0.25))
    with pytest.raises(ConfigurationError):
        solve_dpp(square_grid, F[:-1], params4)


def test_lipschitz_scan_on_plane(plane_field):
    ratio, (i, j) = lipschitz_scan(plane_field, [0.5, 0.5], 0.3, 0.125)
    assert ratio == pytest.approx(1.0, abs=1e-7)
    assert i != j


def test_lipschitz_scan_errors(plane_field):
    with pytest.raises(QueryError, match="minSeparation >= h"):
        lipschitz_scan(plane_field, [0.5, 0.5], 0.3, 0.01)
    with pytest.raises(QueryError):
        lipschitz_scan(plane_field, [0.5, 0.5], 0.8, 0.125)


def test_load_boundary_table(tmp_path, square_grid):
    strip = square_grid.points[square_grid.strip_indices]
    path = tmp_path / "boundary.csv"
    pd.DataFrame({"x1": strip[:, 0], "x2": strip[:, 1], "value": 3.0 * strip[:, 1]}).to_csv(path, index=False)
    F = load_boundary_table(square_grid, path)
    assert np.allclose(F, 3.0 * strip[:, 1])


def test_load_boundary_table_missing_point(tmp_path, square_grid):
    path = tmp_path / "partial.csv"
    pd.DataFrame({"x1": [0.0], "x2": [0.0], "value": [1.0]}).to_csv(path, index=False)
    with pytest.raises(ConfigurationError, match="h/2"):
        load_boundary_table(square_grid, path)


def test_field_table_columns(plane_field):
    table = field_table(plane_field)
    assert list(table.columns) == ["index", "x1", "x2", "region", "value"]
    assert len(table) == plane_field.domain.size


# ===== 算子 T 的手算值与序性质 =====

@pytest.fixture
def tenth_grid(unit_square):
    """h=0.1, ε=0.25：B_ε 内 21 个格点"""
    return build_grid(unit_square, 0.1, 0.25)


def test_dpp_on_single_spike(tenth_grid, params4):
    """中心为 1、其余为 0：T(u)(中心) = α/2·(1 + 0.4) + β/21"""
    d = tenth_grid
    assert d.ball_population == 21
    center = d.index_of([0.5, 0.5])
    values = np.zeros(d.size)
    values[center] = 1.0
    field = ValueField(d, values, np.zeros(d.strip_indices.size), params4)
    assert dpp_apply(field).values[center] == pytest.approx(0.265079, abs=1e-6)
    assert residual(field) == pytest.approx(0.734921, abs=1e-6)


def test_averaged_extrema_hand_value(tenth_grid, params4):
    """u = (x₁ - 0.5)/h：各层的最大值 0,1,1,2,2 按层宽加权得 0.8"""
    d = tenth_grid
    center = d.index_of([0.5, 0.5])
    values = (d.lattice[:, 0] - d.lattice[center, 0]).astype(float)
    field = ValueField(d, values, values[d.strip_indices], params4)
    sup, inf = averaged_extrema(field, center)
    assert sup == pytest.approx(0.8)
    assert inf == pytest.approx(-0.8)


def test_operator_is_monotone(tenth_grid, params4, rng):
    d = tenth_grid
    F = rng.uniform(-1.0, 1.0, d.strip_indices.size)
    low = rng.uniform(-1.0, 1.0, d.interior_indices.size)
    high = low + rng.uniform(0.0, 0.5, low.size)
    u = ValueField.from_interior(d, low, F, params4)
    v = ValueField.from_interior(d, high, F + 0.1, params4)
    assert np.all(dpp_values(u) <= dpp_values(v) + 1e-12)


def test_operator_stays_within_neighbor_range(tenth_grid, params4, rng):
    d = tenth_grid
    u = ValueField.from_interior(
        d, rng.normal(size=d.interior_indices.size), rng.normal(size=d.strip_indices.size), params4,
    )
    neigh = u.values[d.neighbor_table]
    new = dpp_values(u)
    assert np.all(new >= neigh.min(axis=1) - 1e-12)
    assert np.all(new <= neigh.max(axis=1) + 1e-12)


def test_solver_rejects_center_only_ball(unit_square):
    """eps = h：网格可以建，但 B_ε 内只有中心点，不能求解"""
    d = build_grid(unit_square, 0.5, 0.5)
    assert d.interior_indices.size == 1
    F = np.zeros(d.strip_indices.size)
    with pytest.raises(ConfigurationError, match="eps > h"):
        solve_dpp(d, F, GameParams(p=4.0, n=2, eps=0.5))
