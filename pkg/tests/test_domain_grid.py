# tests/test_domain_grid.py
# 功能：测试离散区域构造、区域判定与球邻域查询
# 验证点：
#   1. 0.5 格点上的单位正方形只有一个内部点
#   2. 违反前置条件时的错误消息直接写出约束
#   3. 邻居表：开球、距离非降、前缀单调、偏移集关于中心对称
#   4. 每个格点的标签与 classify 一致

import sys
sys.path.insert(0, '.')

import numpy as np
import pytest

from core.domain_grid import OUTSIDE, RegionLabel, ball_neighbors, build_grid, classify
from core.errors import ConfigurationError, QueryError
from core.models import DomainSpec


def test_half_lattice_single_interior_point(unit_square):
    """h = ε = 0.5：{0, 0.5, 1}² 中只有 (0.5, 0.5) 严格在内部"""
    d = build_grid(unit_square, 0.5, 0.5)
    assert d.interior_indices.size == 1, f"内部点应只有 1 个，实际 {d.interior_indices.size}"
    assert np.allclose(d.points[d.interior_indices[0]], [0.5, 0.5])
    # ε = h 时球内只有中心点
    assert d.ball_population == 1


def test_eps_smaller_than_h_is_rejected(unit_square):
    with pytest.raises(ConfigurationError, match="eps < h"):
        build_grid(unit_square, 0.25, 0.1)


@pytest.mark.parametrize("h, eps, pattern", [
    (0.0, 0.5, "h > 0"),
    (0.1, 0.0, "eps > 0"),
    (0.1, 1.0, "eps < 1"),
])
def test_invalid_grid_parameters(unit_square, h, eps, pattern):
    with pytest.raises(ConfigurationError, match=pattern):
        build_grid(unit_square, h, eps)


def test_center_is_interior(unit_square):
    assert classify(unit_square, 0.1, [0.5, 0.5]) == RegionLabel.INTERIOR


def test_classify_annulus_and_far_point(unit_square):
    annulus = DomainSpec.annulus([0.0, 0.0], 0.25, 1.0)
    assert classify(annulus, 0.1, [0.5, 0.0]) == RegionLabel.INTERIOR
    assert classify(annulus, 0.1, [0.0, 1.05]) == RegionLabel.STRIP
    # 内孔中离内边界 0.05 的点也属于边界带
    assert classify(annulus, 0.1, [0.2, 0.0]) == RegionLabel.STRIP
    assert classify(unit_square, 0.1, [2.0, 2.0]) == OUTSIDE


def test_boundary_points_belong_to_strip(unit_square):
    """∂Ω 上的格点归入边界带"""
    d = build_grid(unit_square, 0.125, 0.25)
    on_edge = np.any(np.isclose(d.points, 0.0) | np.isclose(d.points, 1.0), axis=1)
    inside_box = np.all((d.points >= 0) & (d.points <= 1), axis=1)
    assert np.all(d.region[on_edge & inside_box] == 1)


def test_ball_neighbors_twenty_one_points(unit_square):
    """ε/h = 2.5：整数偏移 i² + j² < 6.25 共 21 个"""
    d = build_grid(unit_square, 0.1, 0.25)
    i = d.index_of([0.5, 0.5])
    dist, idx = ball_neighbors(d, i, 0.25)
    assert idx.size == 21
    assert dist[0] == 0 and idx[0] == i, "首项应为中心点自身"
    assert np.all(np.diff(dist) >= 0), "距离应非降"
    assert np.all(dist < 0.25), "开球：距离严格小于半径"


def test_ball_neighbors_radius_limits(square_grid):
    i = square_grid.index_of([0.5, 0.5])
    dist, idx = ball_neighbors(square_grid, i, 0.0)
    assert idx.size == 0, "半径 0 的开球为空"
    full_dist, full_idx = ball_neighbors(square_grid, i, square_grid.eps)
    assert np.array_equal(full_idx, square_grid.neighbor_table[square_grid.interior_row[i]])
    with pytest.raises(QueryError, match="radius > eps"):
        ball_neighbors(square_grid, i, 0.3)


def test_ball_neighbors_prefix_monotone(square_grid):
    i = square_grid.index_of([0.5, 0.5])
    previous = np.empty(0, dtype=np.int64)
    for radius in np.linspace(0.01, square_grid.eps, 12):
        _, idx = ball_neighbors(square_grid, i, radius)
        assert np.array_equal(idx[:previous.size], previous), f"半径 {radius} 的结果不是更大半径的前缀"
        previous = idx


def test_ball_neighbors_rejects_strip_point(square_grid):
    with pytest.raises(QueryError):
        ball_neighbors(square_grid, int(square_grid.strip_indices[0]), 0.1)


def test_offset_set_symmetric(square_grid):
    offsets = {tuple(k) for k in square_grid.offsets.tolist()}
    assert offsets == {tuple(-np.asarray(k)) for k in offsets}


def test_labels_match_classify():
    spec = DomainSpec.annulus([0.0, 0.0], 0.25, 1.0)
    d = build_grid(spec, 0.05, 0.2)
    for i in range(0, d.size, 37):
        assert classify(spec, d.eps, d.points[i]) == d.label(i), f"点 {i} 标签不一致"


def test_domain_is_read_only(square_grid):
    with pytest.raises(ValueError):
        square_grid.points[0, 0] = 3.0


def test_three_dimensional_ball():
    d = build_grid(DomainSpec.ball([0.0, 0.0, 0.0], 0.5), 0.1, 0.2)
    assert d.n == 3
    # |k|² < 4 的三维整数偏移：1 + 6 + 12 + 8 = 27
    assert d.ball_population == 27
