# core/domain_grid.py
# 功能：离散区域 Ω_ε = Ω ∪ Γ_ε 及按距离排序的球邻域查询
# 主要类：RegionLabel, DiscreteDomain
# 主要函数：build_grid(), classify(), ball_neighbors()
# 数据结构：所有点位于间距 h 的轴对齐格点上，点序按坐标字典序；
#          内部点共用同一组按 (距离, 字典序) 排好的整数偏移，neighbor_table[row] 是该点的邻居点号

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Tuple, Union

import numpy as np

from core.errors import ConfigurationError, DomainError, QueryError
from core.models import DomainSpec


# 严格开球判定的相对余量（只用于吸收 ε/h 的舍入）
_OPEN_BALL_SLACK = 1e-9


class RegionLabel(str, Enum):
    """格点的区域标签"""
    INTERIOR = "interior"
    STRIP = "strip"


OUTSIDE = "outside"


def classify(spec: DomainSpec, eps: float, x) -> Union[RegionLabel, str]:
    """
    判定一个点的位置：Ω 内为 interior，Ω 外且距 ∂Ω 不超过 ε 为 strip，否则 outside
    """
    sd = float(spec.signed_distance(np.asarray(x, dtype=float))[0])
    if sd < 0:
        return RegionLabel.INTERIOR
    if sd <= eps * (1 + 1e-12):
        return RegionLabel.STRIP
    return OUTSIDE


@dataclass(frozen=True, eq=False)
class DiscreteDomain:
    """
    离散化后的 Ω_ε，构造完成后只读

    Attributes:
        spec: 连续区域描述
        h: 格点间距
        eps: 步长上界 ε
        points: (N, n) 坐标
        lattice: (N, n) 整数格坐标，points = lattice * h
        region: (N,) 标签，0 = interior，1 = strip
        interior_indices / strip_indices: 两类点的点号
        interior_row: (N,) 点号 -> 内部行号，边界带点为 -1
        offsets: (K, n) 开球 B_ε 内的整数偏移，按距离、再按字典序排序
        neighbor_dist: (K,) 对应距离，首项为 0（中心点自身）
        neighbor_table: (N_int, K) 每个内部点的邻居点号
    """

    spec: DomainSpec
    h: float
    eps: float
    points: np.ndarray
    lattice: np.ndarray
    region: np.ndarray
    interior_indices: np.ndarray
    strip_indices: np.ndarray
    interior_row: np.ndarray
    offsets: np.ndarray
    neighbor_dist: np.ndarray
    neighbor_table: np.ndarray
    _lattice_min: np.ndarray = field(repr=False)
    _index_grid: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def ball_population(self) -> int:
        """B_ε 内的格点数（含中心）"""
        return self.neighbor_dist.shape[0]

    def require_neighbors(self) -> None:
        """
        求解与博弈的前提：开球 B_ε 内除中心外至少还有一个格点

        Raises:
            ConfigurationError: eps = h 等情形下球内只有中心点
        """
        if self.ball_population <= 1:
            raise ConfigurationError(
                f"配置错误：需要 eps > h，开球 B_ε 内只有中心点（eps={self.eps}, h={self.h}）"
            )

    def label(self, i: int) -> RegionLabel:
        return RegionLabel.INTERIOR if self.region[i] == 0 else RegionLabel.STRIP

    def is_interior(self, i: int) -> bool:
        return 0 <= i < self.size and self.region[i] == 0

    def require_interior(self, i: int) -> int:
        """返回内部行号，非内部点抛出 DomainError"""
        if not self.is_interior(i):
            raise DomainError(f"点 {i} 不是内部点")
        return int(self.interior_row[i])

    def neighbors(self, i: int) -> Tuple[np.ndarray, np.ndarray]:
        """完整邻域表：(距离, 点号)，按距离升序"""
        row = self.require_interior(i)
        return self.neighbor_dist, self.neighbor_table[row]

    def neighbor_pairs(self, i: int) -> List[Tuple[float, int]]:
        dist, idx = self.neighbors(i)
        return [(float(d), int(j)) for d, j in zip(dist, idx)]

    def lookup(self, lattice_coords: np.ndarray) -> np.ndarray:
        """整数格坐标 -> 点号，不在 Ω_ε 中为 -1"""
        lattice_coords = np.atleast_2d(lattice_coords)
        rel = lattice_coords - self._lattice_min
        shape = np.asarray(self._index_grid.shape)
        ok = np.all((rel >= 0) & (rel < shape), axis=1)
        out = np.full(lattice_coords.shape[0], -1, dtype=np.int64)
        if np.any(ok):
            out[ok] = self._index_grid[tuple(rel[ok].T)]
        return out

    def index_of(self, x) -> int:
        """最近格点的点号"""
        k = np.rint(np.asarray(x, dtype=float) / self.h).astype(np.int64)
        idx = int(self.lookup(k)[0])
        if idx < 0:
            raise DomainError(f"点 {list(np.asarray(x, dtype=float))} 不在离散区域内")
        return idx

    def symmetric_rows(self) -> np.ndarray:
        """
        ε 球完全位于内部（邻居全是内部点）的内部行号

        平面场在这些点上被 DPP 精确保持。
        """
        return np.flatnonzero(np.all(self.region[self.neighbor_table] == 0, axis=1))


def _ball_offsets(ratio: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """|k| < ratio 的整数偏移，按 (|k|², 字典序) 排序"""
    m = int(math.ceil(ratio))
    axes = [np.arange(-m, m + 1)] * n
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    k2 = np.sum(grid ** 2, axis=1)
    keep = k2 < ratio * ratio * (1 - _OPEN_BALL_SLACK)
    grid, k2 = grid[keep], k2[keep]
    keys = [grid[:, j] for j in reversed(range(n))] + [k2]
    order = np.lexsort(keys)
    return grid[order], k2[order]


def build_grid(spec: DomainSpec, h: float, eps: float) -> DiscreteDomain:
    """
    构造覆盖 Ω_ε 的格点区域并预计算邻域表

    Args:
        spec: 连续区域
        h: 格点间距
        eps: 步长上界

    Raises:
        ConfigurationError: h <= 0、eps <= 0、eps >= 1、eps < h 或内部为空
    """
    if not h > 0:
        raise ConfigurationError(f"配置错误：需要 h > 0（h={h}）")
    if not eps > 0:
        raise ConfigurationError(f"配置错误：需要 eps > 0（eps={eps}）")
    if not eps < 1:
        raise ConfigurationError(f"配置错误：需要 eps < 1（eps={eps}）")
    if eps < h:
        raise ConfigurationError(f"配置错误：eps < h（eps={eps}, h={h}）")

    n = spec.dimension
    lo, hi = spec.shape.bounding_box()
    kmin = np.ceil((lo - eps) / h - 1e-9).astype(np.int64)
    kmax = np.floor((hi + eps) / h + 1e-9).astype(np.int64)
    axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(kmin, kmax)]
    lattice = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    coords = lattice * h

    sd = spec.signed_distance(coords)
    interior = sd < 0
    strip = (~interior) & (sd <= eps * (1 + 1e-12))
    keep = interior | strip
    if not np.any(interior):
        raise ConfigurationError("配置错误：离散区域没有内部点（h 相对区域过大）")

    lattice, coords = lattice[keep], coords[keep]
    region = np.where(interior[keep], 0, 1).astype(np.int8)
    size = lattice.shape[0]

    index_grid = np.full(tuple(kmax - kmin + 1), -1, dtype=np.int64)
    index_grid[tuple((lattice - kmin).T)] = np.arange(size)

    interior_indices = np.flatnonzero(region == 0)
    strip_indices = np.flatnonzero(region == 1)
    interior_row = np.full(size, -1, dtype=np.int64)
    interior_row[interior_indices] = np.arange(interior_indices.size)

    offsets, k2 = _ball_offsets(eps / h, n)
    neighbor_dist = h * np.sqrt(k2.astype(float))

    targets = lattice[interior_indices][:, None, :] + offsets[None, :, :] - kmin
    table = index_grid[tuple(np.moveaxis(targets, -1, 0))]
    if np.any(table < 0):
        raise DomainError("邻域表越出 Ω_ε：某个内部点的 ε 球含有未收录的格点")

    for arr in (coords, lattice, region, interior_indices, strip_indices,
                interior_row, offsets, neighbor_dist, table, index_grid):
        arr.setflags(write=False)

    return DiscreteDomain(
        spec=spec, h=float(h), eps=float(eps),
        points=coords, lattice=lattice, region=region,
        interior_indices=interior_indices, strip_indices=strip_indices,
        interior_row=interior_row, offsets=offsets,
        neighbor_dist=neighbor_dist, neighbor_table=table,
        _lattice_min=kmin, _index_grid=index_grid,
    )


def ball_neighbors(d: DiscreteDomain, i: int, radius: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    开球 B_radius(x_i) 内的邻居前缀：(距离, 点号)，距离升序

    Raises:
        QueryError: radius > ε，或 i 不是内部点
    """
    if radius > d.eps * (1 + 1e-12):
        raise QueryError(f"查询错误：radius > eps（radius={radius}, eps={d.eps}）")
    if not d.is_interior(i):
        raise QueryError(f"查询错误：点 {i} 不是内部点")
    dist, idx = d.neighbors(i)
    if radius >= d.eps:
        count = dist.shape[0]
    else:
        count = int(np.searchsorted(dist, radius, side="left"))
    return dist[:count], idx[:count]
