# core/dpp_core.py
# 功能：动态规划原理（DPP）算子 T、单调不动点迭代求解、以及有界性/比较/离散Lipschitz检查
# 主要类：ValueField
# 主要函数：alpha_beta(), averaged_extrema(), dpp_apply(), solve_dpp(), residual(),
#          check_bounds(), check_comparison(), lipschitz_scan(), boundary_from_function(), load_boundary_table()
# 核心公式：T(u)(x) = (α/2)(avgSup + avgInf) + β·mean_{B_ε(x)} u
#          avgSup = (1/ε)∫_0^ε sup_{B_t(x)} u dt，按排序邻居距离分层精确求和

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from core.domain_grid import DiscreteDomain
from core.errors import (
    ConfigurationError, DomainError, NonConvergenceError, QueryError, UsageError,
)
from core.models import GameParams, SolveReport, alpha_beta
from core.settings import load_settings

__all__ = [
    "ValueField", "alpha_beta", "layer_weights", "averaged_extrema", "dpp_apply",
    "dpp_values", "solve_dpp", "residual", "check_bounds", "check_comparison",
    "lipschitz_scan", "boundary_from_function", "load_boundary_table", "field_table",
]


@dataclass(frozen=True, eq=False)
class ValueField:
    """
    格点上的值函数

    Attributes:
        domain: 所属离散区域
        values: (N,) 全部格点上的值，边界带上恒等于 boundary_data
        boundary_data: (N_strip,) 按 domain.strip_indices 排列的收益 F
        params: 生成该场的博弈参数（α、β 取自这里）
    """

    domain: DiscreteDomain
    values: np.ndarray
    boundary_data: np.ndarray
    params: GameParams

    def __post_init__(self):
        if self.values.shape != (self.domain.size,):
            raise UsageError("values 的长度与区域点数不一致")
        if self.boundary_data.shape != (self.domain.strip_indices.size,):
            raise UsageError("boundary_data 的长度与边界带点数不一致")
        if not np.all(np.isfinite(self.values)):
            raise UsageError("值函数含有非有限值")
        if not np.array_equal(self.values[self.domain.strip_indices], self.boundary_data):
            raise UsageError("边界带上的值必须等于边界数据")

    @classmethod
    def from_interior(cls, domain: DiscreteDomain, interior_values: np.ndarray,
                      boundary_data: np.ndarray, params: GameParams) -> "ValueField":
        values = np.empty(domain.size, dtype=float)
        values[domain.interior_indices] = interior_values
        values[domain.strip_indices] = boundary_data
        return cls(domain, values, np.asarray(boundary_data, dtype=float), params)

    def with_values(self, values: np.ndarray) -> "ValueField":
        """替换全部值（边界带必须不变）"""
        return ValueField(self.domain, values, self.boundary_data, self.params)

    def at(self, x) -> float:
        return float(self.values[self.domain.index_of(x)])


def layer_weights(neighbor_dist: np.ndarray, eps: float) -> np.ndarray:
    """
    t 在 [0, ε] 上均匀时，邻域表第 k 项的"累积极值"所占权重

    sup_{B_t} u 在 t ∈ (d_k, d_{k+1}] 上等于前 k+1 项的最大值，所以权重是 (d_{k+1} - d_k)/ε，
    末项取 d_K = ε。同距离层内只有最后一项权重非零。
    """
    upper = np.append(neighbor_dist[1:], eps)
    return (upper - neighbor_dist) / eps


def _gather(field: ValueField) -> np.ndarray:
    return field.values[field.domain.neighbor_table]


def _extrema_rows(neigh_values: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    run_max = np.maximum.accumulate(neigh_values, axis=1)
    run_min = np.minimum.accumulate(neigh_values, axis=1)
    return run_max @ weights, run_min @ weights


def averaged_extrema(field: ValueField, i: int) -> Tuple[float, float]:
    """
    点 i 处的时间平均上/下确界

    Raises:
        DomainError: i 不是内部点
    """
    d = field.domain
    row = d.require_interior(i)
    vals = field.values[d.neighbor_table[row]][None, :]
    sup, inf = _extrema_rows(vals, layer_weights(d.neighbor_dist, d.eps))
    return float(sup[0]), float(inf[0])


def dpp_values(field: ValueField) -> np.ndarray:
    """所有内部点上 T(u) 的值（按内部行号排列）"""
    d = field.domain
    alpha, beta = field.params.alpha, field.params.beta
    neigh = _gather(field)
    sup, inf = _extrema_rows(neigh, layer_weights(d.neighbor_dist, d.eps))
    return 0.5 * alpha * (sup + inf) + beta * neigh.mean(axis=1)


def dpp_apply(field: ValueField) -> ValueField:
    """Jacobi 式的一轮 T：内部点全部由旧场计算，边界带原样保留"""
    values = field.values.copy()
    values[field.domain.interior_indices] = dpp_values(field)
    return field.with_values(values)


def residual(field: ValueField) -> float:
    """内部点上 |u - T(u)| 的上确界"""
    new = dpp_values(field)
    return float(np.max(np.abs(new - field.values[field.domain.interior_indices])))


def _check_params(domain: DiscreteDomain, params: GameParams) -> None:
    domain.require_neighbors()
    if params.n != domain.n:
        raise ConfigurationError(f"配置错误：params.n={params.n} 与区域维数 {domain.n} 不一致")
    if abs(params.eps - domain.eps) > 1e-12 * max(1.0, domain.eps):
        raise ConfigurationError(
            f"配置错误：params.eps={params.eps} 与网格 eps={domain.eps} 不一致"
        )


def solve_dpp(
    domain: DiscreteDomain,
    F: np.ndarray,
    params: GameParams,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    monotone_slack: Optional[float] = None,
) -> Tuple[ValueField, SolveReport]:
    """
    从 u₀ ≡ inf F 出发迭代 u_{j+1} = T(u_j) 直到残差 < tol

    Args:
        domain: 离散区域
        F: 边界带上的收益，按 domain.strip_indices 排列
        params: 博弈参数
        tol: 上确界残差阈值，默认取 config.yaml
        max_iter: 最大迭代次数
        monotone_slack: 单调性检查的浮点容差

    Returns:
        (值函数, 求解报告)

    Raises:
        ConfigurationError: tol <= 0、F 非有限，或 B_ε 内只有中心点（eps = h）
        NonConvergenceError: 达到 max_iter 仍未收敛
    """
    settings = load_settings().solver
    tol = settings.tol if tol is None else tol
    max_iter = settings.max_iter if max_iter is None else max_iter
    slack = settings.monotone_slack if monotone_slack is None else monotone_slack

    if not tol > 0:
        raise ConfigurationError(f"配置错误：需要 tol > 0（tol={tol}）")
    F = np.asarray(F, dtype=float)
    if F.shape != (domain.strip_indices.size,):
        raise ConfigurationError("配置错误：边界数据长度与边界带点数不一致")
    if not np.all(np.isfinite(F)):
        raise ConfigurationError("配置错误：边界数据含非有限值")
    _check_params(domain, params)

    started = time.perf_counter()
    interior = np.full(domain.interior_indices.size, F.min())
    field = ValueField.from_interior(domain, interior, F, params)
    report = SolveReport()

    for it in range(1, max_iter + 1):
        old = field.values[domain.interior_indices]
        new = dpp_values(field)
        change = new - old
        if change.size and change.min() < -slack:
            report.monotone_violations += 1
        res = float(np.max(np.abs(change))) if change.size else 0.0
        values = field.values.copy()
        values[domain.interior_indices] = new
        field = field.with_values(values)
        report.iterations = it
        report.final_residual = res
        if res < tol:
            report.converged = True
            break

    report.wall_time = time.perf_counter() - started
    if not report.converged:
        raise NonConvergenceError(
            f"DPP 迭代 {max_iter} 轮后残差 {report.final_residual:.3e} 仍不小于 tol={tol}",
            report,
        )
    return field, report


def check_bounds(field: ValueField, slack: float = 1e-12) -> bool:
    """|u| <= sup_strip |F| 是否处处成立"""
    bound = float(np.max(np.abs(field.boundary_data))) if field.boundary_data.size else 0.0
    return bool(np.all(np.abs(field.values) <= bound + slack))


def check_comparison(f1: ValueField, f2: ValueField, slack: Optional[float] = None) -> bool:
    """
    比较原理：边界上 F1 <= F2 时，检验 u1 <= u2 是否处处成立

    Raises:
        UsageError: 区域不同，或边界数据不满足 F1 <= F2
    """
    slack = load_settings().solver.comparison_slack if slack is None else slack
    same = f1.domain is f2.domain or (
        f1.domain.points.shape == f2.domain.points.shape
        and np.array_equal(f1.domain.points, f2.domain.points)
    )
    if not same:
        raise UsageError("用法错误：两个值函数不在同一个区域上")
    if np.any(f1.boundary_data > f2.boundary_data):
        raise UsageError("用法错误：比较需要 F1 <= F2（逐点）")
    return bool(np.all(f1.values <= f2.values + slack))


def lipschitz_scan(field: ValueField, center, r: float, min_separation: float) -> Tuple[float, Tuple[int, int]]:
    """
    B_r(center) 内、间距不小于 min_separation 的内部点对上 |u(x)-u(y)|/|x-y| 的最大值

    Returns:
        (最大比值, 取到最大值的点号对)

    Raises:
        QueryError: 球不在内部区域内、min_separation < h 或没有合格点对
    """
    d = field.domain
    center = np.asarray(center, dtype=float)
    if not d.spec.contains_ball(center, r):
        raise QueryError("查询错误：B_r(center) 不在内部区域内")
    if min_separation < d.h * (1 - 1e-12):
        raise QueryError(f"查询错误：需要 minSeparation >= h（{min_separation} < {d.h}）")
    idx = d.interior_indices[np.linalg.norm(d.points[d.interior_indices] - center, axis=1) < r]
    if idx.size < 2:
        raise QueryError("查询错误：球内内部点不足两个")
    dist = pdist(d.points[idx])
    diff = pdist(field.values[idx][:, None], metric="cityblock")
    ok = dist >= min_separation * (1 - 1e-12)
    if not np.any(ok):
        raise QueryError("查询错误：没有满足最小间距的点对")
    ratio = np.where(ok, diff / np.where(ok, dist, 1.0), -np.inf)
    k = int(np.argmax(ratio))
    rows, cols = np.triu_indices(idx.size, 1)
    i, j = rows[k], cols[k]
    return float(ratio[k]), (int(idx[i]), int(idx[j]))


# ===== 边界数据 =====

def boundary_from_function(domain: DiscreteDomain, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """在边界带点上向量化求值 F"""
    values = np.asarray(fn(domain.points[domain.strip_indices]), dtype=float)
    return values.reshape(domain.strip_indices.size)


def load_boundary_table(domain: DiscreteDomain, path: str | Path) -> np.ndarray:
    """
    读取 CSV 边界表（坐标..., value），每个边界带点取最近的表行，距离须 <= h/2

    Raises:
        ConfigurationError: 文件缺失、列数不对或有边界带点匹配不到
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"配置错误：边界表不存在 {path}")
    table = pd.read_csv(path)
    if table.shape[1] != domain.n + 1:
        raise ConfigurationError(f"配置错误：边界表应有 {domain.n + 1} 列（坐标..., value）")
    coords = table.iloc[:, :domain.n].to_numpy(dtype=float)
    values = table.iloc[:, domain.n].to_numpy(dtype=float)

    tree = cKDTree(coords)
    dist, which = tree.query(domain.points[domain.strip_indices])
    if np.any(dist > domain.h / 2 + 1e-12):
        bad = int(np.argmax(dist))
        raise ConfigurationError(
            f"配置错误：边界带点 {domain.points[domain.strip_indices][bad].tolist()} "
            f"在边界表中没有 h/2 以内的匹配"
        )
    return values[which]


def field_table(field: ValueField) -> pd.DataFrame:
    """值函数导出表：index, x1..xn, region, value"""
    d = field.domain
    data = {"index": np.arange(d.size)}
    for k in range(d.n):
        data[f"x{k + 1}"] = d.points[:, k]
    data["region"] = np.where(d.region == 0, "interior", "strip")
    data["value"] = field.values
    return pd.DataFrame(data)
