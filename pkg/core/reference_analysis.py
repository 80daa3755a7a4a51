# core/reference_analysis.py
# 功能：参考解（平面、径向 p-调和）、归一化 p-Laplace 残差、收敛研究、弱梯度配对、平面包络与改进 Lipschitz 检查
# 主要类：ReferenceSolution, BumpField, PlaneEnvelope
# 主要函数：affine_reference(), radial_reference(), p_laplacian_residual(), certify_reference(),
#          convergence_study(), weak_gradient_pairing(), plane_envelope_check(), improved_lipschitz_check()
# 残差算子：Δu + (p-2)⟨D²u·g, g⟩，g = Du/|Du|

from __future__ import annotations

from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field, model_validator
from scipy.spatial.distance import pdist

from core.domain_grid import DiscreteDomain, build_grid
from core.dpp_core import ValueField, boundary_from_function, lipschitz_scan, solve_dpp
from core.errors import (
    DegenerateGradientError, DomainError, ParameterError, QueryError, UsageError,
)
from core.models import (
    BaseModel, ConvergenceReport, ConvergenceRow, DomainSpec, GameParams, LipschitzReport,
)
from core.settings import load_settings

Evaluator = Callable[[np.ndarray], np.ndarray]

# h 减半时残差之比的接受区间，以及比值不再有意义的残差底噪
RATIO_BAND = (3.5, 4.5)
RESIDUAL_FLOOR = 1e-8


# ===== 参考解 =====

class ReferenceSolution(BaseModel):
    """
    精确参考解

    affine: u = ν·x + b
    radial: u = |x - center|^κ，κ = (p-n)/(p-1)
    """

    kind: Literal["affine", "radial"]
    nu: Optional[List[float]] = None
    b: float = 0.0
    p: Optional[float] = None
    n: int = Field(default=2, ge=1)
    kappa: Optional[float] = None
    center: Optional[List[float]] = None

    def _offset(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        c = np.zeros(x.shape[1]) if self.center is None else np.asarray(self.center, dtype=float)
        return x - c

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """向量化求值，x 形如 (m, n)"""
        if self.kind == "affine":
            return np.atleast_2d(np.asarray(x, dtype=float)) @ np.asarray(self.nu, dtype=float) + self.b
        rel = self._offset(x)
        radius = np.linalg.norm(rel, axis=1)
        if np.any(radius == 0):
            raise DomainError("径向参考解不能在中心点求值")
        return radius ** self.kappa

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """向量化梯度，返回 (m, n)"""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "affine":
            return np.broadcast_to(np.asarray(self.nu, dtype=float), x.shape).copy()
        rel = self._offset(x)
        radius = np.linalg.norm(rel, axis=1)
        if np.any(radius == 0):
            raise DomainError("径向参考解不能在中心点求梯度")
        return self.kappa * (radius ** (self.kappa - 2))[:, None] * rel


def affine_reference(nu: Sequence[float], b: float = 0.0) -> ReferenceSolution:
    return ReferenceSolution(kind="affine", nu=[float(v) for v in nu], b=b, n=len(nu))


def radial_reference(p: float, n: int, center: Optional[Sequence[float]] = None) -> ReferenceSolution:
    """
    径向 p-调和函数 |x|^κ

    Raises:
        ParameterError: p <= 2、n < 2 或 p = n（对数情形不支持）
    """
    if not p > 2:
        raise ParameterError(f"参数错误：需要 p > 2（p={p}）")
    if n < 2:
        raise ParameterError(f"参数错误：需要 n >= 2（n={n}）")
    if p == n:
        raise ParameterError("参数错误：p = n 时 κ = 0，对数参考解不支持")
    return ReferenceSolution(
        kind="radial", p=p, n=n, kappa=(p - n) / (p - 1),
        center=None if center is None else [float(c) for c in center],
    )


# ===== 残差算子 =====

def p_laplacian_residual(u: Evaluator, x: Sequence[float], h: float, p: float) -> float:
    """
    Δu + (p-2)⟨D²u·g, g⟩ 的中心差分近似

    Args:
        u: 向量化求值函数 (m, n) -> (m,)
        x: 求值点
        h: 差分步长
        p: 指数

    Raises:
        DegenerateGradientError: 差分梯度 |Du| <= 10h
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    eye = np.eye(n) * h
    # 模板：中心、±h e_i、以及 i<j 的四个对角点
    rows, cols = np.triu_indices(n, 1)
    stencil = [x[None, :], x + eye, x - eye]
    for sign_i, sign_j in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        stencil.append(x + sign_i * eye[rows] + sign_j * eye[cols])
    values = np.asarray(u(np.vstack(stencil)), dtype=float)

    center = values[0]
    plus, minus = values[1:n + 1], values[n + 1:2 * n + 1]
    grad = (plus - minus) / (2 * h)
    norm = np.linalg.norm(grad)
    if norm <= 10 * h:
        raise DegenerateGradientError(f"梯度退化：|Du| = {norm:.3e} <= 10h")

    hess = np.diag((plus - 2 * center + minus) / h ** 2)
    m = rows.size
    if m:
        pp, pm, mp, mm = (values[2 * n + 1 + k * m:2 * n + 1 + (k + 1) * m] for k in range(4))
        cross = (pp - pm - mp + mm) / (4 * h ** 2)
        hess[rows, cols] = cross
        hess[cols, rows] = cross
    g = grad / norm
    return float(np.trace(hess) + (p - 2) * g @ hess @ g)


def certify_reference(
    reference: ReferenceSolution,
    p: float,
    points: Sequence[Sequence[float]],
    h: Optional[float] = None,
    tol: Optional[float] = None,
) -> Dict[str, float]:
    """
    用残差算子认证参考解

    条件：每个点 |res(h)| <= tol；残差高于舍入底噪的点上，res(h)/res(h/2) 的中位数落在
    [3.5, 4.5]（二阶差分的 h² 特征）。残差在零点附近时单点比值没有意义，因此取中位数。

    Returns:
        {"max_residual", "max_residual_half", "median_ratio", "ratio_points", "in_band", "certified"}
    """
    cfg = load_settings().reference
    h = cfg.oracle_h if h is None else h
    tol = cfg.oracle_tol if tol is None else tol
    full, half, ratios = [], [], []
    for x in points:
        r1 = p_laplacian_residual(reference.evaluate, x, h, p)
        r2 = p_laplacian_residual(reference.evaluate, x, h / 2, p)
        full.append(abs(r1))
        half.append(abs(r2))
        if abs(r1) > RESIDUAL_FLOOR and abs(r2) > 0:
            ratios.append(r1 / r2)
    lo, hi = RATIO_BAND
    median = float(np.median(ratios)) if ratios else float("nan")
    within_tol = all(v <= tol for v in full)
    ratio_ok = not ratios or lo <= median <= hi
    return {
        "max_residual": float(max(full)) if full else 0.0,
        "max_residual_half": float(max(half)) if half else 0.0,
        "median_ratio": median,
        "ratio_points": float(len(ratios)),
        "in_band": float(sum(lo <= q <= hi for q in ratios)),
        "certified": float(within_tol and ratio_ok),
    }


def certification_points(domain: DiscreteDomain, reference: ReferenceSolution, count: int = 50) -> np.ndarray:
    """内部点中离参考解中心不近于中位距离的一组等间隔样本"""
    pts = domain.points[domain.interior_indices]
    c = np.zeros(domain.n) if reference.center is None else np.asarray(reference.center, dtype=float)
    dist = np.linalg.norm(pts - c, axis=1)
    far = pts[dist >= np.median(dist)]
    step = max(1, far.shape[0] // count)
    return far[::step][:count]


# ===== 弱梯度配对 =====

class BumpField(BaseModel):
    """φ(x) = amplitude·exp(1 - 1/(1 - s²))·direction，s = |x - center|/radius，支撑在 B_radius(center)"""

    center: List[float]
    radius: float = Field(..., gt=0)
    direction: Optional[List[float]] = None
    amplitude: float = 1.0

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        s2 = np.sum((x - np.asarray(self.center)) ** 2, axis=1) / self.radius ** 2
        inside = s2 < 1
        psi = np.zeros(x.shape[0])
        psi[inside] = np.exp(1.0 - 1.0 / (1.0 - s2[inside]))
        e = np.eye(x.shape[1])[0] if self.direction is None else np.asarray(self.direction, dtype=float)
        return self.amplitude * psi[:, None] * e[None, :]


def weak_gradient_pairing(field: ValueField, test_fn: BumpField,
                          reference: ReferenceSolution) -> Tuple[float, float]:
    """
    Σ⟨D_h u, φ⟩hⁿ 与 Σ⟨Du_ref, φ⟩hⁿ，D_h 为格点中心差分

    Raises:
        DomainError: 试验场支撑离边界带不足 ε
    """
    d = field.domain
    center = np.asarray(test_fn.center, dtype=float)
    if not d.spec.contains_ball(center, test_fn.radius + d.eps):
        raise DomainError("试验场支撑须在内部且与边界带距离大于 ε")
    pts_idx = d.interior_indices[np.linalg.norm(d.points[d.interior_indices] - center, axis=1) < test_fn.radius]
    if pts_idx.size == 0:
        return 0.0, 0.0
    lattice = d.lattice[pts_idx]
    grad = np.empty((pts_idx.size, d.n))
    for k in range(d.n):
        shift = np.zeros(d.n, dtype=lattice.dtype)
        shift[k] = 1
        plus = d.lookup(lattice + shift)
        minus = d.lookup(lattice - shift)
        grad[:, k] = (field.values[plus] - field.values[minus]) / (2 * d.h)
    phi = test_fn.evaluate(d.points[pts_idx])
    weight = d.h ** d.n
    pairing_field = float(np.sum(grad * phi) * weight)
    pairing_ref = float(np.sum(reference.gradient(d.points[pts_idx]) * phi) * weight)
    return pairing_field, pairing_ref


# ===== 收敛研究 =====

def convergence_study(
    spec: DomainSpec,
    reference: ReferenceSolution,
    eps_list: Sequence[float],
    h_ratio: float,
    p: float,
    scan_center: Sequence[float],
    scan_r: float,
    scan_min_separation: float,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    bump: Optional[BumpField] = None,
    on_row: Optional[Callable[[ConvergenceRow, ValueField], None]] = None,
) -> ConvergenceReport:
    """
    对每个 ε：边界带取参考解、求解 DPP、记录内部上确界误差与 Lipschitz 扫描最大值

    Args:
        h_ratio: h/ε
        bump: 给出时同时记录弱梯度配对差
        on_row: 每行完成后的回调（供日志与导出）

    Raises:
        UsageError: ε 列表未严格降序，或径向参考解未通过残差认证
        NonConvergenceError: 求解不收敛（携带求解报告）
    """
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise UsageError("用法错误：eps 列表必须严格降序")
    rows: List[ConvergenceRow] = []
    certified = reference.kind == "affine"
    for eps in eps_list:
        domain = build_grid(spec, eps * h_ratio, eps)
        if not certified:
            cert = certify_reference(reference, p, certification_points(domain, reference))
            if not cert["certified"]:
                raise UsageError(f"用法错误：参考解未通过残差认证（max residual {cert['max_residual']:.3e}）")
            certified = True
        params = GameParams(p=p, n=domain.n, eps=eps)
        F = boundary_from_function(domain, reference.evaluate)
        field, report = solve_dpp(domain, F, params, tol=tol, max_iter=max_iter)
        interior = domain.interior_indices
        error = float(np.max(np.abs(field.values[interior] - reference.evaluate(domain.points[interior]))))
        slope, _ = lipschitz_scan(field, scan_center, scan_r, max(scan_min_separation, domain.h))
        gap = None
        if bump is not None:
            pf, pr = weak_gradient_pairing(field, bump, reference)
            gap = abs(pf - pr)
        row = ConvergenceRow(eps=eps, h=domain.h, sup_error=error, max_gradient=slope,
                             iterations=report.iterations, pairing_gap=gap)
        rows.append(row)
        if on_row is not None:
            on_row(row, field)
    monotone = all(b.sup_error <= a.sup_error for a, b in zip(rows, rows[1:]))
    return ConvergenceReport(rows=rows, monotone=monotone)


# ===== 平面包络 =====

class PlaneEnvelope(BaseModel):
    """|F - ν·x - b| <= δ"""

    nu: List[float]
    b: float = 0.0
    delta: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "PlaneEnvelope":
        if not self.nu:
            raise ParameterError("参数错误：nu 不能为空")
        return self

    @property
    def slope(self) -> float:
        return float(np.linalg.norm(self.nu))

    def plane(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(x, dtype=float)) @ np.asarray(self.nu, dtype=float) + self.b


def plane_envelope_check(field: ValueField, env: PlaneEnvelope, slack: Optional[float] = None) -> bool:
    """
    ν·x + b - δ <= u <= ν·x + b + δ 是否处处成立

    Raises:
        UsageError: 边界数据本身不满足包络假设
    """
    slack = load_settings().solver.comparison_slack if slack is None else slack
    d = field.domain
    plane = env.plane(d.points)
    strip_gap = np.abs(field.boundary_data - plane[d.strip_indices])
    if np.any(strip_gap > env.delta + 1e-12):
        bad = int(d.strip_indices[int(np.argmax(strip_gap))])
        raise UsageError(f"用法错误：边界点 {d.points[bad].tolist()} 违反包络 |F - ν·x - b| <= δ")
    return bool(np.all(np.abs(field.values - plane) <= env.delta + slack))


def improved_lipschitz_check(
    field: ValueField,
    env: PlaneEnvelope,
    params: GameParams,
    center: Sequence[float],
    r: float,
    guard_c: Optional[float] = None,
) -> LipschitzReport:
    """
    B_r(center) 内 |x-y| >= 10ε 的内部点对上的超额斜率

    excess = max (|u(x)-u(y)| - (5|ν| + guardC·δ)ε)/|x-y|，与 |ν| + guardC·δ 比较。
    另给出实测常数 (max |Δu|/|x-y| - |ν|)/δ。

    Raises:
        QueryError: 球不在内部区域内或没有合格点对
    """
    guard_c = load_settings().barrier.guard_c if guard_c is None else guard_c
    d = field.domain
    center = np.asarray(center, dtype=float)
    if not d.spec.contains_ball(center, r):
        raise QueryError("查询错误：B_r(center) 不在内部区域内")
    idx = d.interior_indices[np.linalg.norm(d.points[d.interior_indices] - center, axis=1) < r]
    if idx.size < 2:
        raise QueryError("查询错误：球内内部点不足两个")
    dist = pdist(d.points[idx])
    diff = pdist(field.values[idx][:, None], metric="cityblock")
    ok = dist >= 10 * params.eps * (1 - 1e-12)
    if not np.any(ok):
        raise QueryError("查询错误：没有 |x-y| >= 10ε 的点对")
    nu = env.slope
    allowance = (5 * nu + guard_c * env.delta) * params.eps
    excess = np.where(ok, (diff - allowance) / np.where(ok, dist, 1.0), -np.inf)
    k = int(np.argmax(excess))
    rows, cols = np.triu_indices(idx.size, 1)
    threshold = nu + guard_c * env.delta
    slope = float(np.max(diff[ok] / dist[ok]))
    measured = (slope - nu) / env.delta if env.delta > 0 else 0.0
    return LipschitzReport(
        excess_slope=float(excess[k]),
        threshold=threshold,
        passed=bool(excess[k] <= threshold + 1e-12),
        worst_pair=(int(idx[rows[k]]), int(idx[cols[k]])),
        guard_c=guard_c,
        measured_constant=float(measured),
        pairs=int(np.count_nonzero(ok)),
    )
