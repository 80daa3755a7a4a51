# tests/test_reference_analysis.py
# 功能：测试参考解、残差算子、收敛研究与 Lipschitz 工具
# 验证点：
#   1. 残差算子对仿射函数为 0，对 |x|² 为 2n + 2(p-2)
#   2. 径向参考解的残差很小且随 h² 缩小，能通过认证；不按 h² 缩小的函数不能通过
#   3. 平面边界数据下的收敛研究误差接近 0，径向参考解的误差随 ε 缩小
#   4. 弱梯度配对、平面包络与改进 Lipschitz 检查

import sys
sys.path.insert(0, '.')

import numpy as np
import pytest

from core.domain_grid import build_grid
from core.dpp_core import boundary_from_function, solve_dpp
from core.errors import DegenerateGradientError, DomainError, ParameterError, QueryError, UsageError
from core.models import DomainSpec, GameParams
from core.reference_analysis import (
    BumpField, PlaneEnvelope, affine_reference, certify_reference, convergence_study,
    improved_lipschitz_check, p_laplacian_residual, plane_envelope_check, radial_reference,
    weak_gradient_pairing,
)


def test_residual_of_affine():
    ref = affine_reference([0.6, -0.8], b=0.3)
    assert abs(p_laplacian_residual(ref.evaluate, [0.2, 0.7], 1e-3, 4.0)) < 1e-6


def test_residual_of_square_norm():
    """u = |x|²：Δu = 2n，⟨D²u g, g⟩ = 2"""
    u = lambda x: np.sum(x ** 2, axis=1)
    for p, n in ((4.0, 2), (3.0, 3)):
        x = np.full(n, 0.4)
        expected = 2 * n + 2 * (p - 2)
        assert p_laplacian_residual(u, x, 1e-3, p) == pytest.approx(expected, abs=1e-5)


def test_degenerate_gradient():
    with pytest.raises(DegenerateGradientError):
        p_laplacian_residual(lambda x: np.sum(x ** 2, axis=1), [0.0, 0.0], 1e-3, 4.0)


def test_radial_reference_residual_and_order():
    ref = radial_reference(4.0, 2)
    assert ref.kappa == pytest.approx(2 / 3)
    r1 = p_laplacian_residual(ref.evaluate, [0.5, 0.0], 1e-2, 4.0)
    r2 = p_laplacian_residual(ref.evaluate, [0.5, 0.0], 5e-3, 4.0)
    # h = 1e-3 时中心差分的截断误差约 4e-6，1e-6 达不到
    assert abs(p_laplacian_residual(ref.evaluate, [0.5, 0.0], 1e-3, 4.0)) <= 1e-5
    assert 3.5 <= r1 / r2 <= 4.5, f"h 减半时残差之比 {r1 / r2:.2f}"


def test_radial_reference_certified():
    ref = radial_reference(4.0, 2, center=[0.0, 0.0])
    cert = certify_reference(ref, 4.0, [[0.5, 0.0], [0.0, 0.7], [0.4, 0.4], [-0.6, 0.3]])
    assert cert["certified"] == 1.0
    assert cert["max_residual"] <= 2e-5
    assert 3.5 <= cert["median_ratio"] <= 4.5
    assert cert["ratio_points"] == 4.0


class SquareNorm:
    """|x|²：残差恒为 2n + 2(p-2)，不随 h 缩小"""

    def evaluate(self, x):
        return np.sum(np.atleast_2d(x) ** 2, axis=1)


def test_certification_needs_second_order_decay():
    """残差在容差内，但 h 减半时不按 h² 缩小，不能通过"""
    cert = certify_reference(SquareNorm(), 4.0, [[0.5, 0.0], [0.3, 0.4]], tol=100.0)
    assert cert["max_residual"] <= 100.0
    assert cert["median_ratio"] == pytest.approx(1.0, abs=1e-3)
    assert cert["in_band"] == 0.0
    assert cert["certified"] == 0.0


def test_certification_tolerance_is_per_point():
    ref = radial_reference(4.0, 2)
    cert = certify_reference(ref, 4.0, [[0.5, 0.0], [0.7, 0.0]], tol=1e-9)
    assert cert["certified"] == 0.0


def test_radial_reference_homogeneous():
    ref = radial_reference(5.0, 3)
    x = np.array([[0.1, 0.2, 0.3]])
    assert ref.evaluate(2 * x)[0] == pytest.approx(2 ** ref.kappa * ref.evaluate(x)[0])
    with pytest.raises(DomainError):
        ref.evaluate(np.zeros((1, 3)))


@pytest.mark.parametrize("p, n", [(2.0, 2), (3.0, 3), (4.0, 1)])
def test_radial_reference_rejected(p, n):
    with pytest.raises(ParameterError):
        radial_reference(p, n)


def test_convergence_study_with_plane(unit_square):
    ref = affine_reference([1.0, 0.0])
    rows = []
    report = convergence_study(
        unit_square, ref, [0.25, 0.125], h_ratio=0.5, p=4.0,
        scan_center=[0.5, 0.5], scan_r=0.3, scan_min_separation=0.125, tol=1e-10,
        bump=BumpField(center=[0.5, 0.5], radius=0.15),
        on_row=lambda row, field: rows.append(row.eps),
    )
    assert rows == [0.25, 0.125]
    for row in report.rows:
        assert row.sup_error < 1e-6, f"ε={row.eps} 时平面误差 {row.sup_error:.3e}"
        assert row.max_gradient == pytest.approx(1.0, abs=1e-5)
        assert row.pairing_gap < 1e-6
    assert report.gradient_spread() < 1e-4


def test_convergence_study_requires_descending(unit_square):
    with pytest.raises(UsageError, match="降序"):
        convergence_study(unit_square, affine_reference([1.0, 0.0]), [0.1, 0.2], 0.5, 4.0,
                          [0.5, 0.5], 0.3, 0.1)


def test_weak_gradient_pairing(plane_field):
    ref = affine_reference([1.0, 0.0])
    bump = BumpField(center=[0.5, 0.5], radius=0.2)
    pf, pr = weak_gradient_pairing(plane_field, bump, ref)
    assert pr > 0
    assert pf == pytest.approx(pr, rel=1e-6)
    zero = BumpField(center=[0.5, 0.5], radius=0.2, amplitude=0.0)
    assert weak_gradient_pairing(plane_field, zero, ref) == (0.0, 0.0)
    with pytest.raises(DomainError):
        weak_gradient_pairing(plane_field, BumpField(center=[0.5, 0.5], radius=0.4), ref)


def test_bump_vanishes_outside_support():
    bump = BumpField(center=[0.0, 0.0], radius=0.5, direction=[0.0, 2.0])
    values = bump.evaluate(np.array([[0.0, 0.0], [0.6, 0.0]]))
    assert np.allclose(values[0], [0.0, 2.0])
    assert np.all(values[1] == 0)


def test_plane_envelope(plane_field):
    assert plane_envelope_check(plane_field, PlaneEnvelope(nu=[1.0, 0.0]), slack=1e-8)
    with pytest.raises(UsageError, match="包络"):
        plane_envelope_check(plane_field, PlaneEnvelope(nu=[0.0, 1.0], delta=0.1))


def test_improved_lipschitz_on_plane():
    spec = DomainSpec.box([0.0, 0.0], [2.0, 2.0])
    domain = build_grid(spec, 0.05, 0.1)
    params = GameParams(p=4.0, n=2, eps=0.1)
    F = boundary_from_function(domain, lambda x: x[:, 0])
    field, _ = solve_dpp(domain, F, params, tol=1e-10)
    report = improved_lipschitz_check(field, PlaneEnvelope(nu=[1.0, 0.0]), params, [1.0, 1.0], 0.9, guard_c=50.0)
    assert report.passed
    assert report.pairs > 0
    assert report.threshold == pytest.approx(1.0)
    assert report.measured_constant == 0.0


def test_improved_lipschitz_needs_pairs(plane_field, params4):
    with pytest.raises(QueryError, match="10ε"):
        improved_lipschitz_check(plane_field, PlaneEnvelope(nu=[1.0, 0.0]), params4, [0.5, 0.5], 0.45)


def test_convergence_study_with_radial_reference():
    """|x|^{2/3} 在圆环上：ε 减半，内部上确界误差变小"""
    spec = DomainSpec.annulus([0.0, 0.0], 0.25, 1.0)
    report = convergence_study(
        spec, radial_reference(4.0, 2), [0.2, 0.1], h_ratio=0.25, p=4.0,
        scan_center=[0.6, 0.0], scan_r=0.2, scan_min_separation=0.1, tol=1e-6,
    )
    first, second = report.rows
    assert second.sup_error < first.sup_error, (
        f"ε=0.1 的误差 {second.sup_error:.3e} 不小于 ε=0.2 的 {first.sup_error:.3e}"
    )
    assert report.monotone
    assert np.isfinite(second.max_gradient) and second.max_gradient > 0
