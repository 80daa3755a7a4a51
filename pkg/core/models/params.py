# core/models/params.py
# 功能：博弈参数与连续区域描述
# 主要类：GameParams, BoxShape, BallShape, AnnulusShape, DomainSpec
# 主要函数：alpha_beta()（硬币概率 α=(p-2)/(n+p), β=1-α）

from __future__ import annotations

from typing import Annotated, List, Literal, Tuple, Union

import numpy as np
from pydantic import Field, model_validator

from .base import BaseModel
from core.errors import ConfigurationError, ParameterError


def alpha_beta(p: float, n: int) -> Tuple[float, float]:
    """
    返回有偏硬币的两个概率

    Raises:
        ParameterError: p <= 2 或 n < 2（一维只用于势垒模型，见 BarrierParams）
    """
    if not p > 2:
        raise ParameterError(f"参数错误：需要 p > 2（p={p}）")
    if n < 2:
        raise ParameterError(f"参数错误：需要 n >= 2（n={n}）")
    alpha = (p - 2.0) / (n + p)
    return alpha, 1.0 - alpha


class GameParams(BaseModel):
    """指数 p、维数 n、步长上界 ε；α、β 由 p、n 推出"""

    p: float = Field(..., description="指数，2 < p < ∞")
    n: int = Field(..., description="维数")
    eps: float = Field(..., gt=0, description="步长上界 ε")

    @model_validator(mode="after")
    def _check(self) -> "GameParams":
        alpha_beta(self.p, self.n)
        if not np.isfinite(self.p):
            raise ParameterError("参数错误：p = ∞ 不受支持")
        return self

    @property
    def alpha(self) -> float:
        return alpha_beta(self.p, self.n)[0]

    @property
    def beta(self) -> float:
        return alpha_beta(self.p, self.n)[1]


# ===== 区域形状 =====

class BoxShape(BaseModel):
    """轴对齐长方体 [lo, hi]"""
    kind: Literal["box"] = "box"
    lo: List[float]
    hi: List[float]

    @model_validator(mode="after")
    def _check(self) -> "BoxShape":
        if len(self.lo) != len(self.hi):
            raise ConfigurationError("配置错误：box 的 lo 与 hi 维数不同")
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ConfigurationError("配置错误：box 需要 lo < hi（逐分量）")
        return self

    @property
    def dimension(self) -> int:
        return len(self.lo)

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        below = np.maximum(lo - x, 0.0)
        above = np.maximum(x - hi, 0.0)
        outside = np.sqrt(np.sum((below + above) ** 2, axis=1))
        depth = np.min(np.minimum(x - lo, hi - x), axis=1)
        return np.where(outside > 0, outside, -depth)

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)


class BallShape(BaseModel):
    """开球 B_R(center)"""
    kind: Literal["ball"] = "ball"
    center: List[float]
    radius: float = Field(..., gt=0)

    @property
    def dimension(self) -> int:
        return len(self.center)

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.linalg.norm(x - np.asarray(self.center), axis=1) - self.radius

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius


class AnnulusShape(BaseModel):
    """环形区域 inner_radius < |x - center| < outer_radius"""
    kind: Literal["annulus"] = "annulus"
    center: List[float]
    inner_radius: float
    outer_radius: float

    @model_validator(mode="after")
    def _check(self) -> "AnnulusShape":
        if not 0 < self.inner_radius < self.outer_radius:
            raise ConfigurationError(
                "配置错误：annulus 需要 0 < inner_radius < outer_radius"
            )
        return self

    @property
    def dimension(self) -> int:
        return len(self.center)

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        rho = np.linalg.norm(x - np.asarray(self.center), axis=1)
        return np.maximum(self.inner_radius - rho, rho - self.outer_radius)

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=float)
        return c - self.outer_radius, c + self.outer_radius


Shape = Annotated[Union[BoxShape, BallShape, AnnulusShape], Field(discriminator="kind")]


class DomainSpec(BaseModel):
    """
    连续区域 Ω 的描述

    signed_distance 在 Ω 内为负（取负的到边界距离），边界上为 0，外部为到 ∂Ω 的距离。
    """

    shape: Shape

    @model_validator(mode="after")
    def _check(self) -> "DomainSpec":
        if self.shape.dimension < 2:
            raise ConfigurationError(f"配置错误：需要维数 n >= 2（n={self.shape.dimension}）")
        return self

    @classmethod
    def box(cls, lo, hi) -> "DomainSpec":
        return cls(shape=BoxShape(lo=list(lo), hi=list(hi)))

    @classmethod
    def ball(cls, center, radius: float) -> "DomainSpec":
        return cls(shape=BallShape(center=list(center), radius=radius))

    @classmethod
    def annulus(cls, center, inner_radius: float, outer_radius: float) -> "DomainSpec":
        return cls(shape=AnnulusShape(
            center=list(center), inner_radius=inner_radius, outer_radius=outer_radius,
        ))

    @property
    def dimension(self) -> int:
        return self.shape.dimension

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        return self.shape.signed_distance(x)

    def contains_ball(self, center, radius: float) -> bool:
        """闭球 B_radius(center) 是否完全落在 Ω 内"""
        return bool(self.signed_distance(np.asarray(center, dtype=float))[0] <= -radius)
