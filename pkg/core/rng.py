# core/rng.py
# 功能：可复现的随机数工具
# 主要函数：derive_seed()（splitmix64 雪崩混合 (baseSeed, trialIndex)）, make_rng(), uniform_in_ball()
# 约定：每次试验的种子只由 (baseSeed, trialIndex) 决定，任意一次试验都可单独重放
#
# derive_seed 的逐位定义（全部按 64 位无符号整数取模 2^64）：
#   z = baseSeed + (trialIndex + 1) * 0x9E3779B97F4A7C15
#   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
#   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
#   seed = z ^ (z >> 31)

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(z: int) -> int:
    """splitmix64 的终结混合函数"""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, trial_index: int) -> int:
    """由 (baseSeed, trialIndex) 得到单次试验的 64 位种子"""
    if trial_index < 0:
        raise ValueError("trial_index 不能为负")
    return splitmix64((base_seed + (trial_index + 1) * _GOLDEN) & _MASK64)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def uniform_in_ball(rng: np.random.Generator, radius: float, n: int, size: int | None = None) -> np.ndarray:
    """
    n 维开球内均匀采样：高斯方向归一化乘以半径 radius·U^{1/n}

    Returns:
        size 为 None 时形状 (n,)，否则 (size, n)
    """
    shape = (n,) if size is None else (size, n)
    direction = rng.standard_normal(shape)
    norms = np.linalg.norm(direction, axis=-1, keepdims=True)
    norms = np.where(norms == 0, 1.0, norms)
    u = rng.random(() if size is None else (size, 1))
    return direction / norms * (radius * u ** (1.0 / n))
