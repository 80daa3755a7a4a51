# core/trials.py
# 功能：独立随机试验的调度与固定顺序归约
# 主要函数：run_trials(), normal_quantile(), mean_interval(), proportion_interval()
# 约定：第 i 次试验的种子为 derive_seed(baseSeed, i)；结果按 i 排列，与线程调度无关

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np
from scipy import stats

from core.errors import TrialError
from core.models import Interval
from core.rng import derive_seed

T = TypeVar("T")


def resolve_threads(threads: Optional[int]) -> int:
    """None 表示使用全部可用核数"""
    if threads is None:
        return max(1, os.cpu_count() or 1)
    return max(1, int(threads))


def run_trials(
    task: Callable[[int, int], T],
    trials: int,
    base_seed: int,
    threads: Optional[int] = 1,
) -> List[T]:
    """
    执行 trials 次独立试验

    Args:
        task: task(trial_index, seed) -> 结果
        trials: 试验次数
        base_seed: 基础种子
        threads: 线程数，None 为全部核数

    Returns:
        按 trial_index 排列的结果列表

    Raises:
        TrialError: 任一试验抛出异常，携带其序号和种子
    """

    def guarded(i: int) -> T:
        seed = derive_seed(base_seed, i)
        try:
            return task(i, seed)
        except TrialError:
            raise
        except Exception as e:
            raise TrialError(i, seed, e) from e

    workers = resolve_threads(threads)
    if workers == 1 or trials < 2:
        return [guarded(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(guarded, range(trials)))


def normal_quantile(level: float) -> float:
    """双侧置信水平对应的正态分位数，0.95 -> 1.959963..."""
    return float(stats.norm.ppf(0.5 + level / 2.0))


def mean_interval(samples: Sequence[float] | np.ndarray, level: float = 0.95) -> Interval:
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        return Interval(estimate=float(samples.mean()) if samples.size else 0.0, half_width=float("inf"))
    half = normal_quantile(level) * samples.std(ddof=1) / np.sqrt(samples.size)
    return Interval(estimate=float(samples.mean()), half_width=float(half))


def proportion_interval(successes: int, total: int, level: float = 0.95) -> Interval:
    p = successes / total
    half = normal_quantile(level) * np.sqrt(max(p * (1 - p), 0.0) / total)
    return Interval(estimate=float(p), half_width=float(half))
