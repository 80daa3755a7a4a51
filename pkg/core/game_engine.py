# core/game_engine.py
# 功能：随机步长带噪声拔河博弈的模拟
# 主要类：Strategy（GreedyStrategy / PullStrategy / AwayStrategy / NoopStrategy）, GameTranscript,
#        CancellationState, StoppingMonitor, RoundDraw, ContinuumTranscript, AwayFromZ
# 主要函数：play_game(), greedy_strategy(), pull_strategy(), away_strategy(), one_round_expectation(),
#          estimate_value(), coupled_cancellation_run(), estimate_coupling(), exit_time_study(), transcript_table()
# 两种位置模型：估值博弈在格点上进行（求解器是精确参照）；抵消耦合在连续向量上进行

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Iterator, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd

from core.domain_grid import DiscreteDomain
from core.dpp_core import ValueField, layer_weights
from core.errors import (
    ConfigurationError, ProtocolViolationError, RunawayError,
)
from core.models import CouplingStats, ExitTimeStats, GameParams, ValueEstimate
from core.rng import make_rng, uniform_in_ball
from core.settings import load_settings
from core.trials import proportion_interval, run_trials

NOISE, PLAYER_ONE, PLAYER_TWO = 0, 1, 2

# 连续位移相对步长的最小收缩量，抵消方与默认对手共用
RADIUS_SHRINK_FLOOR = 1e-12


# ===== 策略 =====

class Strategy(ABC):
    """
    格点博弈中获胜一方的落点规则

    choose 收到当前点与开球 B_t 的邻居前缀（按距离、再按点号排序），返回前缀中的某个点号。
    多个落点同样好时取前缀中的第一个，即邻域表序号最小者（距离优先，同距离按字典序）；
    前缀首项是中心点，所以常数场上获胜方原地不动。
    """

    kind: str = "base"

    @abstractmethod
    def choose(self, domain: DiscreteDomain, position: int, prefix: np.ndarray) -> int:
        ...


def _first_best(prefix: np.ndarray, scores: np.ndarray, side: Literal["max", "min"]) -> int:
    """scores 取到极值的落点中在前缀里排在最前的一个"""
    k = np.argmax(scores) if side == "max" else np.argmin(scores)
    return int(prefix[k])


class GreedyStrategy(Strategy):
    """走到值函数在球内的最大（或最小）格点"""

    def __init__(self, field: ValueField, side: Literal["max", "min"]):
        if side not in ("max", "min"):
            raise ConfigurationError(f"配置错误：side 只能是 max 或 min（{side}）")
        self.field = field
        self.side = side
        self.kind = "greedyMax" if side == "max" else "greedyMin"

    def choose(self, domain, position, prefix):
        return _first_best(prefix, self.field.values[prefix], self.side)


class PullStrategy(Strategy):
    """走到球内离 z 最近的格点"""

    kind = "pullToward"

    def __init__(self, z):
        self.z = np.asarray(z, dtype=float)

    def choose(self, domain, position, prefix):
        d2 = np.sum((domain.points[prefix] - self.z) ** 2, axis=1)
        return _first_best(prefix, d2, "min")


class AwayStrategy(Strategy):
    """走到球内离 z 最远的格点（退出时间研究中的对手）"""

    kind = "awayFrom"

    def __init__(self, z):
        self.z = np.asarray(z, dtype=float)

    def choose(self, domain, position, prefix):
        d2 = np.sum((domain.points[prefix] - self.z) ** 2, axis=1)
        return _first_best(prefix, d2, "max")


class NoopStrategy(Strategy):
    """获胜时原地不动"""

    kind = "noop"

    def choose(self, domain, position, prefix):
        return int(position)


def greedy_strategy(field: ValueField, side: Literal["max", "min"]) -> GreedyStrategy:
    return GreedyStrategy(field, side)


def pull_strategy(z) -> PullStrategy:
    return PullStrategy(z)


def away_strategy(z) -> AwayStrategy:
    return AwayStrategy(z)


# ===== 格点博弈 =====

@dataclass
class GameTranscript:
    """
    一局格点博弈的记录

    coins: 每轮硬币结果（0 噪声，1 玩家I，2 玩家II）
    step_bounds: 每轮步长上界（噪声轮为 ε）
    positions: 每轮结束后的点号，最后一项即 exit
    未开启记录时三个数组为空，只保留 rounds / exit / payoff
    """

    start: int
    exit: int
    payoff: float
    rounds: int
    seed: int
    coins: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int8))
    step_bounds: np.ndarray = field(default_factory=lambda: np.empty(0))
    positions: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))


def _payoff_array(domain: DiscreteDomain, payoff: Union[ValueField, np.ndarray]) -> np.ndarray:
    """把 ValueField 或按边界带排列的 F 转成全长数组（只有边界带位置有意义）"""
    if isinstance(payoff, ValueField):
        return payoff.values
    F = np.asarray(payoff, dtype=float)
    if F.shape == (domain.size,):
        return F
    if F.shape != (domain.strip_indices.size,):
        raise ConfigurationError("配置错误：收益数组长度与边界带点数不一致")
    full = np.zeros(domain.size)
    full[domain.strip_indices] = F
    return full


def play_game(
    domain: DiscreteDomain,
    start: int,
    s_one: Strategy,
    s_two: Strategy,
    payoff: Union[ValueField, np.ndarray],
    params: GameParams,
    seed: int,
    max_rounds: Optional[int] = None,
    record: bool = True,
) -> GameTranscript:
    """
    从 start 出发进行一局博弈直到进入边界带

    每轮：以概率 α 抛出正面，抽 ε_k ~ U[0, ε]，再用公平硬币决定走子方，走子方在开球 B_{ε_k} 内按策略落子；
    反面时在 B_ε 的格点（含中心）上均匀随机移动。

    Raises:
        ConfigurationError: start 不是内部点，或 B_ε 内只有中心点
        ProtocolViolationError: 策略落点不在开球内
        RunawayError: 轮数超过上限
    """
    domain.require_neighbors()
    if not domain.is_interior(start):
        raise ConfigurationError(f"配置错误：起点 {start} 不是内部点")
    cap = load_settings().simulation.max_rounds if max_rounds is None else max_rounds
    values = _payoff_array(domain, payoff)
    rng = make_rng(seed)
    alpha, eps = params.alpha, domain.eps
    dist = domain.neighbor_dist
    table = domain.neighbor_table
    row_of = domain.interior_row
    region = domain.region
    width = dist.shape[0]

    coins: List[int] = []
    steps: List[float] = []
    positions: List[int] = []
    pos, rounds = int(start), 0

    while True:
        if rounds >= cap:
            raise RunawayError(f"博弈超过 {cap} 轮仍未结束（seed={seed}）")
        row = table[row_of[pos]]
        if rng.random() < alpha:
            t = rng.random() * eps
            mover = PLAYER_ONE if rng.random() < 0.5 else PLAYER_TWO
            count = int(np.searchsorted(dist, t, side="left"))
            if count == 0:
                new = pos
            else:
                prefix = row[:count]
                strategy = s_one if mover == PLAYER_ONE else s_two
                new = strategy.choose(domain, pos, prefix)
                if not np.any(prefix == new):
                    raise ProtocolViolationError(
                        f"策略 {strategy.kind} 的落点 {new} 不在 B_t(x_{pos}) 内（t={t}）"
                    )
            coin, step = mover, t
        else:
            new = int(row[rng.integers(width)])
            coin, step = NOISE, eps
        rounds += 1
        pos = int(new)
        if record:
            coins.append(coin)
            steps.append(step)
            positions.append(pos)
        if region[pos] == 1:
            break

    return GameTranscript(
        start=int(start), exit=pos, payoff=float(values[pos]), rounds=rounds, seed=seed,
        coins=np.asarray(coins, dtype=np.int8),
        step_bounds=np.asarray(steps, dtype=float),
        positions=np.asarray(positions, dtype=np.int64),
    )


def one_round_expectation(
    domain: DiscreteDomain,
    point: int,
    s_one: Strategy,
    s_two: Strategy,
    values: np.ndarray,
    params: GameParams,
) -> float:
    """
    单轮后 u(x_1) 的精确期望：对邻域距离分层枚举 t，逐层询问双方策略

    两方都贪心时结果等于 T(u)(x)。
    """
    dist, table = domain.neighbors(point)
    weights = layer_weights(dist, domain.eps)
    tug = 0.0
    for k in np.flatnonzero(weights > 0):
        prefix = table[:k + 1]
        a = s_one.choose(domain, point, prefix)
        b = s_two.choose(domain, point, prefix)
        tug += weights[k] * 0.5 * (values[a] + values[b])
    return params.alpha * tug + params.beta * float(np.mean(values[table]))


def estimate_value(
    domain: DiscreteDomain,
    start: int,
    s_one: Strategy,
    s_two: Strategy,
    payoff: Union[ValueField, np.ndarray],
    params: GameParams,
    trials: int,
    base_seed: int,
    threads: Optional[int] = 1,
    max_rounds: Optional[int] = None,
    record: int = 0,
) -> Tuple[ValueEstimate, List[GameTranscript]]:
    """
    独立对局的收益均值与标准误

    Args:
        record: 保留前 record 局的完整记录

    Raises:
        ConfigurationError: trials < 2
        TrialError: 某局失败
    """
    if trials < 2:
        raise ConfigurationError(f"配置错误：需要 trials >= 2（trials={trials}）")

    def task(i: int, seed: int) -> GameTranscript:
        return play_game(domain, start, s_one, s_two, payoff, params, seed,
                         max_rounds=max_rounds, record=i < record)

    games = run_trials(task, trials, base_seed, threads)
    pay = np.array([g.payoff for g in games])
    estimate = ValueEstimate(
        mean=float(pay.mean()),
        stderr=float(pay.std(ddof=1) / np.sqrt(trials)),
        trials=trials,
        base_seed=base_seed,
    )
    return estimate, [g for g in games[:record]]


# ===== 抵消耦合（连续位置） =====

@dataclass(frozen=True)
class RoundDraw:
    """一轮的共享随机量：正面时为 (step, winner)，反面时为 noise"""
    heads: bool
    step: float = 0.0
    winner: int = 0
    noise: Tuple[float, ...] = ()


@dataclass
class CancellationState:
    """
    抵消方的账本

    uncancelled: V_k，对手位移中尚未抵消的部分
    progress: 沿 (x - z)/|x - z| 方向尚未走完的距离
    """
    round_index: int
    uncancelled: np.ndarray
    progress: float
    anchor: np.ndarray
    z: np.ndarray
    direction: np.ndarray
    cancelled_total: float = 0.0

    @classmethod
    def start(cls, anchor: np.ndarray, z: np.ndarray) -> "CancellationState":
        gap = anchor - z
        dist = float(np.linalg.norm(gap))
        return cls(0, np.zeros_like(anchor), dist, anchor.copy(), z.copy(), gap / dist)

    def move(self, step: float) -> np.ndarray:
        """
        半径 (1 - 2^{-k-1})·step 内的抵消位移，k 为全局轮次（从 0 起）

        k 较大时 1 - 2^{-k-1} 在浮点下等于 1，收缩量不小于 RADIUS_SHRINK_FLOOR，保证位移严格落在开球内。
        """
        shrink = max(2.0 ** (-self.round_index - 1), RADIUS_SHRINK_FLOOR)
        radius = (1.0 - shrink) * step
        out = np.zeros_like(self.uncancelled)
        size = float(np.linalg.norm(self.uncancelled))
        budget = radius
        if size > 0:
            cancel = min(size, budget)
            if cancel == size:
                out -= self.uncancelled
                self.uncancelled = np.zeros_like(self.uncancelled)
            else:
                shift = self.uncancelled * (cancel / size)
                out -= shift
                self.uncancelled = self.uncancelled - shift
            self.cancelled_total += cancel
            budget -= cancel
        if self.progress > 0 and budget > 0:
            advance = min(self.progress, budget)
            out -= self.direction * advance
            self.progress = 0.0 if advance == self.progress else self.progress - advance
        return out

    def absorb(self, displacement: np.ndarray) -> None:
        """记录对手的一次位移"""
        self.uncancelled = self.uncancelled + displacement

    @property
    def settled(self) -> bool:
        return self.progress == 0.0 and not np.any(self.uncancelled)


@dataclass
class StoppingMonitor:
    """停止条件 C1–C3 的监视器（a_j 按 x 轨迹的玩家标号：玩家I获胜为 +1）"""
    gap: float
    eps: float
    r: float
    signed_budget: float = 0.0
    noise_sum: Optional[np.ndarray] = None

    def update(self, draw: RoundDraw, n: int) -> None:
        if self.noise_sum is None:
            self.noise_sum = np.zeros(n)
        if draw.heads:
            self.signed_budget += draw.step if draw.winner == PLAYER_ONE else -draw.step
        else:
            self.noise_sum = self.noise_sum + np.asarray(draw.noise)

    def stop_cause(self) -> Optional[str]:
        if self.signed_budget < -self.gap - self.eps:
            return "C1"
        if self.signed_budget >= self.r:
            return "C2"
        if self.noise_sum is not None and np.linalg.norm(self.noise_sum) > self.r:
            return "C3"
        return None


class AwayFromZ:
    """默认对手：整步远离 z（z 处取第一坐标轴方向）"""

    def move(self, position: np.ndarray, z: np.ndarray, step: float) -> np.ndarray:
        gap = position - z
        norm = float(np.linalg.norm(gap))
        direction = gap / norm if norm > 0 else np.eye(position.size)[0]
        return direction * (step * (1 - RADIUS_SHRINK_FLOOR))


@dataclass
class ContinuumTranscript:
    """一条连续位置轨迹"""
    start: np.ndarray
    canceller: int
    coins: List[int] = field(default_factory=list)
    positions: List[np.ndarray] = field(default_factory=list)
    draws: List[RoundDraw] = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.positions[-1] if self.positions else self.start


def _draw_stream(rng: np.random.Generator, alpha: float, eps: float, n: int) -> Iterator[RoundDraw]:
    while True:
        if rng.random() < alpha:
            t = rng.random() * eps
            winner = PLAYER_ONE if rng.random() < 0.5 else PLAYER_TWO
            yield RoundDraw(True, float(t), winner)
        else:
            yield RoundDraw(False, noise=tuple(float(v) for v in uniform_in_ball(rng, eps, n)))


def coupled_cancellation_run(
    x,
    y,
    params: GameParams,
    r: float,
    seed: int,
    adversary=None,
    domain=None,
    max_rounds: Optional[int] = None,
    draws: Optional[Iterator[RoundDraw]] = None,
) -> Tuple[ContinuumTranscript, ContinuumTranscript, str, StoppingMonitor]:
    """
    共享全部随机量的两条连续轨迹

    x 轨迹：玩家II执行抵消策略，玩家I为对手；y 轨迹角色镜像（玩家I抵消），
    同一枚公平硬币在 y 轨迹中把胜方标号互换，使两条轨迹的抵消方同时获胜。

    Args:
        domain: 可选 DomainSpec，给出时检查 B_{4r}(z) ⊂ Ω
        draws: 可选的预置随机量序列（测试用），默认由 seed 生成

    Returns:
        (x 轨迹, y 轨迹, 停止原因, 监视器)

    Raises:
        ConfigurationError: x = y、维数不一致或几何前提不满足
        RunawayError: 超过轮数上限
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size != params.n:
        raise ConfigurationError("配置错误：x、y 的维数须等于 params.n")
    if np.array_equal(x, y):
        raise ConfigurationError("配置错误：x = y 时中点退化")
    z = 0.5 * (x + y)
    if not r > 0:
        raise ConfigurationError("配置错误：需要 r > 0")
    if domain is not None and not domain.contains_ball(z, 4 * r):
        raise ConfigurationError("配置错误：B_{4r}(z) 不在 Ω 内")

    cap = load_settings().simulation.max_rounds if max_rounds is None else max_rounds
    adversary = adversary or AwayFromZ()
    n = params.n
    stream = draws if draws is not None else _draw_stream(make_rng(seed), params.alpha, params.eps, n)

    tx = ContinuumTranscript(start=x.copy(), canceller=PLAYER_TWO)
    ty = ContinuumTranscript(start=y.copy(), canceller=PLAYER_ONE)
    books = {id(tx): CancellationState.start(x, z), id(ty): CancellationState.start(y, z)}
    pos = {id(tx): x.copy(), id(ty): y.copy()}
    monitor = StoppingMonitor(gap=float(np.linalg.norm(x - z)), eps=params.eps, r=r)

    k = 0
    while True:
        if k >= cap:
            raise RunawayError(f"耦合运行超过 {cap} 轮（seed={seed}）")
        draw = next(stream)
        for tr in (tx, ty):
            book = books[id(tr)]
            book.round_index = k
            here = pos[id(tr)]
            if draw.heads:
                # y 轨迹中胜方标号互换
                winner = draw.winner if tr is tx else 3 - draw.winner
                if winner == tr.canceller:
                    disp = book.move(draw.step)
                else:
                    disp = np.asarray(adversary.move(here, z, draw.step), dtype=float)
                    book.absorb(disp)
                if draw.step > 0 and np.linalg.norm(disp) >= draw.step:
                    raise ProtocolViolationError("连续位移不在开球 B_{ε_k} 内")
                here = here + disp
                coin = winner
            else:
                here = here + np.asarray(draw.noise)
                coin = NOISE
            pos[id(tr)] = here
            tr.coins.append(coin)
            tr.positions.append(here.copy())
            tr.draws.append(draw)
        monitor.update(draw, n)
        k += 1
        cause = monitor.stop_cause()
        if cause is not None:
            return tx, ty, cause, monitor


def h_defect(transcript: ContinuumTranscript, z: np.ndarray, monitor: StoppingMonitor) -> float:
    """|x_τ' - z - Σh|"""
    return float(np.linalg.norm(transcript.final - z - monitor.noise_sum))


def estimate_coupling(
    x,
    y,
    params: GameParams,
    r: float,
    trials: int,
    base_seed: int,
    threads: Optional[int] = 1,
    level: float = 0.95,
) -> CouplingStats:
    """
    重复耦合运行，统计停止原因并拟合 C = (1 - P(C1)) / (|x - y| + ε)
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = 0.5 * (x + y)

    def task(i: int, seed: int):
        tx, ty, cause, mon = coupled_cancellation_run(x, y, params, r, seed)
        steps = len(tx.positions)
        defect = 0.0
        if cause == "C1":
            defect = max(h_defect(tx, z, mon), h_defect(ty, z, mon)) / steps
        same = tx.draws == ty.draws
        return cause, defect, same

    results = run_trials(task, trials, base_seed, threads)
    causes = [c for c, _, _ in results]
    c1 = causes.count("C1")
    defects = [d for c, d, _ in results if c == "C1"]
    max_defect = max(defects) if defects else 0.0
    sep = float(np.linalg.norm(x - y))
    p_c1 = proportion_interval(c1, trials, level)
    return CouplingStats(
        separation=sep,
        eps=params.eps,
        r=r,
        trials=trials,
        base_seed=base_seed,
        p_c1=p_c1,
        p_c2=causes.count("C2") / trials,
        p_c3=causes.count("C3") / trials,
        fitted_constant=(1.0 - p_c1.estimate) / (sep + params.eps),
        max_h_defect=max_defect,
        h_exact=max_defect <= 1e-9,
        draws_identical=all(same for _, _, same in results),
    )


# ===== 退出时间 =====

def exit_time_study(
    domain: DiscreteDomain,
    z,
    params: GameParams,
    trials: int,
    base_seed: int,
    start,
    threads: Optional[int] = 1,
    max_rounds: Optional[int] = None,
) -> ExitTimeStats:
    """
    玩家II拉向 z、玩家I远离 z 时的平均退出轮数，以及每轮 |x_k - z|² 增量的平均

    Raises:
        ConfigurationError: trials < 100 或 z 不在区域的包围盒内
    """
    if trials < 100:
        raise ConfigurationError(f"配置错误：exit_time_study 需要 trials >= 100（trials={trials}）")
    z = np.asarray(z, dtype=float)
    lo, hi = domain.spec.shape.bounding_box()
    if np.any(z < lo - domain.eps) or np.any(z > hi + domain.eps):
        raise ConfigurationError("配置错误：z 不在区域的包围范围内")
    start_index = domain.index_of(start)
    s_one, s_two = away_strategy(z), pull_strategy(z)
    zero = np.zeros(domain.strip_indices.size)

    def task(i: int, seed: int):
        game = play_game(domain, start_index, s_one, s_two, zero, params, seed,
                         max_rounds=max_rounds, record=True)
        path = np.concatenate([[start_index], game.positions])
        d2 = np.sum((domain.points[path] - z) ** 2, axis=1)
        return game.rounds, float(np.sum(np.diff(d2)))

    results = run_trials(task, trials, base_seed, threads)
    rounds = np.array([r for r, _ in results], dtype=float)
    total_increment = float(sum(s for _, s in results))
    mean_inc = total_increment / float(rounds.sum())
    return ExitTimeStats(
        eps=params.eps,
        trials=trials,
        base_seed=base_seed,
        start=[float(v) for v in domain.points[start_index]],
        mean_exit_steps=float(rounds.mean()),
        stderr=float(rounds.std(ddof=1) / np.sqrt(trials)),
        mean_increment=mean_inc,
        drift_constant=mean_inc / params.eps ** 2,
    )


def transcript_table(domain: DiscreteDomain, games: List[GameTranscript]) -> pd.DataFrame:
    """对局记录导出表：trial, round, coin, step_bound, position, x1..xn（第 0 行为起点）"""
    frames = []
    for trial, game in enumerate(games):
        path = np.concatenate([[game.start], game.positions]).astype(np.int64)
        data = {
            "trial": np.full(path.size, trial),
            "round": np.arange(path.size),
            "coin": np.concatenate([[-1], game.coins]).astype(int),
            "step_bound": np.concatenate([[0.0], game.step_bounds]),
            "position": path,
        }
        for k in range(domain.n):
            data[f"x{k + 1}"] = domain.points[path, k]
        frames.append(pd.DataFrame(data))
    if not frames:
        return pd.DataFrame(columns=["trial", "round", "coin", "step_bound", "position"])
    return pd.concat(frames, ignore_index=True)
