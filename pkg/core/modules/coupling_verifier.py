# core/modules/coupling_verifier.py
# 功能：verify-coupling 与 verify-exit-time 两个命令的工作流
# 主要类：CouplingModule（抵消耦合的停止原因、H=0 与抽样日志一致性）,
#        ExitTimeModule（玩家II拉向 z、玩家I远离 z 时的退出时间）

from __future__ import annotations

import numpy as np
import pandas as pd

from core.game_engine import estimate_coupling, exit_time_study
from core.models import GameParams
from core.modules.base import BaseModule, ModuleResult


class CouplingModule(BaseModule):
    """连续位置上的抵消耦合运行"""

    name = "coupling_verifier"
    description = "抵消耦合验证"

    def run(self) -> ModuleResult:
        section = self.config.coupling
        n = self.config.dimension
        center = np.asarray(section.center if section.center is not None else np.zeros(n), dtype=float)
        level = self.settings.diagnostics.ci_level
        rows = []
        for k, (sep, eps) in enumerate(section.pairs):
            shift = np.zeros(n)
            shift[0] = sep / 2
            params = GameParams(p=self.config.params.p, n=n, eps=eps)
            stats = estimate_coupling(center - shift, center + shift, params, section.r,
                                      self.config.trials, self.config.base_seed + k,
                                      threads=self.threads, level=level)
            self.log(f"|x-y|={sep}, ε={eps}: P(C1)={stats.p_c1.estimate:.4f}，"
                     f"P(C2)={stats.p_c2:.4f}，P(C3)={stats.p_c3:.4f}")
            suffix = "" if k == 0 else f"_{k}"
            self.check(f"cancellation_exact{suffix}", stats.h_exact,
                       {"max_h_defect": stats.max_h_defect})
            self.check(f"draw_logs_identical{suffix}", stats.draws_identical)
            self.constant(f"coupling_C{suffix}", stats.fitted_constant)
            rows.append({
                "separation": stats.separation,
                "eps": stats.eps,
                "r": stats.r,
                "trials": stats.trials,
                "p_c1": stats.p_c1.estimate,
                "p_c1_ci": stats.p_c1.half_width,
                "p_c2": stats.p_c2,
                "p_c3": stats.p_c3,
                "fitted_constant": stats.fitted_constant,
                "max_h_defect": stats.max_h_defect,
            })
        self.result.tables["stats"] = pd.DataFrame(rows)
        return self.result


class ExitTimeModule(BaseModule):
    """拉向 z 策略的退出时间"""

    name = "exit_time_verifier"
    description = "退出时间验证"

    def run(self) -> ModuleResult:
        section = self.config.exit_time
        domain = self.build_domain()
        params = self.game_params()
        z = np.asarray(section.z, dtype=float)
        starts = [("start", section.start)]
        if section.shallow_start is not None:
            starts.append(("shallow", section.shallow_start))

        reach = float(np.max(np.linalg.norm(domain.points - z, axis=1)))
        results = {}
        for k, (label, start) in enumerate(starts):
            stats = exit_time_study(domain, z, params, self.config.trials, self.config.base_seed + k,
                                    start, threads=self.threads,
                                    max_rounds=self.settings.simulation.max_rounds)
            results[label] = stats
            self.log(f"{label}: 平均退出轮数 {stats.mean_exit_steps:.1f} ± {stats.stderr:.1f}，"
                     f"漂移常数 {stats.drift_constant:.4f}")
            d0 = float(np.linalg.norm(np.asarray(stats.start) - z))
            self.check(f"drift_positive_{label}", stats.mean_increment > 0,
                       {"mean_increment": stats.mean_increment})
            # E[τ]·平均增量 = E|x_τ - z|² - |x_0 - z|²，不超过 reach² - d0²
            budget = (reach ** 2 - d0 ** 2) / stats.mean_increment if stats.mean_increment > 0 else float("inf")
            self.check(f"exit_time_bound_{label}", stats.mean_exit_steps <= budget * (1 + 1e-12),
                       {"mean_exit_steps": stats.mean_exit_steps, "bound": budget})
            self.constant(f"drift_constant_{label}", stats.drift_constant)
            self.constant(f"scaled_exit_time_{label}", stats.mean_exit_steps * params.eps ** 2)

        if "shallow" in results:
            deep, shallow = results["start"], results["shallow"]
            self.check("shallow_exits_sooner", shallow.mean_exit_steps <= deep.mean_exit_steps,
                       {"shallow": shallow.mean_exit_steps, "deep": deep.mean_exit_steps}, hard=False)

        self.result.tables["stats"] = pd.DataFrame([
            {"label": label, **{k: v for k, v in s.to_dict().items() if k != "start"},
             **{f"start_x{i + 1}": v for i, v in enumerate(s.start)}}
            for label, s in results.items()
        ])
        return self.result
