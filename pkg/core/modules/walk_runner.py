# core/modules/walk_runner.py
# 功能：cylinder、linewalk、verify-appendixC 三个命令的工作流
# 主要类：CylinderModule（不同 t0 的出口面频率与 1-P(bottom) 的趋势）,
#        LineWalkModule（直线游走统计；verify 模式下各项界限为硬检查）

from __future__ import annotations

import pandas as pd

from core.models import GameParams
from core.modules.base import BaseModule, ModuleResult
from core.walks_barriers import CylinderConfig, estimate_cylinder_stats, estimate_line_stats, hitting_trend


class CylinderModule(BaseModule):
    """B_r × (0, r + t0) 中从 (0, t0) 出发的游走"""

    name = "cylinder_walk"
    description = "圆柱游走"

    def run(self) -> ModuleResult:
        section = self.config.cylinder
        params = GameParams(p=self.config.params.p, n=self.config.dimension, eps=self.config.params.eps)
        level = self.settings.diagnostics.ci_level
        stats = []
        for k, t0 in enumerate(sorted(section.t0_list)):
            cfg = CylinderConfig(r=section.r, t0=t0, height=section.r + t0, params=params)
            s = estimate_cylinder_stats(cfg, self.config.trials, self.config.base_seed + k,
                                        threads=self.threads, level=level)
            self.log(f"t0={t0}: P(bottom)={s.p_bottom.estimate:.4f} ± {s.p_bottom.half_width:.4f}，"
                     f"平均步数 {s.mean_steps:.1f}")
            stats.append(s)

        self.check("faces_exhaustive", all(abs(s.p_bottom.estimate + s.p_top + s.p_side - 1) < 1e-12
                                           for s in stats))
        if len(stats) >= 2:
            trend = hitting_trend(stats)
            self.check("miss_probability_increasing", bool(trend["increasing"]),
                       {"misses": [1 - s.p_bottom.estimate for s in stats]})
            self.check("trend_slope_positive", 0 < trend["slope"] < float("inf"),
                       {"slope": trend["slope"], "intercept": trend["intercept"]})
            self.constant("hitting_constant", trend["fitted_constant"])

        self.result.tables["stats"] = pd.DataFrame([{
            "t0": s.t0,
            "height": s.height,
            "eps": s.eps,
            "trials": s.trials,
            "p_bottom": s.p_bottom.estimate,
            "p_bottom_ci": s.p_bottom.half_width,
            "p_top": s.p_top,
            "p_side": s.p_side,
            "mean_steps": s.mean_steps,
        } for s in stats])
        self.result.data = stats
        return self.result


class LineWalkModule(BaseModule):
    """(0,1) 上的变步长直线游走"""

    name = "line_walk"
    description = "直线游走"

    def __init__(self, *args, verify: bool = False, **kwargs):
        super().__init__(*args, **kwargs)
        self.verify = verify

    def run(self) -> ModuleResult:
        t0, eps = self.config.line.t0, self.config.params.eps
        s = estimate_line_stats(t0, eps, self.config.trials, self.config.base_seed,
                                threads=self.threads, level=self.settings.diagnostics.ci_level)
        hard = self.verify
        lower = 1 - (t0 + eps)
        self.check("bottom_probability", s.p_bottom.estimate >= lower - 3 * s.p_bottom.half_width,
                   {"p_bottom": s.p_bottom.estimate, "ci": s.p_bottom.half_width, "lower_bound": lower},
                   hard=hard)
        target = eps ** 2 / 3
        self.check("second_moment_increment", s.second_moment_increment.contains(target, widen=3.0),
                   {"estimate": s.second_moment_increment.estimate,
                    "ci": s.second_moment_increment.half_width, "target": target}, hard=hard)
        self.check("mean_exit_time_corrected", s.corrected_bound_holds,
                   {"mean_tau": s.mean_tau.estimate, "bound": s.corrected_bound}, hard=hard)
        self.check("mean_exit_time_stated", s.stated_bound_holds,
                   {"mean_tau": s.mean_tau.estimate, "bound": s.stated_bound}, hard=False,
                   detail="(t0+4ε)/ε² 只作记录")
        self.check("overshoot", s.overshoot_ok)
        self.constant("first_moment_increment", s.first_moment_increment.estimate)

        self.result.tables["stats"] = pd.DataFrame([{
            "t0": s.t0,
            "eps": s.eps,
            "trials": s.trials,
            "p_bottom": s.p_bottom.estimate,
            "p_bottom_ci": s.p_bottom.half_width,
            "mean_tau": s.mean_tau.estimate,
            "mean_tau_ci": s.mean_tau.half_width,
            "second_moment_increment": s.second_moment_increment.estimate,
            "second_moment_ci": s.second_moment_increment.half_width,
            "first_moment_increment": s.first_moment_increment.estimate,
            "first_moment_ci": s.first_moment_increment.half_width,
            "stated_bound": s.stated_bound,
            "corrected_bound": s.corrected_bound,
        }])
        self.result.data = s
        return self.result
