# core/orchestrator.py
# 功能：运行编排器，读取运行配置、调度命令对应的工作流模块、汇总检查并写出产物
# 主要类：Orchestrator
# 主要函数：load_run_config()
# 产物：<out>/<command>-seed<seed>/ 下的 report.json, stats.csv, field.csv, transcripts.csv（--record）,
#      其他表格 CSV, events.yaml, summary.md；内容只由配置决定，同一配置两次运行逐字节一致

from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Type

from rich.console import Console

from core.errors import ConfigurationError
from core.models import RunConfig, RunReport, event_store
from core.modules import (
    BarrierModule, BaseModule, ConvergenceModule, CouplingModule, CylinderModule, ExitTimeModule,
    LineWalkModule, LipschitzModule, ModuleResult, PlayModule, SolveModule,
)
from core.report_engine import ReportEngine
from core.settings import Settings, load_settings


# 命令 -> (模块类, 构造参数)
DISPATCH: Dict[str, Tuple[Type[BaseModule], Dict[str, Any]]] = {
    "solve": (SolveModule, {}),
    "play": (PlayModule, {}),
    "cylinder": (CylinderModule, {}),
    "linewalk": (LineWalkModule, {"verify": False}),
    "verify-appendixC": (LineWalkModule, {"verify": True}),
    "verify-barriers": (BarrierModule, {}),
    "verify-convergence": (ConvergenceModule, {}),
    "verify-lipschitz": (LipschitzModule, {}),
    "verify-coupling": (CouplingModule, {}),
    "verify-exit-time": (ExitTimeModule, {}),
}

CSV_FLOAT_FORMAT = "%.17g"


def load_run_config(
    path: str | Path,
    command: Optional[str] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    record: Optional[bool] = None,
    out: Optional[str | Path] = None,
) -> RunConfig:
    """
    读取 JSON 运行配置并应用命令行覆盖项

    Raises:
        ConfigurationError: 文件不存在、JSON 语法错误（带行列号）或命令不一致
        pydantic.ValidationError: 字段校验失败（带字段路径）
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"配置错误：配置文件不存在 {path}")
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"配置错误：JSON 解析失败（第 {e.lineno} 行第 {e.colno} 列）：{e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigurationError("配置错误：配置文件顶层必须是 JSON 对象")

    if command is not None:
        declared = data.setdefault("command", command)
        if declared != command:
            raise ConfigurationError(f"配置错误：配置中的 command={declared} 与命令行 {command} 不一致")
    overrides = {"base_seed": seed, "threads": threads, "output_dir": None if out is None else str(out)}
    data.update({k: v for k, v in overrides.items() if v is not None})
    if record:
        data["record"] = True
    return RunConfig.from_dict(data)


class Orchestrator:
    """
    运行编排器

    职责：
    - 每次运行前清空事件存储
    - 按命令调度工作流模块
    - 汇总 RunReport 并写出全部产物
    """

    def __init__(
        self,
        settings: Optional[Settings] = None,
        console: Optional[Console] = None,
        base_dir: Optional[Path] = None,
        report_engine: Optional[ReportEngine] = None,
    ):
        self.settings = settings or load_settings()
        self.console = console or Console()
        self.base_dir = base_dir
        self.report_engine = report_engine or ReportEngine()

    def run(self, config: RunConfig) -> RunReport:
        """
        执行一次运行并写出产物

        Returns:
            RunReport（wall_time 只在内存中）
        """
        event_store.clear()
        started = time.perf_counter()
        module_cls, kwargs = DISPATCH[config.command]
        module = module_cls(config, self.settings, base_dir=self.base_dir, console=self.console, **kwargs)
        module.log(f"开始 {config.command}（seed={config.base_seed}）")
        result = module.run()

        echo = config.to_dict()
        for key in ("threads", "output_dir"):
            echo.pop(key, None)
        report = RunReport(command=config.command, base_seed=config.base_seed, config=echo)
        for check in result.checks:
            report.add_check(check)
        report.constants = dict(result.constants)
        module.log(f"结束：{'全部硬检查通过' if report.passed else '存在未通过的硬检查'}",
                   "info" if report.passed else "error")

        self.emit_report(report, result, Path(config.output_dir) / config.output_name())
        report.wall_time = time.perf_counter() - started
        self.console.print(f"[dim]耗时 {report.wall_time:.2f}s[/dim]")
        return report

    def emit_report(self, report: RunReport, result: ModuleResult, directory: str | Path) -> List[Path]:
        """
        写出 CSV 表、events.yaml、summary.md 与 report.json

        Returns:
            写出的文件路径（report.json 在最后）

        Raises:
            OSError: 目录不可写，消息带路径
        """
        directory = Path(directory)
        try:
            directory.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise OSError(f"无法创建输出目录 {directory}：{e}") from e

        prefix = directory.name
        names = [f"{name}.csv" for name in sorted(result.tables)] + ["events.yaml", "summary.md", "report.json"]
        report.artifacts = [f"{prefix}/{n}" for n in names]

        written: List[Path] = []
        for name in sorted(result.tables):
            path = directory / f"{name}.csv"
            result.tables[name].to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
            written.append(path)
        written.append(event_store.save(directory / "events.yaml"))
        summary = directory / "summary.md"
        with open(summary, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.report_engine.render_summary(report))
        written.append(summary)
        written.append(report.save(directory / "report.json"))
        return written
