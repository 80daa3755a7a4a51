# ui/cli.py
# 功能：命令行界面入口
# 主要命令：solve, play, cylinder, linewalk, verify-convergence, verify-lipschitz, verify-appendixC,
#          verify-barriers, verify-coupling, verify-exit-time, version
# 退出码：0 全部硬检查通过；1 检查未通过或运行错误；2 配置错误

from pathlib import Path
from typing import Optional

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from core import __version__
from core.errors import ConfigurationError, TwngError
from core.models import COMMANDS, RunReport
from core.orchestrator import Orchestrator, load_run_config


# 创建CLI应用
app = typer.Typer(
    name="twng",
    help="随机步长带噪声拔河博弈实验室 - DPP求解、博弈模拟、游走与势垒验证",
    add_completion=False,
)

# Rich控制台
console = Console()

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

HELP = {
    "solve": "求解 DPP 不动点，输出 field.csv",
    "play": "贪心策略对局，蒙特卡洛估值与求解值比较",
    "cylinder": "圆柱游走出口面频率与趋势",
    "linewalk": "变步长直线游走统计",
    "verify-convergence": "ε → 0 时向 p-调和参考解的收敛",
    "verify-lipschitz": "平面包络与改进 Lipschitz 检查",
    "verify-appendixC": "直线游走的概率与期望界（硬检查）",
    "verify-barriers": "显式势垒的边界条件、残差与鞅诊断",
    "verify-coupling": "抵消耦合的停止原因与 H=0",
    "verify-exit-time": "拉向 z 策略的退出时间",
}


def _validation_message(error: ValidationError) -> str:
    """ValidationError -> 逐条 '字段路径: 消息'"""
    lines = []
    for item in error.errors():
        loc = ".".join(str(part) for part in item.get("loc", ())) or "<root>"
        lines.append(f"  {loc}: {item.get('msg', '')}")
    return "配置校验失败：\n" + "\n".join(lines)


def _print_report(report: RunReport) -> None:
    table = Table(title=f"{report.command}  seed={report.base_seed}")
    table.add_column("检查")
    table.add_column("结论")
    table.add_column("类型")
    for c in report.checks:
        mark = "[green]PASS[/green]" if c.passed else ("[red]FAIL[/red]" if c.hard else "[yellow]note[/yellow]")
        table.add_row(c.name, mark, "硬" if c.hard else "参考")
    console.print(table)
    for name, value in report.constants.items():
        console.print(f"  {name} = {value:.6g}")


def execute(
    command: str,
    config: Path,
    out: Optional[Path] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    record: bool = False,
) -> int:
    """
    运行一个命令并返回退出码

    Returns:
        0 / 1 / 2
    """
    try:
        run_config = load_run_config(config, command=command, seed=seed, threads=threads,
                                     record=record, out=out)
    except ValidationError as e:
        console.print(f"[red]{_validation_message(e)}[/red]")
        return EXIT_CONFIG
    except ConfigurationError as e:
        console.print(f"[red]{e}[/red]")
        return EXIT_CONFIG

    console.print(Panel(f"{command}：{HELP[command]}", style="bold blue"))
    orchestrator = Orchestrator(console=console, base_dir=Path(config).resolve().parent)
    try:
        report = orchestrator.run(run_config)
    except (ConfigurationError, ValidationError) as e:
        console.print(f"[red]{e}[/red]")
        return EXIT_CONFIG
    except TwngError as e:
        console.print(f"[red]运行错误（{type(e).__name__}）：{e}[/red]")
        return EXIT_FAILED
    except OSError as e:
        console.print(f"[red]输出错误：{e}[/red]")
        return EXIT_FAILED

    _print_report(report)
    if report.passed:
        console.print("[green]全部硬检查通过[/green]")
        return EXIT_OK
    console.print(f"[red]未通过：{', '.join(c.name for c in report.failed_checks())}[/red]")
    return EXIT_FAILED


def _register(command: str) -> None:
    """为一个运行命令注册 typer 入口"""

    def handler(
        config: Path = typer.Option(..., "--config", "-c", help="JSON 运行配置"),
        out: Optional[Path] = typer.Option(None, "--out", "-o", help="输出根目录"),
        seed: Optional[int] = typer.Option(None, "--seed", help="基础种子（u64）"),
        threads: Optional[int] = typer.Option(None, "--threads", help="线程数，不影响结果"),
        record: bool = typer.Option(False, "--record", help="保存对局记录 transcripts.csv"),
    ):
        raise typer.Exit(execute(command, config, out, seed, threads, record))

    handler.__doc__ = HELP[command]
    app.command(command)(handler)


for _command in COMMANDS:
    _register(_command)


# ===== 主入口 =====

@app.command("version")
def version():
    """显示版本信息"""
    console.print(f"twng v{__version__}")


@app.callback()
def main():
    """随机步长带噪声拔河博弈实验室"""
    pass


if __name__ == "__main__":
    app()
