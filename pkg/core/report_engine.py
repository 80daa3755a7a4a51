# core/report_engine.py
# 功能：运行摘要的模板渲染引擎
# 主要类：ReportEngine
# 核心能力：Jinja2 模板渲染 run_summary.md.j2，自定义过滤器 verdict / sci

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Optional

from jinja2 import Environment, FileSystemLoader, StrictUndefined, Template

from core.models import RunReport


DEFAULT_TEMPLATES = Path(__file__).parent.parent / "config" / "templates"


class ReportEngine:
    """
    运行摘要模板引擎

    模板只拿到 RunReport 的字典形式，不含耗时，渲染结果可逐字节复现。
    """

    def __init__(self, templates_dir: Optional[str | Path] = None):
        """
        Args:
            templates_dir: 模板目录路径，默认 config/templates
        """
        self.templates_dir = Path(templates_dir) if templates_dir else DEFAULT_TEMPLATES
        self.env = Environment(
            loader=FileSystemLoader(str(self.templates_dir)),
            undefined=StrictUndefined,
            keep_trailing_newline=True,
            trim_blocks=True,
            lstrip_blocks=True,
        )
        self._register_filters()

    def _register_filters(self) -> None:
        """注册自定义Jinja2过滤器"""

        def verdict(passed: bool, hard: bool = True) -> str:
            if passed:
                return "PASS"
            return "FAIL" if hard else "note"

        def sci(value: Any, digits: int = 4) -> str:
            """浮点数统一写成科学计数法，其余原样"""
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return str(value)
            return f"{value:.{digits}e}"

        self.env.filters['verdict'] = verdict
        self.env.filters['sci'] = sci

    def load_template(self, template_name: str) -> Template:
        return self.env.get_template(template_name)

    def render(self, template_name: str, context: Dict[str, Any]) -> str:
        return self.load_template(template_name).render(**context)

    def render_summary(self, report: RunReport, template_name: str = "run_summary.md.j2") -> str:
        """渲染 summary.md"""
        return self.render(template_name, {
            "report": report.to_dict(),
            "passed": report.passed,
            "failed": [c.name for c in report.failed_checks()],
        })

    def list_templates(self) -> List[str]:
        """列出所有可用模板"""
        return self.env.list_templates()
