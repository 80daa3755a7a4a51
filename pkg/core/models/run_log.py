# core/models/run_log.py
# 运行事件日志模型
# 功能：记录各工作流模块的关键事件（阶段、级别、消息、附带数值），用于复查一次运行
# 支持：持久化到运行输出目录的 events.yaml；记录中不含时间，保证产物可逐字节复现

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional
import yaml
from pydantic import Field

from .base import BaseModel


class RunEvent(BaseModel):
    """一条运行事件"""

    seq: int = 0
    module: str = ""
    stage: str = ""          # solve, play, cylinder, linewalk, verify-*
    level: Literal["info", "warning", "error", "debug"] = "info"
    message: str = ""
    data: Dict[str, Any] = Field(default_factory=dict)


class RunEventStore:
    """运行事件存储（内存 + 文件持久化）"""

    _instance: Optional['RunEventStore'] = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._events: List[RunEvent] = []
        return cls._instance

    def add(self, event: RunEvent) -> RunEvent:
        """添加事件，自动编号"""
        event.seq = len(self._events)
        self._events.append(event)
        return event

    def get_by_stage(self, stage: str) -> List[RunEvent]:
        return [e for e in self._events if e.stage == stage]

    def get_all(self) -> List[RunEvent]:
        return list(self._events)

    def save(self, path: str | Path) -> Path:
        """写出全部事件到 YAML 文件"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = [e.to_dict() for e in self._events]
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            yaml.dump(data, f, allow_unicode=True, default_flow_style=False, sort_keys=False)
        return path

    def clear(self) -> None:
        """清空内存中的事件（每次运行开始时调用）"""
        self._events = []


# 全局单例
event_store = RunEventStore()
