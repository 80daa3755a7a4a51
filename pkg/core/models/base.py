# core/models/base.py
# 功能：所有可持久化数据模型的基类，提供YAML/JSON序列化与文件读写
# 主要类：BaseModel
# 主要方法：to_yaml(), from_yaml(), to_json(), save(), load()
# 注意：模型中不放时间戳，保证同一配置两次运行的产物逐字节一致

from __future__ import annotations

from abc import ABC
from pathlib import Path
from typing import Any, Dict, Type, TypeVar
import yaml
from pydantic import BaseModel as PydanticBaseModel, ConfigDict


T = TypeVar('T', bound='BaseModel')


class BaseModel(PydanticBaseModel, ABC):
    """
    所有数据模型的基类

    提供：
    - Pydantic数据验证
    - YAML / JSON 序列化与反序列化
    - 文件存储/加载（按后缀选择格式）
    """

    model_config = ConfigDict(
        arbitrary_types_allowed=True,
        populate_by_name=True,
        validate_assignment=True,
        extra="forbid",
    )

    def to_dict(self) -> Dict[str, Any]:
        """转换为字典（JSON兼容）"""
        return self.model_dump(mode='json')

    def to_yaml(self) -> str:
        """转换为YAML字符串"""
        return yaml.dump(
            self.to_dict(),
            allow_unicode=True,
            default_flow_style=False,
            sort_keys=False,
        )

    def to_json(self) -> str:
        """转换为缩进2的JSON字符串，末尾带换行"""
        return self.model_dump_json(indent=2) + "\n"

    @classmethod
    def from_dict(cls: Type[T], data: Dict[str, Any]) -> T:
        return cls.model_validate(data)

    @classmethod
    def from_yaml(cls: Type[T], yaml_str: str) -> T:
        data = yaml.safe_load(yaml_str)
        return cls.from_dict(data)

    @classmethod
    def from_json(cls: Type[T], json_str: str) -> T:
        return cls.model_validate_json(json_str)

    def save(self, path: str | Path) -> Path:
        """
        保存到文件，.json 后缀写JSON，其余写YAML

        Args:
            path: 文件路径

        Returns:
            实际写入的路径
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        text = self.to_json() if path.suffix == ".json" else self.to_yaml()
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
        return path

    @classmethod
    def load(cls: Type[T], path: str | Path) -> T:
        """
        从文件加载

        Raises:
            FileNotFoundError: 文件不存在
        """
        path = Path(path)
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
        if path.suffix == ".json":
            return cls.from_json(text)
        return cls.from_yaml(text)
