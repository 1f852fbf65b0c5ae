"""输出层模块，负责把仿真结果格式化为 JSON / CSV / Markdown 并写入结果目录"""

import io
import json
import logging
import math
import os
from dataclasses import asdict, is_dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from src.config import get_config
from src.utils import encode_complex, write_text_atomic

logger = logging.getLogger(__name__)


def _csv_digits(digits: Optional[int]) -> int:
    return int(digits or get_config("output").get("csv_digits", 9))


class JSONFormatter:
    """JSON格式化器，键排序、缩进 2，浮点数按 repr 输出"""

    @staticmethod
    def default(value: Any) -> Any:
        """json.dumps 无法直接处理的类型"""
        if isinstance(value, complex):
            return encode_complex(value)
        if isinstance(value, np.ndarray):
            if np.iscomplexobj(value):
                return [encode_complex(v) for v in value.ravel()]
            return value.tolist()
        if isinstance(value, np.generic):
            return JSONFormatter.default(value.item()) if isinstance(value, np.complexfloating) else value.item()
        if is_dataclass(value) and not isinstance(value, type):
            return asdict(value)
        raise TypeError(f"无法序列化类型 {type(value).__name__}")

    @staticmethod
    def format_to_json(result: Dict[str, Any]) -> str:
        """
        将结果格式化为JSON字符串

        Args:
            result: 结果字典

        Returns:
            以换行结尾的 JSON 文本
        """
        return json.dumps(result, ensure_ascii=False, indent=2, sort_keys=True,
                          default=JSONFormatter.default) + "\n"


class CSVFormatter:
    """CSV格式化器，数值统一用 %.9g"""

    @staticmethod
    def format_table(columns: Sequence[str], rows: Sequence[Sequence[float]],
                     digits: Optional[int] = None) -> str:
        """
        把数值表格式化为带表头的 CSV

        Args:
            columns: 列名
            rows: 行数据，每行长度与列名相同
            digits: 有效数字位数，默认取配置 output.csv_digits
        """
        table = np.asarray(rows, dtype=float)
        if table.ndim != 2 or table.shape[1] != len(columns):
            raise ValueError(f"表格形状 {table.shape} 与列数 {len(columns)} 不符")
        buffer = io.StringIO()
        np.savetxt(buffer, table, fmt=f"%.{_csv_digits(digits)}g", delimiter=",",
                   header=",".join(columns), comments="")
        return buffer.getvalue()


class MarkdownFormatter:
    """Markdown格式化器，用于终端输出的摘要与验收报告"""

    @staticmethod
    def _cell(value: Any) -> str:
        if isinstance(value, bool):
            return "✅" if value else "❌"
        if isinstance(value, float):
            return "nan" if math.isnan(value) else f"{value:.6g}"
        return str(value)

    @staticmethod
    def format_summary(result: Dict[str, Any], title: str = "结果") -> str:
        """
        格式化单次运行的结果摘要

        Args:
            result: GenerationResult.to_dict() 的输出
            title: 标题
        """
        lines = [f"## {title}\n"]
        for key in ("engine", "success_probability", "fidelity_vs_target", "mean_photon_number", "purity"):
            if key in result:
                lines.append(f"- {key}: {MarkdownFormatter._cell(result[key])}")
        stages = result.get("stages") or []
        if stages:
            lines.append("\n### 各级放大\n")
            lines.append("| depth | phase | count | success_probability | fidelity |")
            lines.append("|---|---|---|---|---|")
            for stage in stages:
                lines.append("| " + " | ".join(MarkdownFormatter._cell(stage.get(k)) for k in
                                                ("depth", "phase", "count", "success_probability", "fidelity"))
                             + " |")
        warnings = result.get("warnings") or []
        if warnings:
            lines.append("\n### 警告\n")
            lines.extend(f"- {w}" for w in warnings)
        return "\n".join(lines) + "\n"

    @staticmethod
    def format_check_report(checks: List[Dict[str, Any]]) -> str:
        """
        验收检查表

        Args:
            checks: 每项含 name, value, target, passed
        """
        lines = ["| 检查项 | 数值 | 目标 | 通过 |", "|---|---|---|---|"]
        for check in checks:
            lines.append("| " + " | ".join(MarkdownFormatter._cell(check.get(k))
                                            for k in ("name", "value", "target", "passed")) + " |")
        passed = sum(1 for check in checks if check.get("passed"))
        lines.append(f"\n共 {len(checks)} 项，通过 {passed} 项")
        return "\n".join(lines) + "\n"


class OutputManager:
    """输出管理器，负责协调各种输出格式化器并写入文件"""

    def __init__(self, directory: Optional[str] = None):
        """
        初始化输出管理器

        Args:
            directory: 结果目录，默认取配置 output.directory
        """
        self.directory = directory or get_config("output").get("directory", "results")

    def format_result(self, result: Dict[str, Any], output_format: str = "markdown") -> str:
        """
        格式化结果

        Args:
            result: 结果字典
            output_format: 输出格式，支持"markdown"、"json"

        Returns:
            格式化后的结果字符串
        """
        if output_format == "markdown":
            return MarkdownFormatter.format_summary(result)
        elif output_format == "json":
            return JSONFormatter.format_to_json(result)
        else:
            return f"不支持的输出格式: {output_format}"

    def path_for(self, filename: str, directory: Optional[str] = None) -> str:
        return os.path.join(directory or self.directory, filename)

    def write_text(self, text: str, filename: str, directory: Optional[str] = None) -> Optional[str]:
        """
        原子写入结果文件

        Returns:
            写入的路径，失败时为 None
        """
        path = self.path_for(filename, directory)
        if not write_text_atomic(text, path):
            return None
        logger.info(f"已写入 {path}", extra={"path": path, "bytes": len(text.encode("utf-8"))})
        return path

    def write_json(self, data: Dict[str, Any], filename: str, directory: Optional[str] = None) -> Optional[str]:
        return self.write_text(JSONFormatter.format_to_json(data), filename, directory)

    def write_csv(self, columns: Sequence[str], rows: Sequence[Sequence[float]], filename: str,
                  directory: Optional[str] = None) -> Optional[str]:
        return self.write_text(CSVFormatter.format_table(columns, rows), filename, directory)


# 创建全局输出管理器实例
output_manager = OutputManager()


def format_result(result: Dict[str, Any], output_format: str = "markdown") -> str:
    """
    格式化结果的便捷函数

    Args:
        result: 结果字典
        output_format: 输出格式

    Returns:
        格式化后的结果
    """
    return output_manager.format_result(result, output_format)
