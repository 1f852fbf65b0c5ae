"""环境变量工具模块，提供带类型转换的环境变量读取函数"""

import logging
import os
from typing import Any, Optional

logger = logging.getLogger(__name__)

# 本项目环境变量统一前缀
ENV_PREFIX = "CATGEN_"


def get_env(name: str, default: Any = None) -> Optional[str]:
    """
    获取环境变量

    Args:
        name: 环境变量名称
        default: 默认值，当环境变量不存在时返回

    Returns:
        环境变量值或默认值
    """
    return os.environ.get(name, default)


def get_int_env(name: str, default: Optional[int] = None) -> Optional[int]:
    """
    获取整数类型的环境变量，无法转换时记录警告并返回默认值
    """
    value = get_env(name)
    if value is None:
        return default

    try:
        return int(value)
    except ValueError:
        logger.warning(f"环境变量 {name} 的值 '{value}' 无法转换为整数，使用默认值 {default}")
        return default


def get_float_env(name: str, default: Optional[float] = None) -> Optional[float]:
    """
    获取浮点类型的环境变量，支持 1e-10 这类科学计数法
    """
    value = get_env(name)
    if value is None:
        return default

    try:
        return float(value)
    except ValueError:
        logger.warning(f"环境变量 {name} 的值 '{value}' 无法转换为浮点数，使用默认值 {default}")
        return default


def prefixed(name: str) -> str:
    """返回带项目前缀的环境变量名，例如 dim -> CATGEN_DIM"""
    return ENV_PREFIX + name.upper()
