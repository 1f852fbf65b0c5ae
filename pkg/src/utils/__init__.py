"""通用工具函数模块：原子文件写入与复数序列化"""

import logging
import os
import tempfile
from typing import Any, Iterable, List, Optional, Sequence, Union

import numpy as np

from .env_utils import get_env, get_int_env, get_float_env, prefixed

__all__ = [
    'ensure_dir_exists',
    'write_text_atomic',
    'interleave_complex',
    'deinterleave_complex',
    'encode_complex',
    'decode_complex',
    'get_env',
    'get_int_env',
    'get_float_env',
    'prefixed',
]

logger = logging.getLogger(__name__)


def ensure_dir_exists(directory: str) -> bool:
    """
    确保目录存在，如果不存在则创建

    Args:
        directory: 目录路径，空字符串表示当前目录

    Returns:
        是否成功创建或目录已存在
    """
    if not directory:
        return True
    try:
        os.makedirs(directory, exist_ok=True)
        return True
    except OSError as e:
        logger.error(f"创建目录 {directory} 失败: {e}")
        return False


def write_text_atomic(text: str, file_path: str) -> bool:
    """
    原子写入文本文件：先写同目录临时文件，再 os.replace 覆盖目标

    Args:
        text: 文件内容
        file_path: 目标路径

    Returns:
        是否写入成功
    """
    directory = os.path.dirname(os.path.abspath(file_path))
    if not ensure_dir_exists(directory):
        return False

    fd, tmp_path = tempfile.mkstemp(prefix=".tmp_", dir=directory)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        os.replace(tmp_path, file_path)
        return True
    except OSError as e:
        logger.error(f"写入文件 {file_path} 失败: {e}")
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        return False


def interleave_complex(values: Union[np.ndarray, Iterable[complex]]) -> List[float]:
    """把复数数组按行优先展平为 [re0, im0, re1, im1, ...]"""
    flat = np.asarray(values, dtype=complex).ravel()
    out = np.empty(2 * flat.size, dtype=float)
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return out.tolist()


def deinterleave_complex(values: Sequence[float], shape: Optional[Sequence[int]] = None) -> np.ndarray:
    """interleave_complex 的逆操作"""
    arr = np.asarray(values, dtype=float)
    if arr.size % 2:
        raise ValueError("交错复数数组长度必须为偶数")
    result = arr[0::2] + 1j * arr[1::2]
    if shape is not None:
        result = result.reshape(tuple(shape))
    return result


def encode_complex(value: complex) -> Union[float, List[float]]:
    """复数编码为 [re, im]，纯实数直接编码为 float"""
    value = complex(value)
    if value.imag == 0.0:
        return float(value.real)
    return [float(value.real), float(value.imag)]


def decode_complex(value: Any) -> complex:
    """
    解析配置中的复数

    Args:
        value: 数值、[re, im] 列表或 Python 复数字面量字符串

    Returns:
        复数
    """
    if isinstance(value, bool):
        raise ValueError("布尔值不是合法的复数")
    if isinstance(value, (int, float, complex)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        return complex(value.replace(" ", "").replace("i", "j"))
    raise ValueError(f"无法解析复数: {value!r}")
