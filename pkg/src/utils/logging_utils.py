"""日志配置模块，按配置文件的 logging 部分初始化根日志记录器"""

import logging
import os
from typing import Any, Dict, Optional

try:
    from pythonjsonlogger.json import JsonFormatter
except ImportError:  # python-json-logger < 3
    from pythonjsonlogger.jsonlogger import JsonFormatter

DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

_configured = False


def build_formatter(logging_config: Dict[str, Any]) -> logging.Formatter:
    """
    根据配置构造格式化器

    Args:
        logging_config: 配置中的 logging 部分

    Returns:
        json 为真时返回 JsonFormatter，否则返回普通文本格式化器
    """
    fmt = logging_config.get("format", DEFAULT_FORMAT)
    if logging_config.get("json", False):
        return JsonFormatter(fmt)
    return logging.Formatter(fmt)


def setup_logging(logging_config: Optional[Dict[str, Any]] = None, force: bool = False) -> logging.Logger:
    """
    配置根日志记录器，重复调用时不会重复添加处理器

    Args:
        logging_config: logging 配置，为 None 时从全局配置读取
        force: 是否强制重新配置

    Returns:
        根日志记录器
    """
    global _configured
    root = logging.getLogger()
    if _configured and not force:
        return root

    if logging_config is None:
        from src.config import get_config
        logging_config = get_config("logging")

    level_name = str(logging_config.get("level", "INFO")).upper()
    level = getattr(logging, level_name, logging.INFO)
    formatter = build_formatter(logging_config)

    for handler in list(root.handlers):
        root.removeHandler(handler)

    stream_handler = logging.StreamHandler()
    stream_handler.setFormatter(formatter)
    root.addHandler(stream_handler)

    log_file = logging_config.get("file")
    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)

    root.setLevel(level)
    _configured = True
    return root
