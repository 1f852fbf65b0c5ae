"""配置管理模块，负责加载系统配置并合并环境变量覆盖"""

import copy
import json
import logging
import os
import re
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from src.utils.env_utils import get_float_env, get_int_env, prefixed

logger = logging.getLogger(__name__)

# ${VAR} 或 ${VAR:-默认值}
ENV_VAR_PATTERN = re.compile(r'\$\{([A-Za-z0-9_]+)(?::-([^}]*))?\}')

# simulation 部分中允许由环境变量覆盖的键及其类型
SIMULATION_ENV_OVERRIDES = {
    "dim": int,
    "tap_dim": int,
    "truncation_tolerance": float,
    "probability_floor": float,
}


class ConfigManager:
    """配置管理器类，负责加载、验证和提供配置信息"""

    def __init__(self, config_path: Optional[str] = None, env_file: Optional[str] = None):
        """
        初始化配置管理器

        Args:
            config_path: 配置文件路径，默认为None时使用 src/config/config.json
            env_file: 环境变量文件路径，默认为None时寻找项目根目录下的.env文件
        """
        self._load_env_file(env_file)

        if not config_path:
            config_path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "config.json")

        self.config_path = config_path
        self.config = self._load_config()

    @staticmethod
    def _load_env_file(env_file: Optional[str]) -> None:
        """加载 .env 文件，已存在的环境变量不会被覆盖"""
        if env_file is None:
            base_dir = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
            env_file = os.path.join(base_dir, ".env")
            if not os.path.exists(env_file):
                return
        elif not os.path.exists(env_file):
            logger.warning(f"环境变量文件不存在: {env_file}")
            return
        load_dotenv(env_file)
        logger.debug(f"已加载环境变量文件: {env_file}")

    def _load_config(self) -> Dict[str, Any]:
        """
        从配置文件加载配置

        Returns:
            配置字典，加载失败时为空字典
        """
        try:
            with open(self.config_path, "r", encoding="utf-8") as f:
                config = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"加载配置文件失败: {e}")
            return {}
        return self._process_env_variables(config)

    def _process_env_variables(self, config: Any) -> Any:
        """
        处理配置中的环境变量引用

        Args:
            config: 配置字典、列表或标量

        Returns:
            替换后的配置
        """
        if isinstance(config, dict):
            return {key: self._process_env_variables(value) for key, value in config.items()}
        if isinstance(config, list):
            return [self._process_env_variables(item) for item in config]
        if isinstance(config, str):
            return ENV_VAR_PATTERN.sub(self._substitute, config)
        return config

    @staticmethod
    def _substitute(match: "re.Match") -> str:
        name, default = match.group(1), match.group(2)
        value = os.environ.get(name)
        if value is not None:
            return value
        if default is not None:
            return default
        logger.warning(f"环境变量 {name} 未设置")
        return match.group(0)

    def get_config(self, section: Optional[str] = None) -> Dict[str, Any]:
        """
        获取配置信息

        Args:
            section: 配置部分名称，默认为None返回全部配置

        Returns:
            配置字典或配置部分的副本
        """
        if section:
            return copy.deepcopy(self.config.get(section, {}))
        return copy.deepcopy(self.config)

    def get_simulation_settings(self) -> Dict[str, Any]:
        """
        获取数值仿真设置，CATGEN_DIM 等环境变量优先于配置文件

        Returns:
            simulation 部分 (已合并环境变量覆盖)
        """
        settings = self.get_config("simulation")
        for key, kind in SIMULATION_ENV_OVERRIDES.items():
            reader = get_int_env if kind is int else get_float_env
            override = reader(prefixed(key))
            if override is not None:
                settings[key] = override
        return settings


# 全局配置实例
config_manager = ConfigManager()


def get_config(section: Optional[str] = None) -> Dict[str, Any]:
    """
    获取配置便捷函数

    Args:
        section: 配置部分名称

    Returns:
        配置字典或配置部分
    """
    return config_manager.get_config(section)


def get_simulation_settings() -> Dict[str, Any]:
    """获取数值仿真设置便捷函数"""
    return config_manager.get_simulation_settings()


def simulation_setting(name: str, value: Any = None) -> Any:
    """显式传入的值优先，否则取 simulation 配置中的同名项"""
    if value is not None:
        return value
    return get_simulation_settings()[name]
