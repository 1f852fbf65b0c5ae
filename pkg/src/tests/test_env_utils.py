"""测试环境变量工具函数"""

import os
import sys
from unittest import mock

import pytest

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "../..")))

from src.utils.env_utils import ENV_PREFIX, get_env, get_float_env, get_int_env, prefixed


def test_prefixed_names():
    """测试项目前缀"""
    assert ENV_PREFIX == "CATGEN_"
    assert prefixed("dim") == "CATGEN_DIM"
    assert prefixed("truncation_tolerance") == "CATGEN_TRUNCATION_TOLERANCE"


def test_get_env_default():
    """测试缺省值"""
    with mock.patch.dict(os.environ, {"CATGEN_OUTPUT_DIR": "out"}, clear=True):
        assert get_env("CATGEN_OUTPUT_DIR") == "out"
        assert get_env("CATGEN_MISSING") is None
        assert get_env("CATGEN_MISSING", "results") == "results"


def test_get_int_env():
    """测试截断维度这类整数变量"""
    with mock.patch.dict(os.environ, {"CATGEN_DIM": "48", "CATGEN_TAP_DIM": "ten"}):
        assert get_int_env("CATGEN_DIM") == 48
        assert get_int_env("CATGEN_TAP_DIM") is None
        assert get_int_env("CATGEN_TAP_DIM", 10) == 10
        assert get_int_env("CATGEN_NOT_SET", 7) == 7


def test_get_float_env_scientific():
    """测试科学计数法的浮点变量"""
    with mock.patch.dict(os.environ, {"CATGEN_TRUNCATION_TOLERANCE": "1e-12",
                                      "CATGEN_PROBABILITY_FLOOR": "tiny"}):
        assert get_float_env("CATGEN_TRUNCATION_TOLERANCE") == 1e-12
        assert get_float_env("CATGEN_PROBABILITY_FLOOR") is None
        assert get_float_env("CATGEN_PROBABILITY_FLOOR", 1e-14) == 1e-14
