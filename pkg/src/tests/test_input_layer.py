"""测试输入层模块"""

import json
import math
import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "../..")))

from src.analytics import optimal_beta
from src.input_layer import (
    AmplifyProcessor,
    DetectorProcessor,
    ExperimentConfig,
    InputManager,
    SchemeProcessor,
    input_manager,
    load_experiment_config,
)
from src.utils.errors import ConfigError


def _write(tmpdir, text, name="experiment.json"):
    path = os.path.join(tmpdir, name)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    return path


def test_scheme_processor_defaults():
    """测试方案参数的默认值"""
    values = SchemeProcessor().process({})
    assert values["scheme"] == "onoff"
    assert values["r"] == 0.3 and values["T"] == 0.95
    assert values["beta"] == "optimal"
    assert values["outcome"] == (2, 0)
    assert values["ancilla_b0"] is None


def test_detector_processor_dark_counts():
    """测试暗计数可以写成 inf"""
    values = DetectorProcessor().process({"eta_B": 0.1, "nu_B": 1e-7, "nu_C": "inf"})
    assert values["eta_B"] == 0.1 and values["eta_C"] == 1.0
    assert values["nu_B"] == 1e-7
    assert math.isinf(values["nu_C"])


def test_amplify_processor_window_defaults():
    """测试窗口参数缺省时取配置文件"""
    values = AmplifyProcessor().process({"window_epsilon": 0.1})
    assert values["window_epsilon"] == 0.1
    assert values["window_x0"] == 0.0
    assert values["window_efficiency"] == 1.0
    assert values["phases"] == (0.0, math.pi)


@pytest.mark.parametrize("key, value", [
    ("T", 1.5),
    ("T", 0.0),
    ("r", -0.1),
    ("m", 0),
    ("m", 1.5),
    ("scheme", "teleport"),
    ("outcome", [1, 1]),
    ("eta_B", True),
    ("c_plus", "abc"),
    ("leaf_source", "laser"),
    ("write_wigner", "yes"),
])
def test_invalid_values_name_the_key(key, value):
    """测试非法取值报出键名"""
    with pytest.raises(ConfigError) as info:
        input_manager.build_config({key: value})
    assert info.value.key == key


def test_unknown_key_with_line_number():
    """测试未知键报出键名与行号"""
    text = '{\n  "r": 0.3,\n  "colour": "red"\n}'
    with pytest.raises(ConfigError) as info:
        InputManager().parse_text(text)
    assert info.value.key == "colour"
    assert info.value.line == 3


def test_json_syntax_error_line():
    """测试 JSON 语法错误带行号"""
    with pytest.raises(ConfigError) as info:
        InputManager().parse_text('{\n  "r": 0.3,\n  "T": \n}')
    assert info.value.line == 4
    with pytest.raises(ConfigError):
        InputManager().parse_text("[1, 2]")


def test_invalid_value_in_file_reports_line(tmpdir):
    """测试文件中的非法取值带行号"""
    path = _write(tmpdir, '{\n  "scheme": "onoff",\n  "T": 1.5\n}')
    with pytest.raises(ConfigError) as info:
        load_experiment_config(path)
    assert info.value.key == "T"
    assert info.value.line == 3
    assert "第 3 行" in str(info.value)


def test_missing_file():
    """测试配置文件不存在"""
    with pytest.raises(ConfigError):
        load_experiment_config("/nonexistent/experiment.json")


def test_load_defaults_and_overrides():
    """测试默认配置与命令行覆盖"""
    config = load_experiment_config(overrides={"engine": "gaussian", "dim": 40, "tap_dim": None})
    assert config.engine == "gaussian"
    assert config.dim == 40 and config.tap_dim is None
    assert config.grid.x_points == 201
    assert config.window.epsilon == pytest.approx(0.05)


def test_resolved_params_use_optimal_beta(tmpdir):
    """测试 beta 为 optimal 时运行前计算最优位移"""
    path = _write(tmpdir, json.dumps({"c_plus": 1, "c_minus": [0, 1], "eta_B": 0.1, "eta_C": 0.1,
                                      "nu_B": 1e-7, "nu_C": 1e-7}))
    config = load_experiment_config(path)
    assert config.params.beta == 0j
    expected, _ = optimal_beta(config.params)
    assert config.resolved_params().beta == expected
    det_b, det_c = config.resolved_detectors()
    assert det_b.displacement == 0j
    assert det_c.displacement == expected
    assert det_c.eta == 0.1


def test_explicit_beta():
    """测试显式给出的复数位移"""
    config = input_manager.build_config({"beta": [0.1, -0.2]})
    assert config.resolved_params().beta == 0.1 - 0.2j


def test_ancilla_normalization():
    """测试辅助比特未归一化时自动归一"""
    config = input_manager.build_config({"scheme": "pnrd", "ancilla_b0": 3, "ancilla_b1": 4})
    assert config.ancilla.b0 == pytest.approx(0.6)
    assert config.ancilla.b1 == pytest.approx(0.8)
    with pytest.raises(ConfigError):
        input_manager.build_config({"ancilla_b0": 0, "ancilla_b1": 0})


def test_zero_target_is_rejected():
    """测试 c₊ 与 c₋ 同时为零"""
    with pytest.raises(ConfigError):
        input_manager.build_config({"c_plus": 0, "c_minus": 0})


def test_flat_dict_round_trip():
    """测试扁平字典往返不变"""
    config = input_manager.build_config({
        "scheme": "pnrd", "r": 0.4, "T": 0.9, "beta": [0.05, 0.01], "c_plus": [1, 0.5],
        "ancilla_b0": 0.6, "ancilla_b1": [0, 0.8], "outcome": [0, 2], "nu_C": "inf",
        "phases": [0.5, 2.0], "target_amplitude": 1.4, "engine": "both", "dim": 24,
    })
    flat = config.to_flat_dict()
    assert flat["nu_C"] == "inf"
    assert set(flat) == set(input_manager.known_keys)
    assert ExperimentConfig.from_flat_dict(json.loads(json.dumps(flat))) == config
