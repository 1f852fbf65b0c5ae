"""输入层模块，负责解析和校验实验配置文件"""

import json
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

from src.analytics import AncillaQubit, SchemeParams, optimal_beta
from src.config import get_config
from src.fock_core import DetectorModel
from src.protocols.amplify import HomodyneWindow, LEAF_SOURCES
from src.utils import decode_complex, encode_complex
from src.utils.errors import CatGenError, ConfigError
from src.wigner import GridSpec

logger = logging.getLogger(__name__)

SCHEMES = ("daokw", "pnrd", "onoff", "amplify", "cascade")
ENGINE_CHOICES = ("fock", "gaussian", "both")


def _real(lo: float = -math.inf, hi: float = math.inf, open_lo: bool = False) -> Callable[[Any], float]:
    def parse(value: Any) -> float:
        if isinstance(value, bool):
            raise ValueError("布尔值不是实数")
        number = float(value)
        if math.isnan(number) or number > hi or number < lo or (open_lo and number == lo):
            bracket = "(" if open_lo else "["
            raise ValueError(f"取值 {number} 超出范围 {bracket}{lo}, {hi}]")
        return number
    return parse


def _integer(lo: int) -> Callable[[Any], int]:
    def parse(value: Any) -> int:
        if isinstance(value, bool) or int(value) != value:
            raise ValueError(f"{value!r} 不是整数")
        if int(value) < lo:
            raise ValueError(f"取值 {value} 小于 {lo}")
        return int(value)
    return parse


def _choice(options: Tuple[str, ...]) -> Callable[[Any], str]:
    def parse(value: Any) -> str:
        if value not in options:
            raise ValueError(f"{value!r} 不在可选值 {list(options)} 中")
        return value
    return parse


def _boolean(value: Any) -> bool:
    if not isinstance(value, bool):
        raise ValueError(f"{value!r} 不是布尔值")
    return value


def _pair(value: Any) -> Tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ValueError(f"{value!r} 不是长度为 2 的列表")
    return float(value[0]), float(value[1])


def _outcome(value: Any) -> Tuple[int, int]:
    pair = tuple(int(v) for v in _pair(value))
    if pair not in ((2, 0), (0, 2)):
        raise ValueError(f"探测结果只能是 [2,0] 或 [0,2]，得到 {list(pair)}")
    return pair


def _beta(value: Any) -> Union[str, complex]:
    if value == "optimal":
        return value
    return decode_complex(value)


def _dark(value: Any) -> float:
    if value in ("inf", "Infinity"):
        return math.inf
    return _real(0.0)(value)


class InputProcessor:
    """
    输入处理器基类，每个子类负责配置中的一组键

    KEYS 把键名映射到 (解析函数, 默认值)，默认值为 None 表示由运行时决定。
    """

    KEYS: Dict[str, Tuple[Callable[[Any], Any], Any]] = {}

    def process(self, data: Dict[str, Any]) -> Dict[str, Any]:
        """
        解析本组的键

        Args:
            data: 扁平配置字典

        Returns:
            解析后的值，缺省键取默认值

        Raises:
            ConfigError: 某个键的值不合法
        """
        result = {}
        for key, (parse, default) in self.KEYS.items():
            value = data.get(key)
            if value is None:
                result[key] = self.default(key, default)
                continue
            try:
                result[key] = parse(value)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"配置项 {key} 不合法: {e}", key=key) from e
        return result

    def default(self, key: str, default: Any) -> Any:
        return default


class SchemeProcessor(InputProcessor):
    """方案与目标态参数"""

    KEYS = {
        "scheme": (_choice(SCHEMES), "onoff"),
        "r": (_real(0.0), 0.3),
        "T": (_real(0.0, 1.0, open_lo=True), 0.95),
        "beta": (_beta, "optimal"),
        "c_plus": (decode_complex, 1 + 0j),
        "c_minus": (decode_complex, 0j),
        "m": (_integer(1), 1),
        "ancilla_b0": (decode_complex, None),
        "ancilla_b1": (decode_complex, None),
        "outcome": (_outcome, (2, 0)),
    }


class DetectorProcessor(InputProcessor):
    """开关探测器参数"""

    KEYS = {
        "eta_B": (_real(0.0, 1.0, open_lo=True), 1.0),
        "nu_B": (_dark, 0.0),
        "eta_C": (_real(0.0, 1.0, open_lo=True), 1.0),
        "nu_C": (_dark, 0.0),
    }


class AmplifyProcessor(InputProcessor):
    """零差放大与级联参数，窗口默认值取配置文件 homodyne 部分"""

    KEYS = {
        "alpha": (_real(0.0), 0.95),
        "phases": (_pair, (0.0, math.pi)),
        "window_x0": (_real(), None),
        "window_epsilon": (_real(0.0, open_lo=True), None),
        "window_efficiency": (_real(0.0, 1.0, open_lo=True), None),
        "target_amplitude": (_real(0.0, open_lo=True), None),
        "target_phase": (_real(), math.pi),
        "base_amplitude": (_real(0.0, open_lo=True), 0.7),
        "leaf_source": (_choice(LEAF_SOURCES), "cat"),
        "leaf_T": (_real(0.0, 1.0, open_lo=True), 0.99),
    }

    def default(self, key: str, default: Any) -> Any:
        if key.startswith("window_"):
            window = HomodyneWindow.from_config()
            return float(getattr(window, key[len("window_"):]))
        return default


class RunProcessor(InputProcessor):
    """引擎、截断、网格与输出目录"""

    KEYS = {
        "engine": (_choice(ENGINE_CHOICES), "fock"),
        "dim": (_integer(2), None),
        "tap_dim": (_integer(3), None),
        "grid_min": (_real(), None),
        "grid_max": (_real(), None),
        "grid_points": (_integer(2), None),
        "write_wigner": (_boolean, True),
        "output_dir": (str, None),
    }

    def default(self, key: str, default: Any) -> Any:
        wigner_cfg = get_config("wigner")
        defaults = {
            "grid_min": float(wigner_cfg.get("x_min", -5.0)),
            "grid_max": float(wigner_cfg.get("x_max", 5.0)),
            "grid_points": int(wigner_cfg.get("points", 201)),
            "output_dir": get_config("output").get("directory", "results"),
        }
        return defaults.get(key, default)


@dataclass(frozen=True)
class ExperimentConfig:
    """
    完整解析后的实验配置

    beta 为 "optimal" 时 params.beta 为 0，运行前由 resolved_params() 计算。
    ancilla 为 None 时由目标态反解。dim、tap_dim 为 None 时取仿真设置。
    """

    scheme: str
    params: SchemeParams
    beta: Union[str, complex]
    detectors: Tuple[DetectorModel, DetectorModel]
    engine: str
    grid: GridSpec
    output_dir: str
    m: int = 1
    ancilla: Optional[AncillaQubit] = None
    outcome: Tuple[int, int] = (2, 0)
    window: HomodyneWindow = field(default_factory=HomodyneWindow)
    alpha: float = 0.95
    phases: Tuple[float, float] = (0.0, math.pi)
    target_amplitude: Optional[float] = None
    target_phase: float = math.pi
    base_amplitude: float = 0.7
    leaf_source: str = "cat"
    leaf_T: float = 0.99
    dim: Optional[int] = None
    tap_dim: Optional[int] = None
    write_wigner: bool = True

    def resolved_params(self) -> SchemeParams:
        if self.beta == "optimal":
            beta, _ = optimal_beta(self.params)
            return self.params.with_beta(beta)
        return self.params.with_beta(self.beta)

    def resolved_detectors(self) -> Tuple[DetectorModel, DetectorModel]:
        """C 路探测器带上实际使用的位移"""
        det_b, det_c = self.detectors
        return det_b, det_c.with_displacement(self.resolved_params().beta)

    def to_flat_dict(self) -> Dict[str, Any]:
        det_b, det_c = self.detectors
        return {
            "scheme": self.scheme,
            "r": self.params.r,
            "T": self.params.T,
            "beta": self.beta if self.beta == "optimal" else encode_complex(self.beta),
            "c_plus": encode_complex(self.params.c_plus),
            "c_minus": encode_complex(self.params.c_minus),
            "m": self.m,
            "ancilla_b0": None if self.ancilla is None else encode_complex(self.ancilla.b0),
            "ancilla_b1": None if self.ancilla is None else encode_complex(self.ancilla.b1),
            "outcome": list(self.outcome),
            "eta_B": det_b.eta,
            "nu_B": "inf" if math.isinf(det_b.nu) else det_b.nu,
            "eta_C": det_c.eta,
            "nu_C": "inf" if math.isinf(det_c.nu) else det_c.nu,
            "alpha": self.alpha,
            "phases": list(self.phases),
            "window_x0": self.window.x0,
            "window_epsilon": self.window.epsilon,
            "window_efficiency": self.window.efficiency,
            "target_amplitude": self.target_amplitude,
            "target_phase": self.target_phase,
            "base_amplitude": self.base_amplitude,
            "leaf_source": self.leaf_source,
            "leaf_T": self.leaf_T,
            "engine": self.engine,
            "dim": self.dim,
            "tap_dim": self.tap_dim,
            "grid_min": self.grid.x_min,
            "grid_max": self.grid.x_max,
            "grid_points": self.grid.x_points,
            "write_wigner": self.write_wigner,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_flat_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        return input_manager.build_config(data)


class InputManager:
    """
    输入管理器，负责协调各组配置处理器
    """

    def __init__(self):
        """初始化输入管理器"""
        self.processors: Dict[str, InputProcessor] = {
            "scheme": SchemeProcessor(),
            "detectors": DetectorProcessor(),
            "amplify": AmplifyProcessor(),
            "run": RunProcessor(),
        }

    @property
    def known_keys(self) -> List[str]:
        return [key for processor in self.processors.values() for key in processor.KEYS]

    def parse_text(self, text: str) -> Dict[str, Any]:
        """
        解析配置文本为扁平字典

        Raises:
            ConfigError: JSON 语法错误 (带行号)、顶层不是对象或含未知键 (带键名与行号)
        """
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"配置文件 JSON 语法错误: {e.msg}", line=e.lineno) from e
        if not isinstance(data, dict):
            raise ConfigError("配置文件顶层必须是 JSON 对象")
        known = set(self.known_keys)
        for key in data:
            if key not in known:
                raise ConfigError(f"未知的配置项 {key}", key=key, line=_line_of(text, key))
        return data

    def load_file(self, path: str) -> Dict[str, Any]:
        try:
            with open(path, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"读取配置文件 {path} 失败: {e}") from e
        return self.parse_text(text)

    def build_config(self, data: Dict[str, Any], text: Optional[str] = None) -> ExperimentConfig:
        """
        由扁平字典构造 ExperimentConfig

        Args:
            data: 扁平配置字典
            text: 原始配置文本，用于在报错时定位行号
        """
        unknown = [key for key in data if key not in set(self.known_keys)]
        if unknown:
            raise ConfigError(f"未知的配置项 {unknown[0]}", key=unknown[0])
        try:
            values: Dict[str, Any] = {}
            for processor in self.processors.values():
                values.update(processor.process(data))
            return self._assemble(values)
        except ConfigError as e:
            if text is not None and e.key and e.line is None:
                raise ConfigError(e.message, key=e.key, line=_line_of(text, e.key)) from e
            raise

    @staticmethod
    def _assemble(v: Dict[str, Any]) -> ExperimentConfig:
        try:
            beta = v["beta"]
            params = SchemeParams(v["r"], v["T"], 0j if beta == "optimal" else beta, v["c_plus"], v["c_minus"])
            detectors = (DetectorModel(v["eta_B"], v["nu_B"]), DetectorModel(v["eta_C"], v["nu_C"]))
            ancilla = None
            if v["ancilla_b0"] is not None or v["ancilla_b1"] is not None:
                b0, b1 = v["ancilla_b0"] or 0j, v["ancilla_b1"] or 0j
                # 已归一化的振幅原样保留，保证配置往返不变
                if abs(abs(b0) ** 2 + abs(b1) ** 2 - 1.0) <= 1e-12:
                    ancilla = AncillaQubit(b0, b1)
                else:
                    ancilla = AncillaQubit.normalized(b0, b1)
            window = HomodyneWindow(v["window_x0"], v["window_epsilon"], v["window_efficiency"])
            grid = GridSpec.square(v["grid_min"], v["grid_max"], v["grid_points"])
        except CatGenError as e:
            raise ConfigError(f"配置参数不合法: {e}") from e
        return ExperimentConfig(
            scheme=v["scheme"], params=params, beta=beta, detectors=detectors, engine=v["engine"],
            grid=grid, output_dir=v["output_dir"], m=v["m"], ancilla=ancilla, outcome=v["outcome"],
            window=window, alpha=v["alpha"], phases=v["phases"], target_amplitude=v["target_amplitude"],
            target_phase=v["target_phase"], base_amplitude=v["base_amplitude"], leaf_source=v["leaf_source"],
            leaf_T=v["leaf_T"], dim=v["dim"], tap_dim=v["tap_dim"], write_wigner=v["write_wigner"],
        )


def _line_of(text: str, key: str) -> Optional[int]:
    """键在配置文本中首次出现的行号"""
    pattern = re.compile(r'"' + re.escape(key) + r'"\s*:')
    for number, line in enumerate(text.splitlines(), start=1):
        if pattern.search(line):
            return number
    return None


# 创建全局输入管理器实例
input_manager = InputManager()


def load_experiment_config(path: Optional[str] = None,
                           overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    加载实验配置的便捷函数

    Args:
        path: 配置文件路径，None 表示全部取默认值
        overrides: 命令行覆盖值，值为 None 的键被忽略

    Returns:
        校验后的实验配置
    """
    text = None
    data: Dict[str, Any] = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"读取配置文件 {path} 失败: {e}") from e
        data = input_manager.parse_text(text)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    config = input_manager.build_config(data, text)
    logger.debug(f"实验配置: {config.to_flat_dict()}")
    return config
