"""
态制备方案

- run_daokw: 压缩真空抽头后用光子数分辨探测器计 m 个光子
- run_pnrd_scheme: 抽头光与辅助比特在平衡分束器上混合，两路光子数分辨探测
- run_onoff_scheme: 抽头光分两路，各用开关探测器，其中一路先位移 β
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.analytics import (
    AncillaQubit,
    SchemeParams,
    cat_amplitude,
    optimal_beta,
    validity_ratio,
)
from src.config import simulation_setting
from src.fock_core import (
    DetectorModel,
    FockOperator,
    FockVector,
    beamsplitter,
    cat,
    condition_on_outcome,
    photon_subtracted,
    povm_onoff,
    product_state,
    squeezed_vacuum,
    vacuum,
)
from src.gaussian_core import (
    GaussianMixture,
    apply_bs_chain,
    conditional_output_cf,
    fidelity_with_superposition,
    squeezed_vacuum_cf,
    tensor,
    vacuum_cf,
)
from src.utils import encode_complex
from src.utils.errors import DomainError, SingularTargetError, ZeroProbabilityError
from src.wigner import fidelity_from_states

logger = logging.getLogger(__name__)

ENGINES = ("fock", "gaussian")


@dataclass
class GenerationResult:
    """
    一次态制备 (或放大) 的结果

    Args:
        state: Fock 基下的输出 (纯态向量或密度矩阵)，高斯引擎时为 None
        success_probability: 预报成功概率
        fidelity_vs_target: 与理想目标态的保真度
        engine: "fock" 或 "gaussian"
        warnings: 运行中产生的警告文本
        mixture: 高斯引擎的单模输出混合
        target: 理想目标态
        stages: 级联放大各级的记录
        details: 其他需要写入结果文件的标量
    """

    state: Optional[Union[FockVector, FockOperator]]
    success_probability: float
    fidelity_vs_target: float
    engine: str = "fock"
    warnings: List[str] = field(default_factory=list)
    mixture: Optional[GaussianMixture] = None
    target: Optional[FockVector] = None
    stages: List[Dict[str, Any]] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise DomainError(f"未知的引擎 {self.engine!r}")
        if not 0.0 < self.success_probability <= 1.0 + 1e-9:
            raise DomainError(f"成功概率 {self.success_probability} 超出 (0, 1]")
        if not -1e-9 <= self.fidelity_vs_target <= 1.0 + 1e-9:
            raise DomainError(f"保真度 {self.fidelity_vs_target} 超出 [0, 1]")
        self.success_probability = float(min(self.success_probability, 1.0))
        self.fidelity_vs_target = float(np.clip(self.fidelity_vs_target, 0.0, 1.0))

    def density(self) -> Optional[FockOperator]:
        if isinstance(self.state, FockVector):
            return self.state.to_density()
        return self.state

    def to_dict(self) -> Dict[str, Any]:
        """结果摘要，不含态的全部振幅"""
        summary = {
            "engine": self.engine,
            "success_probability": self.success_probability,
            "fidelity_vs_target": self.fidelity_vs_target,
            "warnings": list(self.warnings),
        }
        if self.stages:
            summary["stages"] = self.stages
        if self.details:
            summary["details"] = self.details
        density = self.density()
        if density is not None:
            summary["mean_photon_number"] = density.mean_photon_number()
            summary["purity"] = density.purity()
        return summary


def _warn(warnings: List[str], message: str) -> None:
    logger.warning(message)
    warnings.append(message)


def _check_tail(state: Union[FockVector, Any], warnings: List[str]) -> None:
    tol = float(simulation_setting("truncation_tolerance"))
    tail = getattr(state, "tail_mass", 0.0)
    if tail > tol:
        _warn(warnings, f"截断尾部质量 {tail:.3e} 超过容差 {tol:.1e}")


def target_cat(params: SchemeParams, dim: int) -> FockVector:
    """理想目标 c₊|α⟩ + c₋|−α⟩，α 取分解给出的振幅"""
    return cat(cat_amplitude(params), params.c_plus, params.c_minus, dim)


def run_daokw(r: float, T: float, m: int, dim: Optional[int] = None) -> GenerationResult:
    """
    计 m 个光子后的压缩真空，与 C₋ (m 为奇数) 或 C₊ (m 为偶数) 比较

    Raises:
        ZeroProbabilityError: T = 1 或 r = 0 时无法计到光子
    """
    if m < 1:
        raise DomainError(f"光子数 m={m} 必须 ≥ 1")
    dim = int(simulation_setting("dim", dim))
    warnings: List[str] = []
    psi, p = photon_subtracted(r, T, m, dim)
    _check_tail(psi, warnings)
    alpha = cat_amplitude(np.tanh(r) * T)
    target = cat(alpha, 1.0, -1.0 if m % 2 else 1.0, dim)
    return GenerationResult(
        state=psi,
        success_probability=p,
        fidelity_vs_target=psi.fidelity(target),
        warnings=warnings,
        target=target,
        details={"alpha": alpha, "m": m, "r": r, "T": T},
    )


def run_pnrd_scheme(params: SchemeParams, ancilla: AncillaQubit, outcome: Tuple[int, int] = (2, 0),
                    dim: Optional[int] = None, tap_dim: Optional[int] = None) -> GenerationResult:
    """
    辅助比特方案：模式 C 制备 b₀|0⟩ + b₁|1⟩，与抽头模式 B 在平衡分束器上混合，
    以 (n_B, n_C) = (2,0) 或 (0,2) 为预报条件

    Returns:
        纯态输出 a₁|Ψ₁⟩ + a₂|Ψ₂⟩
    """
    outcome = tuple(int(n) for n in outcome)
    if outcome not in ((2, 0), (0, 2)):
        raise DomainError(f"未知的探测结果 {outcome}")
    dim = int(simulation_setting("dim", dim))
    tap = max(3, int(simulation_setting("tap_dim", tap_dim)))
    warnings: List[str] = []

    joint = product_state([squeezed_vacuum(params.r, dim), vacuum(tap), ancilla.as_vector(tap)])
    joint = beamsplitter(joint, params.T, modes=(0, 1))
    joint = beamsplitter(joint, 0.5, modes=(1, 2))
    _check_tail(joint, warnings)

    amps = joint.amps[:, outcome[0], outcome[1]]
    p = float(np.sum(np.abs(amps) ** 2))
    floor = float(simulation_setting("probability_floor"))
    if p < floor:
        raise ZeroProbabilityError(f"结果 {outcome} 的概率 {p:.3e} 低于下限", p)
    state = FockVector(amps / np.sqrt(p), joint.tail_mass)
    target = target_cat(params, dim)
    return GenerationResult(
        state=state,
        success_probability=p,
        fidelity_vs_target=state.fidelity(target),
        warnings=warnings,
        target=target,
        details={
            "alpha": cat_amplitude(params),
            "outcome": list(outcome),
            "ancilla_b0": encode_complex(ancilla.b0),
            "ancilla_b1": encode_complex(ancilla.b1),
        },
    )


def ideal_output_state(params: SchemeParams, dim: Optional[int] = None,
                       beta: Optional[complex] = None) -> FockVector:
    """小 β 下理想开关探测的输出 β√P₁|Ψ₁⟩ + √P₂|Ψ₂⟩ (归一化)"""
    dim = int(simulation_setting("dim", dim))
    beta = params.beta if beta is None else complex(beta)
    psi1, p1 = photon_subtracted(params.r, params.T, 1, dim)
    psi2, p2 = photon_subtracted(params.r, params.T, 2, dim)
    return FockVector(beta * np.sqrt(p1) * psi1.amps + np.sqrt(p2) * psi2.amps).normalize()


def _onoff_fock(params: SchemeParams, det_B: DetectorModel, det_C: DetectorModel,
                dim: int, tap: int, warnings: List[str]) -> Tuple[FockOperator, float]:
    joint = product_state([squeezed_vacuum(params.r, dim), vacuum(tap), vacuum(tap)])
    joint = beamsplitter(joint, params.T, modes=(0, 1))
    joint = beamsplitter(joint, 0.5, modes=(1, 2))
    _check_tail(joint, warnings)
    _, on_b = povm_onoff(det_B, tap)
    _, on_c = povm_onoff(det_C, tap)
    return condition_on_outcome(joint, (1, 2), (on_b, on_c))


def _onoff_gaussian(params: SchemeParams, det_B: DetectorModel,
                    det_C: DetectorModel) -> Tuple[GaussianMixture, float]:
    state = apply_bs_chain(tensor(squeezed_vacuum_cf(params.r), vacuum_cf(), vacuum_cf()), params.T)
    return conditional_output_cf(state, det_B, det_C)


def run_onoff_scheme(params: SchemeParams, det_B: DetectorModel, det_C: DetectorModel,
                     engine: str = "fock", dim: Optional[int] = None,
                     tap_dim: Optional[int] = None) -> GenerationResult:
    """
    开关探测器方案：B、C 两路同时响应时模式 A 的输出

    Args:
        params: 方案参数，目标取 (c₊, c₋)
        det_B: 未位移一路的探测器
        det_C: 位移一路的探测器，displacement 即 β
        engine: "fock" 或 "gaussian"
        dim: 信号模截断维度
        tap_dim: 抽头模截断维度 (仅 Fock 引擎)
    """
    if engine not in ENGINES:
        raise DomainError(f"未知的引擎 {engine!r}")
    dim = int(simulation_setting("dim", dim))
    tap = int(simulation_setting("tap_dim", tap_dim))
    warnings: List[str] = []

    try:
        validity = validity_ratio(params)
        if validity > float(simulation_setting("validity_warning")):
            _warn(warnings, f"小位移近似的有效性比值 {validity:.3f} 偏大")
    except SingularTargetError:
        _warn(warnings, "c₊ + c₋ ≈ 0，最优位移公式不适用")

    alpha = cat_amplitude(params)
    details = {"alpha": alpha, "beta": encode_complex(det_C.displacement)}
    target = target_cat(params, dim)
    if engine == "fock":
        rho, p = _onoff_fock(params, det_B, det_C, dim, tap, warnings)
        return GenerationResult(rho, p, fidelity_from_states(rho, target), "fock", warnings,
                                target=target, details=details)

    mixture, p = _onoff_gaussian(params, det_B, det_C)
    fidelity = fidelity_with_superposition(mixture, alpha, params.c_plus, params.c_minus)
    return GenerationResult(None, p, fidelity, "gaussian", warnings, mixture=mixture,
                            target=target, details=details)


def onoff_detectors(params: SchemeParams, eta: float = 1.0, nu: float = 0.0,
                    beta: Optional[complex] = None) -> Tuple[DetectorModel, DetectorModel]:
    """两路相同的探测器，C 路位移取 beta，未给出时用最优位移"""
    if beta is None:
        beta, _ = optimal_beta(params)
    return DetectorModel(eta, nu), DetectorModel(eta, nu, beta)


def beta_sensitivity(params: SchemeParams, det_B: DetectorModel, det_C: DetectorModel,
                     factors: Sequence[float] = (0.8, 1.0, 1.2), engine: str = "fock",
                     dim: Optional[int] = None) -> Dict[float, float]:
    """
    把最优位移按比例缩放后的保真度

    Returns:
        {缩放因子: 保真度}
    """
    beta, _ = optimal_beta(params)
    scan = {}
    for factor in factors:
        det = det_C.with_displacement(beta * factor)
        scan[float(factor)] = run_onoff_scheme(params.with_beta(beta * factor), det_B, det,
                                               engine=engine, dim=dim).fidelity_vs_target
    return scan
