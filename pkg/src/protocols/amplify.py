"""
条件零差放大

两个振幅为 α 的猫态 |α⟩ + e^{iφ₁}|−α⟩、|α⟩ + e^{iφ₂}|−α⟩ 在平衡分束器上合束，
对其中一路做零差测量并选取 x ≈ x₀ 的结果。φ₁ + φ₂ = π 时另一路输出
|√2α⟩ + e^{i(φ₁−φ₂)}|−√2α⟩。级联 k 次得到振幅 2^{k/2}α 的猫态。
"""

import logging
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import ndtr

from src.analytics import AncillaQubit, SchemeParams, qubit_ancilla_coeffs, squeezing_for_amplitude
from src.config import get_config, simulation_setting
from src.fock_core import (
    FockOperator,
    FockVector,
    beamsplitter,
    cat,
    condition_on_outcome,
    product_density,
    product_state,
    squeezed_single_photon,
)
from src.protocols import GenerationResult, run_pnrd_scheme
from src.utils.errors import DomainError, InfeasibleCascadeError, TruncationError
from src.wigner import fidelity_from_states

logger = logging.getLogger(__name__)

LEAF_SOURCES = ("cat", "squeezed_photon", "pnrd")

# 高效率零差探测时，接受函数在窗口外延伸的标准差倍数
SMEAR_WIDTH = 8.0

State = Union[FockVector, FockOperator]


@dataclass(frozen=True)
class HomodyneWindow:
    """
    零差接受窗口 [x₀ − ε, x₀ + ε]

    Args:
        x0: 窗口中心
        epsilon: 半宽 (> 0)
        efficiency: 零差探测效率 (0, 1]
    """

    x0: float = 0.0
    epsilon: float = 0.05
    efficiency: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise DomainError(f"窗口半宽 epsilon={self.epsilon} 必须为正")
        if not 0.0 < self.efficiency <= 1.0:
            raise DomainError(f"零差效率 {self.efficiency} 必须位于 (0, 1]")

    @classmethod
    def from_config(cls) -> "HomodyneWindow":
        cfg = get_config("homodyne")
        return cls(cfg.get("x0", 0.0), cfg.get("epsilon", 0.05), cfg.get("efficiency", 1.0))

    @property
    def smear(self) -> float:
        """效率引入的高斯展宽标准差 √((1−η)/η)"""
        return math.sqrt((1.0 - self.efficiency) / self.efficiency)


@dataclass(frozen=True)
class CascadeNode:
    """级联树的节点，代表 |A⟩ + e^{iφ}|−A⟩"""

    phase: float
    amplitude: float
    children: Tuple["CascadeNode", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + self.children[0].depth

    def leaves(self) -> List["CascadeNode"]:
        if self.is_leaf:
            return [self]
        return [leaf for child in self.children for leaf in child.leaves()]

    def recomputed_phase(self) -> float:
        """由叶节点相位按 φ₁ − φ₂ 规则自底向上重算本节点相位"""
        if self.is_leaf:
            return self.phase % (2 * math.pi)
        left, right = (c.recomputed_phase() for c in self.children)
        return (left - right) % (2 * math.pi)

    def is_consistent(self, tol: float = 1e-9) -> bool:
        """每个内部节点满足 φ₁+φ₂ = π、φ = φ₁−φ₂、A = √(A₁²+A₂²)"""
        if self.is_leaf:
            return True
        left, right = self.children
        ok = (_phase_close(left.phase + right.phase, math.pi, tol)
              and _phase_close(left.phase - right.phase, self.phase, tol)
              and abs(math.hypot(left.amplitude, right.amplitude) - self.amplitude) < tol)
        return ok and left.is_consistent(tol) and right.is_consistent(tol)

    def to_dict(self) -> Dict[str, Any]:
        node = {"phase": self.phase, "amplitude": self.amplitude}
        if self.children:
            node["children"] = [c.to_dict() for c in self.children]
        return node


def _phase_close(a: float, b: float, tol: float) -> bool:
    diff = (a - b) % (2 * math.pi)
    return min(diff, 2 * math.pi - diff) < tol


def _hermite_functions(dim: int, x: np.ndarray) -> np.ndarray:
    """ψ_n(x) 在 x = â + â† 约定下的位置表象波函数，形状 (dim, len(x))"""
    q = x / math.sqrt(2.0)
    psi = np.zeros((dim, x.size))
    psi[0] = math.pi ** -0.25 * np.exp(-q ** 2 / 2.0)
    if dim > 1:
        psi[1] = math.sqrt(2.0) * q * psi[0]
    for n in range(1, dim - 1):
        psi[n + 1] = math.sqrt(2.0 / (n + 1)) * q * psi[n] - math.sqrt(n / (n + 1)) * psi[n - 1]
    return psi * 2.0 ** -0.25


@lru_cache(maxsize=16)
def _window_matrix(x0: float, epsilon: float, efficiency: float, dim: int, nodes: int) -> np.ndarray:
    window = HomodyneWindow(x0, epsilon, efficiency)
    lo, hi = x0 - epsilon, x0 + epsilon
    sigma = window.smear
    if sigma > 0.0:
        lo, hi = lo - SMEAR_WIDTH * sigma, hi + SMEAR_WIDTH * sigma
    t, w = np.polynomial.legendre.leggauss(nodes)
    x = 0.5 * (hi - lo) * t + 0.5 * (hi + lo)
    w = 0.5 * (hi - lo) * w
    if sigma > 0.0:
        w = w * (ndtr((x0 + epsilon - x) / sigma) - ndtr((x0 - epsilon - x) / sigma))
    psi = _hermite_functions(dim, x)
    matrix = (psi * w) @ psi.T
    matrix.setflags(write=False)
    return matrix


def window_povm(window: HomodyneWindow, dim: int, nodes: Optional[int] = None) -> FockOperator:
    """
    窗口积分后的零差 POVM 元 E = ∫ a(x)|x⟩⟨x| dx

    理想探测时 a(x) 是窗口的示性函数；效率 η < 1 时为示性函数与方差 (1−η)/η 高斯的卷积。
    """
    nodes = int(nodes or get_config("homodyne").get("quadrature_nodes", 96))
    matrix = _window_matrix(float(window.x0), float(window.epsilon), float(window.efficiency), int(dim), nodes)
    return FockOperator(matrix, hermitian_hint=True)


def _as_density(state: State, dim: int) -> FockOperator:
    rho = state.to_density() if isinstance(state, FockVector) else state
    return rho.padded(dim)


def best_matching_amplitude(state: State, phase: float,
                            bounds: Tuple[float, float] = (1e-3, 3.0)) -> Tuple[float, float]:
    """
    在固定相位下搜索与态最匹配的猫态 |A⟩ + e^{iφ}|−A⟩ 的振幅

    Returns:
        (振幅, 保真度)
    """
    coeff = complex(np.exp(1j * phase))

    def loss(amplitude: float) -> float:
        try:
            return -fidelity_from_states(state, cat(amplitude, 1.0, coeff, state.dim))
        except TruncationError:
            return 0.0

    found = minimize_scalar(loss, bounds=bounds, method="bounded", options={"xatol": 1e-6})
    return float(found.x), float(-found.fun)


def amplify_pair(left: State, right: State, window: HomodyneWindow, dim: Optional[int] = None,
                 amplitude: Optional[float] = None,
                 phases: Optional[Tuple[float, float]] = None) -> GenerationResult:
    """
    一级放大

    left 进入模式 0，right 进入模式 1；平衡分束器以模式 1 为第一端口，
    对模式 1 做窗口零差测量，保留模式 0。

    Args:
        left: 第一个输入猫态 (纯态或密度矩阵)
        right: 第二个输入猫态
        window: 零差接受窗口
        dim: 截断维度，默认取输入的维度
        amplitude: 输入猫态振幅 α，用于构造目标 |√2α⟩ + e^{i(φ₁−φ₂)}|−√2α⟩
        phases: 输入相位 (φ₁, φ₂)

    Returns:
        放大结果；未给出 amplitude 时保真度按最匹配振幅计算
    """
    dim = int(dim or max(left.dim, right.dim))
    warnings: List[str] = []
    if phases is not None and not _phase_close(phases[0] + phases[1], math.pi, 1e-9):
        message = f"输入相位 ({phases[0]:.4f}, {phases[1]:.4f}) 不满足 φ₁+φ₂ = π，放大不完全"
        logger.warning(message)
        warnings.append(message)

    povm = window_povm(window, dim)
    if isinstance(left, FockVector) and isinstance(right, FockVector):
        joint = product_state([left.padded(dim), right.padded(dim)])
    else:
        joint = product_density(_as_density(left, dim), _as_density(right, dim))
    joint = beamsplitter(joint, 0.5, modes=(1, 0))
    rho, p = condition_on_outcome(joint, 1, povm)

    out_phase = (phases[0] - phases[1]) % (2 * math.pi) if phases is not None else 0.0
    if amplitude is not None:
        out_amplitude = math.sqrt(2.0) * amplitude
    else:
        out_amplitude, _ = best_matching_amplitude(rho, out_phase)
    target = cat(out_amplitude, 1.0, np.exp(1j * out_phase), dim)
    details = {"output_phase": out_phase, "output_amplitude": out_amplitude, "window": asdict(window)}
    return GenerationResult(rho, p, fidelity_from_states(rho, target), "fock", warnings,
                            target=target, details=details)


def plan_cascade(target_amplitude: float, target_phase: float, base_amplitude: float) -> CascadeNode:
    """
    规划级联树

    振幅比必须是 2^{k/2} (k ≥ 1)。子节点相位取 φ₁ = (π+φ)/2、φ₂ = (π−φ)/2。

    Raises:
        InfeasibleCascadeError: 振幅比不是 √2 的正整数次幂
    """
    if base_amplitude <= 0 or target_amplitude <= 0:
        raise InfeasibleCascadeError("振幅必须为正")
    ratio = target_amplitude / base_amplitude
    k = int(round(2.0 * math.log2(ratio))) if ratio > 0 else 0
    if k < 1 or abs(ratio - 2.0 ** (k / 2.0)) > 1e-9 * ratio:
        raise InfeasibleCascadeError(f"振幅比 {ratio:.6g} 不是 √2 的正整数次幂")

    def build(phase: float, amplitude: float, depth: int) -> CascadeNode:
        phase = phase % (2 * math.pi)
        if depth == 0:
            return CascadeNode(phase, amplitude)
        child_amp = amplitude / math.sqrt(2.0)
        return CascadeNode(phase, amplitude, (
            build((math.pi + phase) / 2.0, child_amp, depth - 1),
            build((math.pi - phase) / 2.0, child_amp, depth - 1),
        ))

    tree = build(target_phase, float(target_amplitude), k)
    logger.info(f"级联深度 {k}，叶节点相位 {[round(l.phase, 6) for l in tree.leaves()]}")
    return tree


def _leaf_state(node: CascadeNode, dim: int, source: str, leaf_T: float,
                warnings: List[str]) -> Tuple[State, float]:
    """按叶节点来源制备初始猫态，返回 (态, 预报概率)"""
    coeff = complex(np.exp(1j * node.phase))
    odd = abs(1.0 + coeff) < 1e-9
    if source == "cat":
        return cat(node.amplitude, 1.0, coeff, dim), 1.0

    if source == "squeezed_photon":
        if not odd:
            message = f"相位 {node.phase:.4f} 的叶节点没有 S(r)|1⟩ 近似，改用理想猫态"
            logger.warning(message)
            warnings.append(message)
            return cat(node.amplitude, 1.0, coeff, dim), 1.0
        target = cat(node.amplitude, 1.0, -1.0, dim)

        def loss(r: float) -> float:
            try:
                return -squeezed_single_photon(r, dim).fidelity(target)
            except TruncationError:
                return 0.0

        found = minimize_scalar(loss, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-8})
        return squeezed_single_photon(float(found.x), dim), 1.0

    if source == "pnrd":
        params = SchemeParams(squeezing_for_amplitude(node.amplitude, leaf_T), leaf_T, 0j, 1.0, coeff)
        if odd:
            ancilla = AncillaQubit(0.0, 1.0)
        else:
            ancilla = qubit_ancilla_coeffs(params.c_plus, params.c_minus, params)
        result = run_pnrd_scheme(params, ancilla, (2, 0), dim=dim)
        warnings.extend(result.warnings)
        return result.state, result.success_probability

    raise DomainError(f"未知的叶节点来源 {source!r}")


def run_cascade(tree: CascadeNode, window: HomodyneWindow, dim: Optional[int] = None,
                leaf_source: str = "cat", leaf_T: float = 0.99) -> GenerationResult:
    """
    按级联树递归执行放大

    结构相同的子树只计算一次，但每次出现都需要独立的一次成功，
    因此总成功概率是所有放大级 (按出现次数) 与叶节点预报概率之积。
    """
    if leaf_source not in LEAF_SOURCES:
        raise DomainError(f"未知的叶节点来源 {leaf_source!r}")
    if tree.is_leaf:
        raise InfeasibleCascadeError("级联树至少需要一级放大")
    dim = int(simulation_setting("dim", dim))
    warnings: List[str] = []
    stages: Dict[CascadeNode, Dict[str, Any]] = {}
    cache: Dict[CascadeNode, Tuple[State, float]] = {}

    def evaluate(node: CascadeNode) -> Tuple[State, float]:
        key = node
        if key in stages:
            stages[key]["count"] += 1
        if key in cache:
            return cache[key]
        if node.is_leaf:
            cache[key] = _leaf_state(node, dim, leaf_source, leaf_T, warnings)
            return cache[key]
        left, p_left = evaluate(node.children[0])
        right, p_right = evaluate(node.children[1])
        result = amplify_pair(left, right, window, dim, amplitude=node.children[0].amplitude,
                              phases=(node.children[0].phase, node.children[1].phase))
        warnings.extend(result.warnings)
        stages[key] = {
            "depth": node.depth,
            "phase": node.phase,
            "amplitude": node.amplitude,
            "success_probability": result.success_probability,
            "fidelity": result.fidelity_vs_target,
            "count": 1,
        }
        cache[key] = (result.state, result.success_probability * p_left * p_right)
        return cache[key]

    state, total = evaluate(tree)
    target = cat(tree.amplitude, 1.0, np.exp(1j * tree.phase), dim)
    logger.info(f"级联完成：总成功概率 {total:.3e}", extra={"probability": total})
    return GenerationResult(
        state=state,
        success_probability=total,
        fidelity_vs_target=fidelity_from_states(state, target),
        warnings=warnings,
        target=target,
        stages=sorted(stages.values(), key=lambda s: (s["depth"], s["phase"])),
        details={"tree": tree.to_dict(), "leaf_source": leaf_source, "depth": tree.depth},
    )
