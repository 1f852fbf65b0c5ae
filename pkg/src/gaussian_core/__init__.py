"""
特征函数引擎

把态与 POVM 元表示为有限个高斯形式之和，条件测量积分以闭式完成。

每一项的特征函数取
    χ(ω) = w · exp[−¼ ωᵀΓω + (i/√2) ωᵀd]
即 χ(ω) = Tr[ρ exp(i ωᵀẑ/√2)]，相空间坐标按 (x₁, p₁, x₂, p₂, …) 排列。
迹配对 Tr[ρΠ] = (2π)^{−modes} ∫ χ_ρ(ω) χ_Π(−ω) dω。
恒等算符表示为带标记的 δ 项，不做数值近似。
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import block_diag

from src.config import simulation_setting
from src.fock_core import DetectorModel
from src.utils import deinterleave_complex, encode_complex, decode_complex, interleave_complex
from src.utils.errors import (
    DomainError,
    IllConditionedIntegralError,
    ShapeError,
    ZeroProbabilityError,
)

logger = logging.getLogger(__name__)

OUTCOMES = ("off", "on")


def _mode_indices(modes: Sequence[int]) -> List[int]:
    return [i for k in modes for i in (2 * k, 2 * k + 1)]


def symplectic_form(modes: int) -> np.ndarray:
    """xpxp 排列下的辛形式 J = ⊕ [[0, 1], [−1, 0]]"""
    return np.kron(np.eye(modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """iJΓ 特征值的绝对值，每对只保留一个，升序"""
    cov = np.asarray(cov, dtype=float)
    modes = cov.shape[0] // 2
    vals = np.sort(np.abs(np.linalg.eigvals(1j * symplectic_form(modes) @ cov)))
    return vals[0::2]


@dataclass(frozen=True, eq=False)
class GaussianTerm:
    """
    单个高斯形式 w·exp[−¼ωᵀΓω + (i/√2)ωᵀd]

    Args:
        weight: 复权重
        mean: 长度 2·modes 的均值向量 (POVM 与相干并矢项允许复数)
        cov: 对称协方差矩阵
        is_delta: 为真时该项代表 w 倍恒等算符，mean 与 cov 不参与计算
    """

    weight: complex
    mean: np.ndarray
    cov: np.ndarray
    is_delta: bool = False

    def __post_init__(self):
        mean = np.array(self.mean, dtype=complex).ravel()
        cov = np.array(self.cov, dtype=complex)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] != mean.size or mean.size % 2:
            raise ShapeError(f"均值长度 {mean.size} 与协方差形状 {cov.shape} 不匹配")
        if cov.size and np.max(np.abs(cov - cov.T)) >= 1e-12:
            raise DomainError("协方差矩阵不对称")
        cov = 0.5 * (cov + cov.T)
        if not np.any(cov.imag):
            cov = cov.real
        if not np.any(mean.imag):
            mean = mean.real
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "weight", complex(self.weight))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def modes(self) -> int:
        return self.mean.size // 2

    @classmethod
    def delta(cls, weight: complex, modes: int) -> "GaussianTerm":
        return cls(weight, np.zeros(2 * modes), np.eye(2 * modes), is_delta=True)

    def evaluate(self, omega: np.ndarray) -> complex:
        if self.is_delta:
            raise DomainError("δ 项在逐点求值时没有定义")
        omega = np.asarray(omega, dtype=float)
        return complex(self.weight * np.exp(-0.25 * omega @ self.cov @ omega + 1j / np.sqrt(2) * omega @ self.mean))

    def is_physical(self, tol: float = 1e-9) -> bool:
        """实协方差且辛本征值 ≥ 1"""
        if self.is_delta or np.iscomplexobj(self.cov):
            return False
        return bool(np.all(symplectic_eigenvalues(self.cov) >= 1.0 - tol))

    def to_json(self) -> Dict[str, Any]:
        return {
            "weight": encode_complex(self.weight),
            "mean": interleave_complex(self.mean),
            "cov": interleave_complex(self.cov),
            "delta": self.is_delta,
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "GaussianTerm":
        mean = deinterleave_complex(data["mean"])
        cov = deinterleave_complex(data["cov"], (mean.size, mean.size))
        return cls(decode_complex(data["weight"]), mean, cov, bool(data.get("delta", False)))


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """高斯项的有限线性组合"""

    terms: Tuple[GaussianTerm, ...]
    modes: int

    def __post_init__(self):
        terms = tuple(self.terms)
        for term in terms:
            if term.modes != self.modes:
                raise ShapeError(f"混合中的项有 {term.modes} 模，期望 {self.modes} 模")
        object.__setattr__(self, "terms", terms)

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def has_delta(self) -> bool:
        return any(t.is_delta for t in self.terms)

    def trace(self) -> complex:
        """χ(0)，即各项权重之和"""
        if self.has_delta:
            raise DomainError("含 δ 项的混合没有有限的迹")
        return complex(sum(t.weight for t in self.terms))

    def evaluate(self, omega: np.ndarray) -> complex:
        return complex(sum(t.evaluate(omega) for t in self.terms))

    def scaled(self, factor: complex) -> "GaussianMixture":
        return GaussianMixture(
            tuple(GaussianTerm(t.weight * factor, t.mean, t.cov, t.is_delta) for t in self.terms), self.modes)

    def normalized(self) -> "GaussianMixture":
        return self.scaled(1.0 / self.trace().real)

    def to_json(self) -> Dict[str, Any]:
        return {"modes": self.modes, "terms": [t.to_json() for t in self.terms]}

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "GaussianMixture":
        return cls(tuple(GaussianTerm.from_json(t) for t in data["terms"]), int(data["modes"]))


@dataclass(frozen=True, eq=False)
class SymplecticMap:
    """相空间线性变换 z → S z，Γ → S Γ Sᵀ"""

    matrix: np.ndarray
    tolerance: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] % 2:
            raise ShapeError(f"辛矩阵必须是 2n×2n 方阵，得到 {matrix.shape}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        if not self.is_symplectic():
            raise DomainError("矩阵不满足 S J Sᵀ = J")

    @property
    def modes(self) -> int:
        return self.matrix.shape[0] // 2

    def is_symplectic(self) -> bool:
        j = symplectic_form(self.modes)
        return bool(np.max(np.abs(self.matrix @ j @ self.matrix.T - j)) < self.tolerance)

    def compose(self, other: "SymplecticMap") -> "SymplecticMap":
        """先作用 other，再作用 self"""
        return SymplecticMap(self.matrix @ other.matrix)

    def direct_sum(self, other: "SymplecticMap") -> "SymplecticMap":
        return SymplecticMap(block_diag(self.matrix, other.matrix))

    @classmethod
    def identity(cls, modes: int) -> "SymplecticMap":
        return cls(np.eye(2 * modes))

    def apply(self, mix: GaussianMixture) -> GaussianMixture:
        if mix.modes != self.modes:
            raise ShapeError(f"{self.modes} 模辛变换不能作用于 {mix.modes} 模混合")
        s = self.matrix
        return GaussianMixture(tuple(
            t if t.is_delta else GaussianTerm(t.weight, s @ t.mean, s @ t.cov @ s.T)
            for t in mix.terms), mix.modes)


def beamsplitter_map(T: float, modes: Tuple[int, int] = (0, 1), total_modes: int = 2) -> SymplecticMap:
    """
    分束器辛矩阵 [[√T I, √(1−T) I], [−√(1−T) I, √T I]]，嵌入 total_modes 模空间

    与 Fock 引擎的 B_T 一致：|α, β⟩ → |√T α + √(1−T) β, √T β − √(1−T) α⟩。
    """
    if not 0.0 < T <= 1.0:
        raise DomainError(f"透射率 T={T} 必须位于 (0, 1]")
    a, b = modes
    c, s = np.sqrt(T), np.sqrt(1.0 - T)
    matrix = np.eye(2 * total_modes)
    ia, ib = [2 * a, 2 * a + 1], [2 * b, 2 * b + 1]
    matrix[np.ix_(ia, ia)] = c * np.eye(2)
    matrix[np.ix_(ia, ib)] = s * np.eye(2)
    matrix[np.ix_(ib, ia)] = -s * np.eye(2)
    matrix[np.ix_(ib, ib)] = c * np.eye(2)
    return SymplecticMap(matrix)


def squeezed_vacuum_cf(r: float) -> GaussianMixture:
    """压缩真空，Γ = diag(e^{2r}, e^{−2r})"""
    return GaussianMixture((GaussianTerm(1.0, np.zeros(2), np.diag([np.exp(2 * r), np.exp(-2 * r)])),), 1)


def vacuum_cf(modes: int = 1) -> GaussianMixture:
    return GaussianMixture((GaussianTerm(1.0, np.zeros(2 * modes), np.eye(2 * modes)),), modes)


def coherent_dyad_cf(delta: complex, gamma: complex) -> GaussianTerm:
    """
    相干并矢 |δ⟩⟨γ| 的特征函数项

    权重 ⟨γ|δ⟩，协方差 I，复均值 (γ* + δ, −i(δ − γ*))。δ = γ 时即相干态 |γ⟩。
    """
    delta, gamma = complex(delta), complex(gamma)
    overlap = np.exp(-0.5 * abs(gamma) ** 2 - 0.5 * abs(delta) ** 2 + np.conj(gamma) * delta)
    mean = np.array([np.conj(gamma) + delta, -1j * (delta - np.conj(gamma))])
    return GaussianTerm(overlap, mean, np.eye(2))


def coherent_cf(gamma: complex) -> GaussianMixture:
    return GaussianMixture((coherent_dyad_cf(gamma, gamma),), 1)


def superposition_cf(alpha: complex, c_plus: complex, c_minus: complex) -> GaussianMixture:
    """归一化的 c₊|α⟩ + c₋|−α⟩，展开为四个并矢项"""
    alpha = complex(alpha)
    amps = ((complex(c_plus), alpha), (complex(c_minus), -alpha))
    norm2 = (abs(c_plus) ** 2 + abs(c_minus) ** 2
             + 2 * np.real(c_plus * np.conj(c_minus)) * np.exp(-2 * abs(alpha) ** 2))
    if norm2 < 1e-16:
        raise DomainError("叠加态范数为零")
    terms = []
    for ci, ai in amps:
        for cj, aj in amps:
            dyad = coherent_dyad_cf(ai, aj)
            terms.append(GaussianTerm(ci * np.conj(cj) * dyad.weight / norm2, dyad.mean, dyad.cov))
    return GaussianMixture(tuple(terms), 1)


def tensor(*mixtures: GaussianMixture) -> GaussianMixture:
    """张量积，项数相乘"""
    result = mixtures[0]
    for mix in mixtures[1:]:
        terms = []
        for a in result.terms:
            for b in mix.terms:
                if a.is_delta or b.is_delta:
                    raise DomainError("张量积不支持 δ 项")
                terms.append(GaussianTerm(a.weight * b.weight, np.concatenate([a.mean, b.mean]),
                                          block_diag(a.cov, b.cov)))
        result = GaussianMixture(tuple(terms), result.modes + mix.modes)
    return result


def marginal(mix: GaussianMixture, keep: Sequence[int]) -> GaussianMixture:
    """对未保留的模式求偏迹 (特征函数在对应变量处取零)"""
    idx = _mode_indices(keep)
    return GaussianMixture(tuple(
        GaussianTerm(t.weight, t.mean[idx], t.cov[np.ix_(idx, idx)]) for t in mix.terms), len(keep))


def apply_bs_chain(mix: GaussianMixture, T: float) -> GaussianMixture:
    """
    三模链路：信号 A 与 B 经透射率 T 的分束器，B 再与 C 经平衡分束器

    Args:
        mix: 三模混合 (信号 ⊗ 真空 ⊗ 真空)
        T: 抽头分束器透射率
    """
    if mix.modes != 3:
        raise ShapeError(f"分束器链路需要三模输入，得到 {mix.modes} 模")
    chain = beamsplitter_map(0.5, (1, 2), 3).compose(beamsplitter_map(T, (0, 1), 3))
    return chain.apply(mix)


def off_povm_cf(det: DetectorModel) -> GaussianMixture:
    """
    e^{−ν} D†(β)(1−η)^{n̂}D(β) 的特征函数

    单项：权重 e^{−ν}/η，协方差 ((2−η)/η)I，均值 −2(Re β, Im β)。
    """
    beta = det.displacement
    mean = -2.0 * np.array([beta.real, beta.imag])
    cov = (2.0 - det.eta) / det.eta * np.eye(2)
    return GaussianMixture((GaussianTerm(det.off_weight() / det.eta, mean, cov),), 1)


def onoff_povm_cf(det: DetectorModel) -> GaussianMixture:
    """χ_on = χ_I − χ_off；总是响应的探测器只剩 δ 项"""
    terms = [GaussianTerm.delta(1.0, 1)]
    if det.off_weight() > 0.0:
        off = off_povm_cf(det).terms[0]
        terms.append(GaussianTerm(-off.weight, off.mean, off.cov))
    return GaussianMixture(tuple(terms), 1)


def povm_cf(det: DetectorModel, outcome: str) -> GaussianMixture:
    if outcome == "on":
        return onoff_povm_cf(det)
    if outcome == "off":
        if det.off_weight() == 0.0:
            return GaussianMixture((), 1)
        return off_povm_cf(det)
    raise DomainError(f"未知的探测结果 {outcome!r}")


def _check_conditioning(k: np.ndarray, limit: float) -> None:
    sym = 0.5 * (k.real + k.real.T)
    if np.min(np.linalg.eigvalsh(sym)) <= 0.0:
        raise IllConditionedIntegralError("二次型实部不是正定的，高斯积分发散")
    cond = np.linalg.cond(k)
    if not np.isfinite(cond) or cond > limit:
        raise IllConditionedIntegralError(f"二次型条件数 {cond:.3e} 超过上限 {limit:.1e}")


def _integrate_term(term: GaussianTerm, measured: Sequence[int],
                    povm_terms: Sequence[GaussianTerm], limit: float) -> GaussianTerm:
    """对一个态项与一组单模 POVM 项积分掉被测模式"""
    keep = [k for k in range(term.modes) if k not in measured]
    weight = term.weight * np.prod([p.weight for p in povm_terms])
    gauss = [(k, p) for k, p in zip(measured, povm_terms) if not p.is_delta]
    u = _mode_indices(keep)
    a, b = term.cov, term.mean
    if not gauss:
        return GaussianTerm(weight, b[u], a[np.ix_(u, u)])

    # 换元 u = ω/√2 后 χ = exp(−½uᵀAu + i uᵀb)
    y = _mode_indices([k for k, _ in gauss])
    g = block_diag(*[p.cov for _, p in gauss])
    bg = np.concatenate([p.mean for _, p in gauss])
    k_mat = a[np.ix_(y, y)] + g
    _check_conditioning(k_mat, limit)
    diff = b[y] - bg
    k_inv_diff = np.linalg.solve(k_mat, diff)
    weight = weight * 2 ** len(gauss) / np.sqrt(complex(np.linalg.det(k_mat))) * np.exp(-0.5 * diff @ k_inv_diff)
    if not keep:
        return GaussianTerm(weight, np.zeros(0), np.zeros((0, 0)))
    a_uy = a[np.ix_(u, y)]
    cov = a[np.ix_(u, u)] - a_uy @ np.linalg.solve(k_mat, a_uy.T)
    mean = b[u] - a_uy @ k_inv_diff
    return GaussianTerm(weight, mean, 0.5 * (cov + cov.T))


def condition_mixture(state: GaussianMixture, measured: Sequence[int],
                      povms: Sequence[GaussianMixture],
                      condition_limit: Optional[float] = None) -> GaussianMixture:
    """
    条件测量的未归一化输出 Tr_measured[(I⊗Π)ρ]

    Args:
        state: 多模态
        measured: 被测模式编号
        povms: 各被测模式的单模 POVM 混合

    Returns:
        剩余模式上的未归一化混合，其迹即该结果的概率
    """
    if len(measured) != len(povms):
        raise ShapeError("被测模式与 POVM 数量不一致")
    if state.has_delta:
        raise DomainError("态混合中不能含 δ 项")
    limit = float(simulation_setting("condition_limit", condition_limit))
    terms = []
    for term in state.terms:
        for combo in np.ndindex(*[len(p) for p in povms]):
            povm_terms = [p.terms[i] for p, i in zip(povms, combo)]
            terms.append(_integrate_term(term, measured, povm_terms, limit))
    return GaussianMixture(tuple(terms), state.modes - len(measured))


def conditional_output_cf(state: GaussianMixture, det_B: DetectorModel, det_C: DetectorModel,
                          floor: Optional[float] = None,
                          condition_limit: Optional[float] = None) -> Tuple[GaussianMixture, float]:
    """
    B、C 两个开关探测器同时响应时模式 A 的输出

    (δ − χ_off,B)(δ − χ_off,C) 展开为四组项：δ 项直接边缘化，高斯项闭式积分。

    Returns:
        (归一化的单模输出混合, 同时响应概率)
    """
    if state.modes != 3:
        raise ShapeError(f"需要三模输入，得到 {state.modes} 模")
    out = condition_mixture(state, (1, 2), (onoff_povm_cf(det_B), onoff_povm_cf(det_C)), condition_limit)
    p = out.trace()
    if abs(p.imag) > 1e-9:
        logger.warning(f"同时响应概率含虚部 {p.imag:.3e}")
    p = float(p.real)
    floor = float(simulation_setting("probability_floor", floor))
    if p < floor:
        raise ZeroProbabilityError(f"同时响应概率 {p:.3e} 低于下限 {floor:.1e}", p)
    return out.scaled(1.0 / p), min(p, 1.0)


def outcome_probabilities(state: GaussianMixture, det_B: DetectorModel, det_C: DetectorModel,
                          condition_limit: Optional[float] = None) -> Dict[Tuple[str, str], float]:
    """四种探测结果 {off, on}² 的概率，键为 (B 的结果, C 的结果)"""
    probs = {}
    for ob in OUTCOMES:
        for oc in OUTCOMES:
            povms = (povm_cf(det_B, ob), povm_cf(det_C, oc))
            if any(len(p) == 0 for p in povms):
                probs[(ob, oc)] = 0.0
                continue
            probs[(ob, oc)] = float(condition_mixture(state, (1, 2), povms, condition_limit).trace().real)
    return probs


def trace_pairing(rho: GaussianMixture, op: GaussianMixture,
                  condition_limit: Optional[float] = None) -> complex:
    """Tr[ρ Π]，Π 可以含 δ 项"""
    if rho.modes != op.modes:
        raise ShapeError("配对双方模式数不一致")
    measured = list(range(rho.modes))
    limit = float(simulation_setting("condition_limit", condition_limit))
    total = 0j
    for a in rho.terms:
        if a.is_delta:
            raise DomainError("ρ 中不能含 δ 项")
        for b in op.terms:
            if b.is_delta:
                total += a.weight * b.weight
                continue
            total += _pair_terms(a, b, measured, limit)
    return complex(total)


def _pair_terms(a: GaussianTerm, b: GaussianTerm, measured: List[int], limit: float) -> complex:
    # 多模 POVM 项按单模分块时需要块对角协方差，这里直接做全维积分
    k_mat = a.cov + b.cov
    _check_conditioning(k_mat, limit)
    diff = a.mean - b.mean
    return complex(a.weight * b.weight * 2 ** len(measured) / np.sqrt(complex(np.linalg.det(k_mat)))
                   * np.exp(-0.5 * diff @ np.linalg.solve(k_mat, diff)))


def fidelity_with_superposition(mix: GaussianMixture, alpha: complex, c_plus: complex,
                                c_minus: complex) -> float:
    """单模混合与目标 c₊|α⟩ + c₋|−α⟩ 的保真度 ⟨ψ|ρ|ψ⟩"""
    return float(trace_pairing(mix, superposition_cf(alpha, c_plus, c_minus)).real)


def mean_photon_numbers(mix: GaussianMixture) -> np.ndarray:
    """各模式平均光子数 Σw[(TrΓ_k − 2)/4 + d_kᵀd_k/4] / Σw"""
    total = mix.trace()
    result = np.zeros(mix.modes)
    for k in range(mix.modes):
        idx = _mode_indices([k])
        value = sum(t.weight * ((np.trace(t.cov[np.ix_(idx, idx)]) - 2.0) / 4.0 + t.mean[idx] @ t.mean[idx] / 4.0)
                    for t in mix.terms)
        result[k] = float(np.real(value / total))
    return result
