"""
解析公式模块

光子减除压缩真空的分解系数、准相干态、保真度闭式、光子数概率 P_m 与最优位移 β。
所有公式只依赖 μ = λT (λ = tanh r)，并在测试中与 fock_core 的暴力计算互相校验。
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import gammaln

from src.config import simulation_setting
from src.fock_core import FockOperator, FockVector, photon_subtracted
from src.utils import encode_complex
from src.utils.errors import DomainError, SingularTargetError, TruncationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SchemeParams:
    """
    方案参数

    Args:
        r: 压缩参数 (≥ 0)
        T: 抽头分束器透射率 (0, 1]
        beta: 位移
        c_plus: 目标 c₊|φ₊⟩ + c₋|φ₋⟩ 中的 c₊
        c_minus: 目标中的 c₋
    """

    r: float
    T: float
    beta: complex = 0j
    c_plus: complex = 1.0 + 0j
    c_minus: complex = 0j

    def __post_init__(self):
        if not self.r >= 0.0:
            raise DomainError(f"压缩参数 r={self.r} 必须非负")
        if not 0.0 < self.T <= 1.0:
            raise DomainError(f"透射率 T={self.T} 必须位于 (0, 1]")
        object.__setattr__(self, "beta", complex(self.beta))
        object.__setattr__(self, "c_plus", complex(self.c_plus))
        object.__setattr__(self, "c_minus", complex(self.c_minus))
        if self.c_plus == 0 and self.c_minus == 0:
            raise DomainError("c₊ 与 c₋ 不能同时为零")

    @property
    def lam(self) -> float:
        return float(np.tanh(self.r))

    @property
    def mu(self) -> float:
        """λT"""
        return self.lam * self.T

    def with_beta(self, beta: complex) -> "SchemeParams":
        return replace(self, beta=complex(beta))

    def with_target(self, c_plus: complex, c_minus: complex) -> "SchemeParams":
        return replace(self, c_plus=complex(c_plus), c_minus=complex(c_minus))

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "T": self.T,
            "beta": encode_complex(self.beta),
            "c_plus": encode_complex(self.c_plus),
            "c_minus": encode_complex(self.c_minus),
        }


@dataclass(frozen=True)
class DecompositionCoeffs:
    """|φ±⟩ = c₂|Ψ₂⟩ ± c₁|Ψ₁⟩ 的系数与对应相干态振幅"""

    c1: float
    c2: float
    alpha: float


@dataclass(frozen=True)
class AncillaQubit:
    """辅助量子比特 b₀|0⟩ + b₁|1⟩"""

    b0: complex
    b1: complex

    def __post_init__(self):
        object.__setattr__(self, "b0", complex(self.b0))
        object.__setattr__(self, "b1", complex(self.b1))
        norm = abs(self.b0) ** 2 + abs(self.b1) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise DomainError(f"辅助比特未归一化: |b₀|²+|b₁|² = {norm:.15f}")

    @classmethod
    def normalized(cls, b0: complex, b1: complex) -> "AncillaQubit":
        norm = np.sqrt(abs(b0) ** 2 + abs(b1) ** 2)
        if norm == 0:
            raise DomainError("辅助比特振幅不能全为零")
        return cls(b0 / norm, b1 / norm)

    def as_vector(self, dim: int) -> FockVector:
        amps = np.zeros(dim, dtype=complex)
        amps[0], amps[1] = self.b0, self.b1
        return FockVector(amps)


def _mu(params: Union[SchemeParams, float]) -> float:
    return params.mu if isinstance(params, SchemeParams) else float(params)


def cat_amplitude(params: Union[SchemeParams, float]) -> float:
    """α = √(3λT / (1 − λ²T²))"""
    mu = _mu(params)
    return float(np.sqrt(3.0 * mu / (1.0 - mu ** 2)))


def squeezing_for_amplitude(alpha: float, T: float) -> float:
    """
    给定目标振幅 α 与透射率 T，反解压缩参数 r

    Raises:
        DomainError: 所需 λ = μ/T ≥ 1
    """
    if alpha <= 0:
        return 0.0
    mu = (-3.0 + np.sqrt(9.0 + 4.0 * alpha ** 4)) / (2.0 * alpha ** 2)
    lam = mu / T
    if lam >= 1.0:
        raise DomainError(f"振幅 α={alpha} 在 T={T} 下需要 λ={lam:.4f} ≥ 1")
    return float(np.arctanh(lam))


def decomposition_coeffs(params: SchemeParams) -> DecompositionCoeffs:
    mu = params.mu
    if not 0.0 < mu < 1.0:
        raise DomainError(f"λT={mu} 时分解退化 (c₁ = 0)")
    denom = (1.0 + mu) * (1.0 + 2.0 * mu)
    return DecompositionCoeffs(
        c1=float(np.sqrt(3.0 * mu / denom)),
        c2=float(np.sqrt((1.0 + 2.0 * mu ** 2) / denom)),
        alpha=cat_amplitude(mu),
    )


def phi_pm_state(params: SchemeParams, sign: int, dim: int,
                 tolerance: Optional[float] = None) -> FockVector:
    """
    准相干态 |φ±⟩

    偶数支的因子取 √(1 − λ²T²)，使级数在给定前因子下归一。

    Args:
        params: 方案参数
        sign: +1 或 −1
        dim: 截断维度
    """
    if sign not in (1, -1):
        raise DomainError(f"sign 必须为 ±1，得到 {sign}")
    mu = params.mu
    if not 0.0 < mu < 1.0:
        raise DomainError(f"λT={mu} 超出 (0, 1)")
    pref = (1.0 - mu ** 2) ** 0.75 / (2.0 * np.sqrt((1.0 + mu) * (1.0 + 2.0 * mu)))
    amps = np.zeros(dim, dtype=complex)
    n = np.arange((dim + 1) // 2)
    common = gammaln(2 * n + 3) - gammaln(n + 2) + n * np.log(mu / 2.0)
    amps[0::2] = pref * np.sqrt(1.0 - mu ** 2) * np.exp(common - 0.5 * gammaln(2 * n + 1))
    n_odd = n[: dim // 2]
    amps[1::2] = sign * pref * np.sqrt(3.0 * mu) * np.exp(common[: dim // 2] - 0.5 * gammaln(2 * n_odd + 2))
    tail = max(0.0, 1.0 - float(np.sum(np.abs(amps) ** 2)))
    tol = float(simulation_setting("truncation_tolerance", tolerance))
    if tail >= tol:
        raise TruncationError(f"|φ±⟩ 截断尾部质量 {tail:.3e} 超过容差 {tol:.1e}", tail)
    return FockVector(amps, tail).normalize()


def fidelity_closed_form(params: Union[SchemeParams, float]) -> float:
    """F = |⟨α|φ₊⟩|² = √(1−μ²)(1+μ)(1+2μ)exp[−3μ/(1+μ)]"""
    mu = _mu(params)
    if not 0.0 <= mu < 1.0:
        raise DomainError(f"λT={mu} 超出 [0, 1)")
    return float(np.sqrt(1.0 - mu ** 2) * (1.0 + mu) * (1.0 + 2.0 * mu) * np.exp(-3.0 * mu / (1.0 + mu)))


def p_m(params: SchemeParams, m: int) -> float:
    """反射模中出现 m 个光子的概率"""
    if m < 0:
        raise DomainError(f"光子数 m={m} 必须非负")
    lam, T, mu = params.lam, params.T, params.mu
    head = np.sqrt((1.0 - lam ** 2) / (1.0 - mu ** 2))
    if m == 0:
        return float(head)
    if mu == 0.0 or T == 1.0:
        return 0.0
    base = lam ** 2 * T * (1.0 - T) / (1.0 - mu ** 2)
    k = np.arange(m // 2 + 1)
    log_terms = gammaln(m + 1) - gammaln(m - 2 * k + 1) - 2 * gammaln(k + 1) - 2 * k * np.log(2.0 * mu)
    return float(head * np.exp(m * np.log(base) + np.log(np.sum(np.exp(log_terms)))))


def p_m_distribution(params: SchemeParams, m_max: int) -> np.ndarray:
    return np.array([p_m(params, m) for m in range(m_max + 1)])


def _target_ratio(c_plus: complex, c_minus: complex, threshold: Optional[float] = None,
                  soft_band: Optional[float] = None) -> complex:
    """(c₊ − c₋)/(c₊ + c₋)，分母接近零时报错或警告"""
    threshold = float(simulation_setting("singular_threshold", threshold))
    soft_band = float(simulation_setting("soft_singular_band", soft_band))
    scale = max(abs(c_plus), abs(c_minus))
    denom = abs(c_plus + c_minus) / scale
    if denom < threshold:
        raise SingularTargetError(f"c₊ + c₋ ≈ 0 (相对大小 {denom:.2e})，目标接近 |Ψ₁⟩，位移公式失效")
    if denom < soft_band:
        logger.warning(f"c₊ + c₋ 相对大小 {denom:.2e} 很小，最优位移公式精度下降")
    return complex((c_plus - c_minus) / (c_plus + c_minus))


def validity_ratio(params: SchemeParams) -> float:
    """|(c₊−c₋)/(c₊+c₋)|² 与 2(1−λ²T²)/(3λ(1−T)) 之比，远小于 1 时小 β 近似成立"""
    ratio = _target_ratio(params.c_plus, params.c_minus)
    scale = 3.0 * params.lam * (1.0 - params.T)
    if scale == 0.0:
        return 0.0
    return float(abs(ratio) ** 2 * scale / (2.0 * (1.0 - params.mu ** 2)))


def optimal_beta(params: SchemeParams) -> Tuple[complex, float]:
    """
    生成 c₊|φ₊⟩ + c₋|φ₋⟩ 的最优位移

    Returns:
        (β, 有效性比值)，比值超过 0.1 左右时小 β 近似不再可靠

    Raises:
        SingularTargetError: c₊ + c₋ ≈ 0
    """
    ratio = _target_ratio(params.c_plus, params.c_minus)
    beta = ratio * np.sqrt(3.0 * params.lam * (1.0 - params.T) / (2.0 * (1.0 - params.mu ** 2)))
    return complex(beta), validity_ratio(params)


def qubit_ancilla_coeffs(c_plus: complex, c_minus: complex, params: SchemeParams,
                         outcome: Tuple[int, int] = (2, 0)) -> AncillaQubit:
    """
    光子数分辨方案所需的辅助比特

    两个结果下的输出分别为
        (2,0): −(b₁/√2)√P₁|Ψ₁⟩ + (b₀/2)√P₂|Ψ₂⟩
        (0,2): +(b₁/√2)√P₁|Ψ₁⟩ + (b₀/2)√P₂|Ψ₂⟩
    令其与 (c₊+c₋)c₂|Ψ₂⟩ + (c₊−c₋)c₁|Ψ₁⟩ 成比例即得 (b₀, b₁)。
    """
    if tuple(outcome) not in ((2, 0), (0, 2)):
        raise DomainError(f"未知的探测结果 {outcome}")
    _target_ratio(complex(c_plus), complex(c_minus))
    coeffs = decomposition_coeffs(params)
    sign = -1.0 if tuple(outcome) == (2, 0) else 1.0
    b1 = sign * (c_plus - c_minus) * coeffs.c1 / np.sqrt(p_m(params, 1) / 2.0)
    b0 = (c_plus + c_minus) * coeffs.c2 / (np.sqrt(p_m(params, 2)) / 2.0)
    return AncillaQubit.normalized(b0, b1)


def mixed_output_model(params: SchemeParams, dim: int, beta: Optional[complex] = None) -> FockOperator:
    """
    大位移极限下的输出混合态

    ρ = (1 − e^{−|β|²})|Ψ₁⟩⟨Ψ₁| + e^{−|β|²}|Ψ_out⟩⟨Ψ_out|，
    Ψ_out ∝ β√P₁|Ψ₁⟩ + √P₂|Ψ₂⟩
    """
    beta = params.beta if beta is None else complex(beta)
    psi1, p1 = photon_subtracted(params.r, params.T, 1, dim)
    psi2, p2 = photon_subtracted(params.r, params.T, 2, dim)
    out = FockVector(beta * np.sqrt(p1) * psi1.amps + np.sqrt(p2) * psi2.amps).normalize()
    w = float(np.exp(-abs(beta) ** 2))
    rho = (1.0 - w) * psi1.to_density().entries + w * out.to_density().entries
    return FockOperator(rho, hermitian_hint=True)
