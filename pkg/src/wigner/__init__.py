"""
Wigner 函数

约定 x̂ = â + â†、p̂ = −i(â − â†)：真空峰值 1/(2π)，∫W dx dp = 1，
4π∫W_a W_b dx dp = Tr[ρ_a ρ_b]，实振幅 α 的猫态两峰位于 x = ±2α。
"""

import io
import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from qutip import Qobj, wigner as qutip_wigner

from src.config import get_config, simulation_setting
from src.fock_core import FockOperator, FockVector
from src.gaussian_core import GaussianMixture
from src.utils.errors import DomainError, GridTooCoarseError, IllConditionedIntegralError, ShapeError

logger = logging.getLogger(__name__)

NORM_ERROR_LIMIT = 1e-2
NORM_WARNING_LIMIT = 1e-3


@dataclass(frozen=True)
class GridSpec:
    """相空间网格 (两个方向的取值范围与点数)"""

    x_min: float = -5.0
    x_max: float = 5.0
    x_points: int = 201
    p_min: float = -5.0
    p_max: float = 5.0
    p_points: int = 201

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.p_max > self.p_min):
            raise DomainError("网格范围上限必须大于下限")
        if self.x_points < 2 or self.p_points < 2:
            raise DomainError("网格每个方向至少需要两个点")

    @classmethod
    def square(cls, lo: float, hi: float, points: int) -> "GridSpec":
        return cls(lo, hi, int(points), lo, hi, int(points))

    @classmethod
    def from_config(cls) -> "GridSpec":
        cfg = get_config("wigner")
        return cls.square(cfg.get("x_min", -5.0), cfg.get("x_max", 5.0), cfg.get("points", 201))

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        return (np.linspace(self.x_min, self.x_max, self.x_points),
                np.linspace(self.p_min, self.p_max, self.p_points))


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """网格上的 Wigner 函数，values[i_p, i_x]"""

    x: np.ndarray
    p: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.p.size, self.x.size):
            raise ShapeError(f"Wigner 值形状 {self.values.shape} 与坐标轴 ({self.p.size}, {self.x.size}) 不符")

    @property
    def x_range(self) -> Tuple[float, float, int]:
        return float(self.x[0]), float(self.x[-1]), int(self.x.size)

    @property
    def p_range(self) -> Tuple[float, float, int]:
        return float(self.p[0]), float(self.p[-1]), int(self.p.size)

    @property
    def cell(self) -> float:
        return float((self.x[1] - self.x[0]) * (self.p[1] - self.p[0]))

    @property
    def norm_estimate(self) -> float:
        return float(np.sum(self.values) * self.cell)

    def value_at(self, x: float, p: float) -> float:
        """最近网格点上的值"""
        return float(self.values[int(np.argmin(np.abs(self.p - p))), int(np.argmin(np.abs(self.x - x)))])

    def to_csv(self, digits: Optional[int] = None) -> str:
        """x,p,w 三列，按 values 行优先输出"""
        digits = int(digits or get_config("output").get("csv_digits", 9))
        xx, pp = np.meshgrid(self.x, self.p)
        table = np.column_stack([xx.ravel(), pp.ravel(), self.values.ravel()])
        buffer = io.StringIO()
        np.savetxt(buffer, table, fmt=f"%.{digits}g", delimiter=",", header="x,p,w", comments="")
        return buffer.getvalue()


def _check_norm(grid: WignerGrid) -> WignerGrid:
    deviation = abs(grid.norm_estimate - 1.0)
    if deviation > NORM_ERROR_LIMIT:
        raise GridTooCoarseError(f"Wigner 归一化估计 {grid.norm_estimate:.6f} 偏离 1 超过 {NORM_ERROR_LIMIT}",
                                 grid.norm_estimate)
    if deviation > NORM_WARNING_LIMIT:
        logger.warning(f"Wigner 归一化估计 {grid.norm_estimate:.6f}，网格可能未收敛")
    return grid


def wigner_from_fock(rho: Union[FockOperator, FockVector], spec: Optional[GridSpec] = None) -> WignerGrid:
    """
    Fock 基下密度矩阵的 Wigner 函数

    Raises:
        GridTooCoarseError: 网格积分偏离 1 超过 1e−2
    """
    spec = spec or GridSpec.from_config()
    if isinstance(rho, FockVector):
        rho = rho.normalize().to_density()
    x, p = spec.axes()
    # g = 1 对应 â = (x + ip)/2
    values = np.real(qutip_wigner(Qobj(np.asarray(rho.entries)), x, p, g=1.0))
    return _check_norm(WignerGrid(x, p, values))


def wigner_from_gaussian_mixture(mix: GaussianMixture, spec: Optional[GridSpec] = None,
                                 condition_limit: Optional[float] = None) -> WignerGrid:
    """
    单模高斯混合的 Wigner 函数：每一项解析地变为 w·N(z; d, Γ)，不做数值傅里叶变换
    """
    if mix.modes != 1:
        raise ShapeError(f"只支持单模混合，得到 {mix.modes} 模")
    limit = float(simulation_setting("condition_limit", condition_limit))
    spec = spec or GridSpec.from_config()
    x, p = spec.axes()
    xx, pp = np.meshgrid(x, p)
    z = np.stack([xx, pp], axis=-1)
    total = np.zeros(xx.shape, dtype=complex)
    for term in mix.terms:
        if term.is_delta:
            raise DomainError("δ 项没有 Wigner 函数")
        cov = term.cov
        if np.linalg.cond(cov) > limit:
            raise IllConditionedIntegralError("协方差矩阵接近奇异")
        inv = np.linalg.inv(cov)
        det = complex(np.linalg.det(cov))
        diff = z - term.mean
        quad = np.einsum("...i,ij,...j->...", diff, inv, diff)
        total += term.weight * np.exp(-0.5 * quad) / (2.0 * np.pi * np.sqrt(det))
    return _check_norm(WignerGrid(x, p, np.real(total)))


def cat_wigner_analytic(alpha: float, parity: int, spec: Optional[GridSpec] = None) -> WignerGrid:
    """
    实振幅猫态 |α⟩ ± |−α⟩ 的解析 Wigner 函数

    W = [e^{−(x−2α)²/2−p²/2} + e^{−(x+2α)²/2−p²/2} ± 2e^{−(x²+p²)/2}cos(2αp)] / (2πN±)，
    N± = 2(1 ± e^{−2α²})
    """
    if parity not in (1, -1):
        raise DomainError(f"parity 必须为 ±1，得到 {parity}")
    spec = spec or GridSpec.from_config()
    x, p = spec.axes()
    xx, pp = np.meshgrid(x, p)
    norm = 2.0 * (1.0 + parity * np.exp(-2.0 * alpha ** 2))
    if norm < 1e-14:
        raise DomainError("α = 0 的奇猫态不存在")
    values = (np.exp(-0.5 * (xx - 2 * alpha) ** 2 - 0.5 * pp ** 2)
              + np.exp(-0.5 * (xx + 2 * alpha) ** 2 - 0.5 * pp ** 2)
              + parity * 2.0 * np.exp(-0.5 * (xx ** 2 + pp ** 2)) * np.cos(2 * alpha * pp))
    return WignerGrid(x, p, values / (2.0 * np.pi * norm))


def wigner_overlap(a: WignerGrid, b: WignerGrid) -> float:
    """4π∫W_a W_b dx dp，即 Tr[ρ_a ρ_b]"""
    if a.values.shape != b.values.shape:
        raise ShapeError("两个网格形状不同")
    return float(4.0 * np.pi * np.sum(a.values * b.values) * a.cell)


def wigner_negativity(grid: WignerGrid) -> float:
    """负值体积 ∫|min(W, 0)|"""
    return float(-np.sum(np.minimum(grid.values, 0.0)) * grid.cell)


def fidelity_from_states(a: Union[FockOperator, FockVector], b: FockVector) -> float:
    """
    与纯目标态的保真度

    Args:
        a: 纯态或密度矩阵
        b: 纯目标态

    Returns:
        ⟨b|ρ_a|b⟩，a 为纯态时即 |⟨b|a⟩|²
    """
    if isinstance(a, FockVector):
        return a.fidelity(b)
    d = max(a.dim, b.dim)
    value = float(np.real(a.padded(d).expectation(b.padded(d).normalize())) / a.trace().real)
    return float(np.clip(value, 0.0, 1.0))
