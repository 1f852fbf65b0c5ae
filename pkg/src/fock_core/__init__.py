"""
Fock 空间精确引擎

在截断的光子数基上表示态、算符与测量，是所有解析公式的暴力校验基准。
正交分量约定：x̂ = â + â†，p̂ = −i(â − â†)，真空协方差为单位阵。
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import expm
from scipy.special import eval_genlaguerre, gammaln

from src.config import simulation_setting
from src.utils import deinterleave_complex, interleave_complex
from src.utils.errors import (
    DegenerateStateError,
    DomainError,
    ShapeError,
    TruncationError,
    ZeroProbabilityError,
)

logger = logging.getLogger(__name__)

# 位移算符矩阵元计算时，在目标维度之外额外保留的光子数
DISPLACEMENT_GUARD = 40


@dataclass(frozen=True, eq=False)
class FockVector:
    """截断Fock空间中的纯态振幅"""

    amps: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex)
        if amps.ndim != 1 or amps.size == 0:
            raise ShapeError(f"FockVector 需要非空一维振幅数组，得到形状 {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)
        object.__setattr__(self, "tail_mass", float(self.tail_mass))

    @property
    def dim(self) -> int:
        return int(self.amps.size)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalize(self) -> "FockVector":
        """返回归一化后的新态"""
        n = self.norm()
        if n < 1e-300:
            raise DegenerateStateError("零向量无法归一化")
        return FockVector(self.amps / n, self.tail_mass)

    def padded(self, dim: int) -> "FockVector":
        """补零到 dim 维；截短时被丢弃的分量必须为零"""
        if dim == self.dim:
            return self
        if dim > self.dim:
            return FockVector(np.concatenate([self.amps, np.zeros(dim - self.dim, dtype=complex)]), self.tail_mass)
        if np.any(np.abs(self.amps[dim:]) > 1e-14):
            raise ShapeError(f"无法把 {self.dim} 维态截短到 {dim} 维而不丢失振幅")
        return FockVector(self.amps[:dim], self.tail_mass)

    def inner(self, other: "FockVector") -> complex:
        """⟨self|other⟩，维度不同时补零对齐"""
        d = max(self.dim, other.dim)
        return complex(np.vdot(self.padded(d).amps, other.padded(d).amps))

    def fidelity(self, other: "FockVector") -> float:
        """|⟨self|other⟩|² / (‖self‖²‖other‖²)"""
        return float(abs(self.inner(other)) ** 2 / (self.norm() ** 2 * other.norm() ** 2))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def mean_photon_number(self) -> float:
        p = self.probabilities()
        return float(np.dot(np.arange(self.dim), p) / p.sum())

    def parity_flip(self) -> "FockVector":
        """作用宇称算符 (−1)^n̂"""
        signs = np.where(np.arange(self.dim) % 2 == 0, 1.0, -1.0)
        return FockVector(self.amps * signs, self.tail_mass)

    def with_canonical_phase(self) -> "FockVector":
        """去掉整体相位，使第一个非零振幅为正实数"""
        mags = np.abs(self.amps)
        idx = int(np.argmax(mags > 1e-12 * mags.max()))
        phase = self.amps[idx] / mags[idx]
        return FockVector(self.amps * np.conj(phase), self.tail_mass)

    def to_density(self) -> "FockOperator":
        return FockOperator(np.outer(self.amps, np.conj(self.amps)), hermitian_hint=True)

    def to_json(self) -> Dict[str, Any]:
        return {"dim": self.dim, "amps": interleave_complex(self.amps), "tail_mass": self.tail_mass}

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "FockVector":
        amps = deinterleave_complex(data["amps"])
        if amps.size != data["dim"]:
            raise ShapeError(f"dim={data['dim']} 与振幅长度 {amps.size} 不一致")
        return cls(amps, data.get("tail_mass", 0.0))


@dataclass(frozen=True, eq=False)
class FockOperator:
    """截断Fock空间中的算符 (密度矩阵、POVM 元或幺正算符)"""

    entries: np.ndarray
    hermitian_hint: bool = False

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ShapeError(f"FockOperator 需要方阵，得到形状 {entries.shape}")
        if self.hermitian_hint:
            error = np.max(np.abs(entries - entries.conj().T)) if entries.size else 0.0
            if error >= 1e-12:
                raise DomainError(f"标记为厄米的算符偏离厄米性 {error:.3e}")
            entries = 0.5 * (entries + entries.conj().T)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    @classmethod
    def identity(cls, dim: int) -> "FockOperator":
        return cls(np.eye(dim), hermitian_hint=True)

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def padded(self, dim: int) -> "FockOperator":
        if dim <= self.dim:
            return self
        out = np.zeros((dim, dim), dtype=complex)
        out[: self.dim, : self.dim] = self.entries
        return FockOperator(out, self.hermitian_hint)

    def expectation(self, vec: FockVector) -> complex:
        """⟨v|O|v⟩"""
        d = max(self.dim, vec.dim)
        v = vec.padded(d).amps
        return complex(np.vdot(v, self.padded(d).entries @ v))

    def eigenvalues(self) -> np.ndarray:
        if self.hermitian_hint:
            return np.linalg.eigvalsh(self.entries)
        return np.linalg.eigvals(self.entries)

    def is_positive(self, tol: float = 1e-10) -> bool:
        """POVM 元与密度矩阵的半正定性检查"""
        return bool(self.hermitian_hint and np.min(self.eigenvalues()) > -tol)

    def normalized(self) -> "FockOperator":
        tr = self.trace().real
        if tr <= 0:
            raise DegenerateStateError("迹非正的算符无法归一化")
        return FockOperator(self.entries / tr, self.hermitian_hint)

    def purity(self) -> float:
        return float(np.real(np.trace(self.entries @ self.entries)))

    def mean_photon_number(self) -> float:
        return float(np.real(np.dot(np.arange(self.dim), np.diag(self.entries))) / self.trace().real)

    def to_json(self) -> Dict[str, Any]:
        return {"dim": self.dim, "entries": interleave_complex(self.entries), "hermitian_hint": self.hermitian_hint}

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "FockOperator":
        d = data["dim"]
        return cls(deinterleave_complex(data["entries"], (d, d)), data.get("hermitian_hint", False))


@dataclass(frozen=True, eq=False)
class JointState:
    """两模或三模联合纯态，amps[n_A, n_B(, n_C)]"""

    amps: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex)
        if amps.ndim not in (2, 3):
            raise ShapeError(f"联合态只支持两模或三模，得到 {amps.ndim} 模")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)
        object.__setattr__(self, "tail_mass", float(self.tail_mass))

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(int(d) for d in self.amps.shape)

    @property
    def modes(self) -> int:
        return self.amps.ndim

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalize(self) -> "JointState":
        n = self.norm()
        if n < 1e-300:
            raise DegenerateStateError("零向量无法归一化")
        return type(self)(self.amps / n, self.tail_mass)

    def reduced_density(self, keep: int) -> FockOperator:
        """对其余模式求偏迹"""
        psi = np.moveaxis(self.amps, keep, 0).reshape(self.dims[keep], -1)
        return FockOperator(psi @ psi.conj().T, hermitian_hint=True)

    def mean_photon_number(self, mode: int) -> float:
        probs = np.abs(self.amps) ** 2
        axes = tuple(k for k in range(self.modes) if k != mode)
        marginal = probs.sum(axis=axes)
        return float(np.dot(np.arange(marginal.size), marginal) / marginal.sum())


class TwoModeState(JointState):
    """两模联合纯态"""

    def __post_init__(self):
        super().__post_init__()
        if self.modes != 2:
            raise ShapeError(f"TwoModeState 需要两模振幅，得到 {self.modes} 模")


@dataclass(frozen=True, eq=False)
class JointDensity:
    """两模联合密度矩阵，行列按 (n_0, n_1) 行优先展平"""

    entries: np.ndarray
    dims: Tuple[int, int]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        entries = np.array(self.entries, dtype=complex)
        size = int(np.prod(dims))
        if len(dims) != 2 or entries.shape != (size, size):
            raise ShapeError(f"联合密度矩阵形状 {entries.shape} 与维度 {dims} 不符")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "dims", dims)

    @property
    def modes(self) -> int:
        return 2

    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))


@dataclass(frozen=True)
class DetectorModel:
    """
    开关型 (on/off) 探测器

    Args:
        eta: 量子效率 (0, 1]
        nu: 暗计数参数，math.inf 表示总是响应
        displacement: 探测前施加的位移 β
    """

    eta: float = 1.0
    nu: float = 0.0
    displacement: complex = 0j

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise DomainError(f"量子效率 eta={self.eta} 必须位于 (0, 1]")
        if not self.nu >= 0.0:
            raise DomainError(f"暗计数参数 nu={self.nu} 必须非负")
        object.__setattr__(self, "displacement", complex(self.displacement))

    @classmethod
    def ideal(cls, displacement: complex = 0j) -> "DetectorModel":
        return cls(1.0, 0.0, displacement)

    @classmethod
    def always_on(cls) -> "DetectorModel":
        """Π_off = 0 的极限探测器，测量等价于恒等算符"""
        return cls(1.0, float("inf"), 0j)

    @property
    def is_ideal(self) -> bool:
        return self.eta == 1.0 and self.nu == 0.0

    def off_weight(self) -> float:
        return float(np.exp(-self.nu))

    def with_displacement(self, displacement: complex) -> "DetectorModel":
        return DetectorModel(self.eta, self.nu, displacement)


def _tolerance(tolerance: Optional[float]) -> float:
    return float(simulation_setting("truncation_tolerance", tolerance))


def _finish(amps: np.ndarray, name: str, tolerance: Optional[float]) -> FockVector:
    """根据解析振幅计算截断尾部质量，超出容差时报错"""
    tail = max(0.0, 1.0 - float(np.sum(np.abs(amps) ** 2)))
    tol = _tolerance(tolerance)
    if tail >= tol:
        raise TruncationError(f"{name}: 截断尾部质量 {tail:.3e} 超过容差 {tol:.1e}，请增大维度", tail)
    return FockVector(amps, tail).normalize()


def vacuum(dim: int) -> FockVector:
    return fock_state(0, dim)


def fock_state(n: int, dim: int) -> FockVector:
    if not 0 <= n < dim:
        raise DomainError(f"光子数 {n} 超出维度 {dim}")
    amps = np.zeros(dim, dtype=complex)
    amps[n] = 1.0
    return FockVector(amps)


def coherent(alpha: complex, dim: int, tolerance: Optional[float] = None) -> FockVector:
    """
    相干态 |α⟩，amps[n] = e^{−|α|²/2} αⁿ/√n!

    Args:
        alpha: 复振幅
        dim: 截断维度
        tolerance: 截断容差，默认取配置

    Returns:
        归一化相干态
    """
    alpha = complex(alpha)
    n = np.arange(dim)
    amps = np.zeros(dim, dtype=complex)
    if alpha == 0:
        amps[0] = 1.0
    else:
        log_mag = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
        amps = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    return _finish(amps, "coherent", tolerance)


def cat(alpha: complex, c_plus: complex, c_minus: complex, dim: int,
        tolerance: Optional[float] = None) -> FockVector:
    """归一化的 c₊|α⟩ + c₋|−α⟩"""
    if abs(c_plus) ** 2 + abs(c_minus) ** 2 == 0:
        raise DegenerateStateError("c₊ 与 c₋ 不能同时为零")
    plus = coherent(alpha, dim, tolerance)
    minus = coherent(-complex(alpha), dim, tolerance)
    amps = complex(c_plus) * plus.amps + complex(c_minus) * minus.amps
    norm = float(np.linalg.norm(amps))
    if norm < 1e-8:
        raise DegenerateStateError(f"叠加态范数 {norm:.2e} 下溢 (α={alpha}, c₊={c_plus}, c₋={c_minus})")
    return FockVector(amps / norm, max(plus.tail_mass, minus.tail_mass))


def squeezed_vacuum(r: float, dim: int, tolerance: Optional[float] = None) -> FockVector:
    """
    压缩真空，amps[2n] = λⁿ √((2n)!) / (2ⁿ n! √cosh r)，λ = tanh r

    符号取 ⟨x̂²⟩ = e^{2r}，与协方差 diag(e^{2r}, e^{−2r}) 一致。
    """
    lam = np.tanh(r)
    amps = np.zeros(dim, dtype=complex)
    if lam == 0:
        amps[0] = 1.0
    else:
        k = np.arange((dim + 1) // 2)
        log_mag = (-0.5 * np.log(np.cosh(r)) + k * np.log(abs(lam))
                   + 0.5 * gammaln(2 * k + 1) - k * np.log(2.0) - gammaln(k + 1))
        amps[0::2] = np.exp(log_mag) * np.sign(lam) ** k
    return _finish(amps, "squeezed_vacuum", tolerance)


def squeezed_single_photon(r: float, dim: int, tolerance: Optional[float] = None) -> FockVector:
    """S(r)|1⟩，amps[2n+1] = λⁿ √((2n+1)!) / (2ⁿ n! cosh^{3/2} r)"""
    lam = np.tanh(r)
    amps = np.zeros(dim, dtype=complex)
    if lam == 0:
        amps[1] = 1.0
    else:
        k = np.arange(dim // 2)
        log_mag = (-1.5 * np.log(np.cosh(r)) + k * np.log(abs(lam))
                   + 0.5 * gammaln(2 * k + 2) - k * np.log(2.0) - gammaln(k + 1))
        amps[1::2] = np.exp(log_mag) * np.sign(lam) ** k
    return _finish(amps, "squeezed_single_photon", tolerance)


def displacement_matrix(beta: complex, rows: int, cols: int) -> np.ndarray:
    """
    位移算符矩阵元 ⟨m|D(β)|n⟩ (m < rows, n < cols)，广义拉盖尔多项式精确公式
    """
    beta = complex(beta)
    if beta == 0:
        return np.eye(rows, cols, dtype=complex)
    m = np.arange(rows)[:, None]
    n = np.arange(cols)[None, :]
    x = abs(beta) ** 2
    lo = np.minimum(m, n)
    diff = np.abs(m - n)
    lag = eval_genlaguerre(lo, diff, x)
    log_pref = 0.5 * (gammaln(lo + 1) - gammaln(lo + diff + 1)) - 0.5 * x
    base = np.where(m >= n, beta, -np.conj(beta))
    mag = np.exp(log_pref + diff * np.log(abs(beta)))
    phase = np.exp(1j * diff * np.angle(base))
    return mag * phase * lag


def displace(state: FockVector, beta: complex, dim: Optional[int] = None,
             tolerance: Optional[float] = None) -> FockVector:
    """D(β)|ψ⟩，输出维度默认与输入相同，落在截断外的质量记入 tail_mass"""
    out_dim = dim or state.dim
    amps = displacement_matrix(beta, out_dim, state.dim) @ state.amps
    return _record_loss(state.norm() ** 2, amps, state.tail_mass, "displace", tolerance)


def squeeze(state: FockVector, r: float, dim: Optional[int] = None,
            tolerance: Optional[float] = None) -> FockVector:
    """S(r)|ψ⟩，S(r) = exp[r/2 (â†² − â²)]，在加宽的空间中求指数后截取"""
    out_dim = dim or state.dim
    big = max(out_dim, state.dim) + DISPLACEMENT_GUARD
    a = annihilation(big)
    generator = 0.5 * r * (a.conj().T @ a.conj().T - a @ a)
    s = expm(generator)[:out_dim, : state.dim]
    amps = s @ state.amps
    return _record_loss(state.norm() ** 2, amps, state.tail_mass, "squeeze", tolerance)


def _record_loss(norm_in: float, amps: np.ndarray, tail: float, name: str,
                 tolerance: Optional[float]) -> FockVector:
    lost = max(0.0, norm_in - float(np.sum(np.abs(amps) ** 2)))
    if lost > _tolerance(tolerance):
        logger.warning(f"{name}: 截断边界处丢失概率质量 {lost:.3e}", extra={"tail_mass": lost})
    return FockVector(amps, tail + lost)


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)


def quadrature_operators(dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """x̂ = â + â†，p̂ = −i(â − â†)"""
    a = annihilation(dim)
    return a + a.conj().T, -1j * (a - a.conj().T)


def quadrature_moments(state: FockVector) -> Dict[str, float]:
    """正交分量的一阶、二阶矩，用于约定测试"""
    x, p = quadrature_operators(state.dim)
    v = state.normalize().amps
    ev = lambda op: float(np.real(np.vdot(v, op @ v)))
    return {"x": ev(x), "p": ev(p), "x2": ev(x @ x), "p2": ev(p @ p)}


def fock_projector(n: int, dim: int) -> FockOperator:
    return fock_state(n, dim).to_density()


def product_state(vectors: Sequence[FockVector]) -> JointState:
    """张量积 |ψ₀⟩⊗|ψ₁⟩(⊗|ψ₂⟩)"""
    if len(vectors) not in (2, 3):
        raise ShapeError("乘积态只支持两模或三模")
    amps = vectors[0].amps
    for vec in vectors[1:]:
        amps = np.multiply.outer(amps, vec.amps)
    tail = float(sum(v.tail_mass for v in vectors))
    return TwoModeState(amps, tail) if len(vectors) == 2 else JointState(amps, tail)


def product_density(left: FockOperator, right: FockOperator) -> JointDensity:
    return JointDensity(np.kron(left.entries, right.entries), (left.dim, right.dim))


@lru_cache(maxsize=32)
def _beamsplitter_matrix(T: float, dim_a: int, dim_b: int) -> np.ndarray:
    theta = float(np.arccos(np.sqrt(T)))
    unitary = np.zeros((dim_a * dim_b, dim_a * dim_b))
    for total in range(dim_a + dim_b - 1):
        n = np.arange(total + 1)
        # 总光子数为 total 的封闭子空间，基矢 |n, total−n⟩
        hop = theta * np.sqrt((n[:-1] + 1.0) * (total - n[:-1]))
        generator = np.zeros((total + 1, total + 1))
        generator[n[1:], n[:-1]] = hop
        generator[n[:-1], n[1:]] = -hop
        block = expm(generator)
        valid = n[(n < dim_a) & (total - n < dim_b)]
        idx = valid * dim_b + (total - valid)
        unitary[np.ix_(idx, idx)] = block[np.ix_(valid, valid)]
    unitary.setflags(write=False)
    return unitary


def beamsplitter_unitary(T: float, dim_a: int, dim_b: int) -> np.ndarray:
    """
    分束器 B_T = exp[θ(â†b̂ − âb̂†)]，cos θ = √T 在截断空间中的矩阵

    每个总光子数子空间整体求指数后再截取，矩阵元是精确的。
    行列索引为 n_a·dim_b + n_b。
    """
    if not 0.0 < T <= 1.0:
        raise DomainError(f"透射率 T={T} 必须位于 (0, 1]")
    return _beamsplitter_matrix(float(T), int(dim_a), int(dim_b))


def beamsplitter(state: Union[JointState, JointDensity], T: float, modes: Tuple[int, int] = (0, 1),
                 tolerance: Optional[float] = None) -> Union[JointState, JointDensity]:
    """
    对联合态的两个模式作用分束器

    Args:
        state: 联合纯态或两模联合密度矩阵
        T: 透射率
        modes: (a, b) 两个端口对应的模式编号，顺序决定生成元的符号
        tolerance: 截断警告阈值

    Returns:
        同类型的新联合态
    """
    i, j = modes
    if i == j or not (0 <= i < state.modes and 0 <= j < state.modes):
        raise ShapeError(f"非法的分束器模式 {modes}")

    if isinstance(state, JointDensity):
        d0, d1 = state.dims
        u4 = beamsplitter_unitary(T, state.dims[i], state.dims[j]).reshape(
            state.dims[i], state.dims[j], state.dims[i], state.dims[j])
        if (i, j) == (1, 0):
            u4 = u4.transpose(1, 0, 3, 2)
        u = u4.reshape(d0 * d1, d0 * d1)
        rho = u @ state.entries @ u.conj().T
        lost = state.trace() - float(np.real(np.trace(rho)))
        if lost > _tolerance(tolerance):
            logger.warning(f"分束器截断丢失概率质量 {lost:.3e}", extra={"tail_mass": lost})
        return JointDensity(rho, state.dims)

    dims = state.dims
    u = beamsplitter_unitary(T, dims[i], dims[j])
    moved = np.moveaxis(state.amps, (i, j), (0, 1))
    rest = moved.shape[2:]
    out = (u @ moved.reshape(dims[i] * dims[j], -1)).reshape((dims[i], dims[j]) + rest)
    out = np.moveaxis(out, (0, 1), (i, j))
    lost = max(0.0, state.norm() ** 2 - float(np.sum(np.abs(out) ** 2)))
    if lost > _tolerance(tolerance):
        logger.warning(f"分束器截断丢失概率质量 {lost:.3e}", extra={"tail_mass": lost})
    return type(state)(out, state.tail_mass + lost)


def povm_onoff(det: DetectorModel, dim: int) -> Tuple[FockOperator, FockOperator]:
    """
    开关型探测器 POVM

    Π_off = e^{−ν} Σ_m (1−η)^m D†(β)|m⟩⟨m|D(β)，Π_on = I − Π_off

    Returns:
        (Π_off, Π_on)
    """
    guard = dim + DISPLACEMENT_GUARD + int(np.ceil(4 * abs(det.displacement) ** 2))
    d = displacement_matrix(det.displacement, guard, dim)
    weights = det.off_weight() * (1.0 - det.eta) ** np.arange(guard)
    off = (d.conj().T * weights) @ d
    off = 0.5 * (off + off.conj().T)
    return FockOperator(off, hermitian_hint=True), FockOperator(np.eye(dim) - off, hermitian_hint=True)


def condition_on_outcome(joint: Union[JointState, JointDensity],
                         mode: Union[int, Sequence[int]],
                         povm_element: Union[FockOperator, Sequence[FockOperator]],
                         floor: Optional[float] = None) -> Tuple[FockOperator, float]:
    """
    对联合态的部分模式做条件测量

    ρ_out = Tr_measured[(I⊗Π) ρ] / p，p = Tr[(I⊗Π) ρ]

    Args:
        joint: 联合纯态 (两模或三模) 或两模联合密度矩阵
        mode: 被测量的模式编号 (或编号序列)
        povm_element: 对应的 POVM 元 (或序列)
        floor: 成功概率下限，默认取配置

    Returns:
        (剩余单模的归一化密度矩阵, 成功概率)
    """
    modes = (mode,) if isinstance(mode, (int, np.integer)) else tuple(mode)
    elements = (povm_element,) if isinstance(povm_element, FockOperator) else tuple(povm_element)
    if len(modes) != len(elements):
        raise ShapeError("测量模式与 POVM 元数量不一致")
    kept = [k for k in range(joint.modes) if k not in modes]
    if len(kept) != 1:
        raise ShapeError(f"条件测量后必须恰好剩余一个模式，当前剩余 {kept}")
    keep = kept[0]
    dims = joint.dims
    for k, element in zip(modes, elements):
        if element.dim != dims[k]:
            raise ShapeError(f"模式 {k} 维度 {dims[k]} 与 POVM 维度 {element.dim} 不符")

    if isinstance(joint, JointDensity):
        rho4 = joint.entries.reshape(dims[0], dims[1], dims[0], dims[1])
        subscripts = "ba,xayb->xy" if keep == 0 else "ba,axby->xy"
        rho = np.einsum(subscripts, elements[0].entries, rho4)
    else:
        psi = joint.amps
        chi = psi
        for k, element in zip(modes, elements):
            chi = np.moveaxis(np.tensordot(element.entries, chi, axes=([1], [k])), 0, k)
        d = dims[keep]
        chi_f = np.moveaxis(chi, keep, 0).reshape(d, -1)
        psi_f = np.moveaxis(psi, keep, 0).reshape(d, -1)
        rho = chi_f @ psi_f.conj().T

    p = float(np.real(np.trace(rho)))
    floor = float(simulation_setting("probability_floor", floor))
    if p < floor:
        raise ZeroProbabilityError(f"条件测量成功概率 {p:.3e} 低于下限 {floor:.1e}", p)
    rho = rho / p
    rho = 0.5 * (rho + rho.conj().T)
    return FockOperator(rho, hermitian_hint=True), min(p, 1.0)


def photon_subtracted(r: float, T: float, m: int, dim: int,
                      tolerance: Optional[float] = None,
                      floor: Optional[float] = None) -> Tuple[FockVector, float]:
    """
    m 光子减除的压缩真空 |Ψ_m⟩ 及其概率 P_m

    压缩真空经透射率 T 的分束器后，把反射模投影到 |m⟩。
    返回的态取正则相位 (首个非零振幅为正实数)。
    """
    if m < 0:
        raise DomainError(f"光子数 m={m} 必须非负")
    source = squeezed_vacuum(r, dim, tolerance)
    # 反射模只保留 0..m 个光子；|n, m⟩ 的振幅只来自 |n+m, 0⟩，截取不影响结果
    u = beamsplitter_unitary(T, dim, m + 1)
    amps = (u @ np.kron(source.amps, vacuum(m + 1).amps)).reshape(dim, m + 1)[:, m]
    p = float(np.sum(np.abs(amps) ** 2))
    floor = float(simulation_setting("probability_floor", floor))
    if p < floor:
        raise ZeroProbabilityError(f"反射模出现 {m} 个光子的概率 {p:.3e} 低于下限", p)
    return FockVector(amps / np.sqrt(p), source.tail_mass).with_canonical_phase(), p
