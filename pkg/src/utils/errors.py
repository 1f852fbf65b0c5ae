"""异常定义模块，集中定义仿真过程中可能抛出的领域异常"""

from typing import Optional


class CatGenError(Exception):
    """所有领域异常的基类"""


class NumericFailure(CatGenError):
    """数值失败标记基类 (命令行退出码 3)"""


class TruncationError(CatGenError):
    """截断Fock空间外的概率质量超过容差"""

    def __init__(self, message: str, tail_mass: float = float("nan")):
        super().__init__(message)
        self.tail_mass = tail_mass


class DegenerateStateError(CatGenError):
    """叠加态的范数下溢，无法归一化"""


class ZeroProbabilityError(NumericFailure):
    """条件测量的成功概率低于设定下限"""

    def __init__(self, message: str, probability: float = 0.0):
        super().__init__(message)
        self.probability = probability


class IllConditionedIntegralError(NumericFailure):
    """高斯积分的二次型不正定或条件数过大"""


class ShapeError(CatGenError):
    """模式数或维度不匹配"""


class DomainError(CatGenError):
    """参数超出定义域"""


class SingularTargetError(CatGenError):
    """目标系数满足 c₊ + c₋ ≈ 0，最优位移发散"""


class InfeasibleCascadeError(CatGenError):
    """目标振幅不是基础振幅的 √2 整数次幂倍"""


class GridTooCoarseError(CatGenError):
    """Wigner 网格过粗，归一化估计偏差过大"""

    def __init__(self, message: str, norm_estimate: float = float("nan")):
        super().__init__(message)
        self.norm_estimate = norm_estimate


class ConfigError(CatGenError):
    """实验配置错误，携带出错的键名或行号"""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.message = message
        details = []
        if key is not None:
            details.append(f"键 '{key}'")
        if line is not None:
            details.append(f"第 {line} 行")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)
        self.key = key
        self.line = line


class OutputError(CatGenError):
    """结果文件写入失败"""
