"""
配置模块
求解器、核函数、GPI、近端梯度以及合成数据的参数定义
"""

import math
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional, Tuple

# 求解器默认参数
DEFAULT_ALPHA = 1.0
DEFAULT_BETA = 1.0
DEFAULT_R = 3.0
DEFAULT_ZETA = 0.01
DEFAULT_K = 5
DEFAULT_SEED = 0

# 外层迭代
DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITER = 100

# GPI内层迭代
DEFAULT_GPI_MARGIN = 1.01
DEFAULT_GPI_TOL = 1e-6
DEFAULT_GPI_MAX_ITER = 100
DEFAULT_POWER_ITERS = 50

# 近端梯度
DEFAULT_STEP = 1e-2
DEFAULT_MAX_HALVINGS = 30

SUPPORTED_MODES = ['full', 'graph_only', 'kernel_only']
SUPPORTED_BANDWIDTH_POLICIES = ['median', 'fixed']
SUPPORTED_STEP_POLICIES = ['backtracking', 'fixed']
SUPPORTED_NORMALIZATIONS = ['minmax', 'zscore', 'none']


@dataclass(frozen=True)
class KernelConfig:
    """高斯核带宽策略：median 为中位数启发式，fixed 使用给定 sigma"""
    policy: str = 'median'
    sigma: Optional[float] = None

    def validate(self) -> Tuple[bool, str]:
        if self.policy not in SUPPORTED_BANDWIDTH_POLICIES:
            return False, (
                f"不支持的带宽策略: {self.policy}, "
                f"支持策略: {', '.join(SUPPORTED_BANDWIDTH_POLICIES)}"
            )
        if self.policy == 'fixed':
            if self.sigma is None or not math.isfinite(self.sigma) or self.sigma <= 0:
                return False, f"固定带宽必须为正有限数: {self.sigma}"
        return True, "验证通过"


@dataclass(frozen=True)
class GPIConfig:
    """广义幂迭代内层参数"""
    margin: float = DEFAULT_GPI_MARGIN
    tol: float = DEFAULT_GPI_TOL
    max_iter: int = DEFAULT_GPI_MAX_ITER
    power_iters: int = DEFAULT_POWER_ITERS

    def validate(self) -> Tuple[bool, str]:
        if self.margin < 1.0:
            return False, f"GPI松弛系数必须不小于1: {self.margin}"
        if self.tol <= 0 or self.max_iter < 1 or self.power_iters < 1:
            return False, "GPI容差与迭代次数必须为正"
        return True, "验证通过"


@dataclass(frozen=True)
class ProxConfig:
    """近端梯度步长策略"""
    policy: str = 'backtracking'
    step: float = DEFAULT_STEP
    max_halvings: int = DEFAULT_MAX_HALVINGS

    def validate(self) -> Tuple[bool, str]:
        if self.policy not in SUPPORTED_STEP_POLICIES:
            return False, (
                f"不支持的步长策略: {self.policy}, "
                f"支持策略: {', '.join(SUPPORTED_STEP_POLICIES)}"
            )
        if not self.step > 0:
            return False, f"步长必须为正: {self.step}"
        if self.max_halvings < 0:
            return False, f"回溯次数不能为负: {self.max_halvings}"
        return True, "验证通过"


@dataclass(frozen=True)
class OuterConfig:
    """外层交替迭代的停止条件"""
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def validate(self) -> Tuple[bool, str]:
        if not self.tol > 0:
            return False, f"收敛容差必须为正: {self.tol}"
        if self.max_iter < 1:
            return False, f"最大迭代次数必须为正: {self.max_iter}"
        return True, "验证通过"


@dataclass(frozen=True)
class SolverConfig:
    """
    求解器配置

    Attributes:
        alpha: 标签平滑项权重
        beta: 视图图平滑项权重
        r: 核对齐视图权重指数，必须大于1
        zeta: lambda 的 l1 稀疏权重
        k: 近邻数
        c: 聚类数（None 时取数据集类别数）
        mode: full / graph_only / kernel_only
    """
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    r: float = DEFAULT_R
    zeta: float = DEFAULT_ZETA
    k: int = DEFAULT_K
    c: Optional[int] = None
    kernel: KernelConfig = field(default_factory=KernelConfig)
    gpi: GPIConfig = field(default_factory=GPIConfig)
    prox: ProxConfig = field(default_factory=ProxConfig)
    outer: OuterConfig = field(default_factory=OuterConfig)
    seed: int = DEFAULT_SEED
    mode: str = 'full'

    @property
    def uses_graph(self) -> bool:
        return self.mode != 'kernel_only'

    @property
    def uses_kernel(self) -> bool:
        return self.mode != 'graph_only'

    def validate(self) -> Tuple[bool, str]:
        """
        验证与数据无关的参数

        Returns:
            Tuple[是否有效, 消息]
        """
        if self.mode not in SUPPORTED_MODES:
            return False, f"不支持的模式: {self.mode}, 支持模式: {', '.join(SUPPORTED_MODES)}"
        for name in ('alpha', 'beta', 'zeta'):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                return False, f"参数 {name} 必须为非负有限数: {value}"
        if not math.isfinite(self.r) or self.r <= 1:
            return False, f"参数 r 必须大于1: {self.r}"
        if self.k < 1:
            return False, f"近邻数 k 必须为正: {self.k}"
        if self.c is not None and self.c < 2:
            return False, f"聚类数 c 必须不小于2: {self.c}"
        for sub in (self.kernel, self.gpi, self.prox, self.outer):
            is_valid, message = sub.validate()
            if not is_valid:
                return False, message
        return True, "验证通过"

    def validate_for(self, n: int, dims: List[int],
                     class_count: Optional[int] = None) -> Tuple[bool, str]:
        """
        验证与数据集相关的参数范围

        Args:
            n: 样本数
            dims: 各视图特征数
            class_count: 数据集类别数（可选）
        """
        is_valid, message = self.validate()
        if not is_valid:
            return False, message
        if not 1 <= self.k <= n - 2:
            return False, f"近邻数 k={self.k} 超出范围 [1, {n - 2}]"
        c = self.resolve_c(class_count)
        if c is None:
            return False, "数据集没有标签，必须显式指定聚类数 c"
        if not 2 <= c <= n - 1:
            return False, f"聚类数 c={c} 超出范围 [2, {n - 1}]"
        if c > min(dims):
            return False, f"聚类数 c={c} 大于最小视图维度 {min(dims)}，无法构造正交投影"
        return True, "验证通过"

    def resolve_c(self, class_count: Optional[int] = None) -> Optional[int]:
        return self.c if self.c is not None else class_count

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SolverConfig':
        """从运行清单中的字典重建配置"""
        data = dict(data)
        nested = {
            'kernel': KernelConfig,
            'gpi': GPIConfig,
            'prox': ProxConfig,
            'outer': OuterConfig,
        }
        for key, sub_cls in nested.items():
            if key in data and isinstance(data[key], dict):
                data[key] = sub_cls(**data[key])
        return cls(**data)


@dataclass(frozen=True)
class SyntheticSpec:
    """
    合成多视图数据集规格

    每个视图包含 informative 个信息特征、duplicates 个线性复制、
    nonlinear 个 tanh 单调变换复制以及 noise 个与类别无关的噪声特征。
    """
    n: int = 60
    classes: int = 3
    views: int = 3
    informative: int = 4
    duplicates: int = 4
    nonlinear: int = 4
    noise: int = 4
    noise_std: float = 0.3
    separation: float = 3.0
    seed: int = DEFAULT_SEED

    @property
    def view_dim(self) -> int:
        return self.informative + self.duplicates + self.nonlinear + self.noise

    def validate(self) -> Tuple[bool, str]:
        counts = {
            'duplicates': self.duplicates,
            'nonlinear': self.nonlinear,
            'noise': self.noise,
        }
        for name, value in counts.items():
            if value < 0:
                return False, f"{name} 不能为负: {value}"
        if self.informative < 1:
            return False, "每个视图至少需要一个信息特征"
        if self.views < 1:
            return False, f"视图数必须为正: {self.views}"
        if self.classes < 1:
            return False, f"类别数必须为正: {self.classes}"
        if self.n < max(2, self.classes):
            return False, f"样本数 n={self.n} 不足以覆盖 {self.classes} 个类别"
        if self.noise_std < 0 or self.separation < 0:
            return False, "噪声标准差与类中心尺度不能为负"
        return True, "验证通过"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
