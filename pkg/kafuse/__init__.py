"""
KAFUSE
======================

基于核对齐与样本级图融合的多视图无监督特征选择工具包。

版本: 1.0.0
许可证: MIT
"""

__version__ = "1.0.0"
__license__ = "MIT"

# 核心模块
from .core.config import (
    GPIConfig, KernelConfig, OuterConfig, ProxConfig, SolverConfig, SyntheticSpec
)
from .core.dataset import (
    MultiViewDataset, SyntheticTruth, ViewMatrix, dataset_checksum, load_dataset,
    normalize, synth_generate, write_dataset, write_ground_truth,
)
from .core.solver import (
    ConvergenceTrace, FeatureRanking, KafuseSolver, ModelState, fit, rank_features
)
from .core.evaluation import (
    ClusteringResult, EvaluationReport, accuracy, evaluate_selection, kmeans, nmi
)

# 工具模块
from .utils.file_handler import OutputHandler, RunManifest
from .utils.logger import setup_logger

# 异常类
from .exceptions import (
    ConfigurationError, DataError, InputError, KafuseError, NumericalError,
    ResourceNotFoundError, SchemaError, SweepError,
)

# 导出所有公共类
__all__ = [
    # 配置
    'SolverConfig',
    'KernelConfig',
    'GPIConfig',
    'ProxConfig',
    'OuterConfig',
    'SyntheticSpec',

    # 数据集
    'MultiViewDataset',
    'ViewMatrix',
    'SyntheticTruth',
    'load_dataset',
    'write_dataset',
    'write_ground_truth',
    'dataset_checksum',
    'normalize',
    'synth_generate',

    # 求解器
    'KafuseSolver',
    'ModelState',
    'ConvergenceTrace',
    'FeatureRanking',
    'fit',
    'rank_features',

    # 评估
    'ClusteringResult',
    'EvaluationReport',
    'kmeans',
    'accuracy',
    'nmi',
    'evaluate_selection',

    # 工具类
    'OutputHandler',
    'RunManifest',
    'setup_logger',

    # 异常类
    'KafuseError',
    'ResourceNotFoundError',
    'SchemaError',
    'DataError',
    'ConfigurationError',
    'InputError',
    'NumericalError',
    'SweepError',

    # 元数据
    '__version__',
    '__license__',
]


# 包初始化
def init_sdk(log_level="INFO", log_file=None):
    """
    初始化日志

    Args:
        log_level: 日志级别（DEBUG/INFO/WARNING/ERROR）
        log_file: 日志文件路径（可选）

    Returns:
        logger: 配置好的 kafuse 日志记录器
    """
    return setup_logger(level=log_level, log_file=log_file)


def get_version():
    """获取版本"""
    return __version__
