"""
高斯核与核对齐
选中/未选中特征子空间的高斯核、中心化、核对齐分数及其对 lambda 的梯度
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .config import KernelConfig
from .graph import sq_dist_matrix
from ..exceptions import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class KernelPair:
    """同一视图上选中子空间核 K_c 与未选中子空间核 K_u"""
    K_c: np.ndarray
    K_u: np.ndarray
    sigma: float


def _as_array(X) -> np.ndarray:
    return np.asarray(getattr(X, 'data', X), dtype=float)


def resolve_bandwidth(X, cfg: KernelConfig) -> float:
    """
    解析视图带宽 sigma

    median 策略: 全视图（lambda = 1）上非零成对平方距离中位数的平方根，
    初始化时计算一次后冻结。
    """
    if cfg.policy == 'fixed':
        is_valid, message = cfg.validate()
        if not is_valid:
            raise ConfigurationError(message)
        return float(cfg.sigma)

    data = _as_array(X)
    distances = pdist(data.T, metric='sqeuclidean') if data.shape[1] > 1 else np.zeros(0)
    positive = distances[distances > 0]
    if positive.size == 0:
        logger.warning("视图中所有样本相同，带宽回退为 1.0")
        return 1.0
    return float(np.sqrt(np.median(positive)))


def gaussian_kernel(Xsub, sigma: float) -> np.ndarray:
    """
    K_ij = exp(-||x_i - x_j||^2 / sigma^2)

    Raises:
        ConfigurationError: sigma 不是正数
    """
    if not sigma > 0 or not np.isfinite(sigma):
        raise ConfigurationError(f"带宽必须为正有限数: {sigma}")
    return np.exp(-sq_dist_matrix(_as_array(Xsub)) / sigma ** 2)


def kernel_pair(X, lam: np.ndarray, sigma: float) -> KernelPair:
    """由 ΛX 与 (I-Λ)X 构造核对，两者共享同一 sigma"""
    data = _as_array(X)
    lam = np.asarray(lam, dtype=float)
    return KernelPair(
        K_c=gaussian_kernel(lam[:, None] * data, sigma),
        K_u=gaussian_kernel((1.0 - lam)[:, None] * data, sigma),
        sigma=sigma,
    )


def center(K: np.ndarray) -> np.ndarray:
    """H K H，不显式构造 H"""
    K = np.asarray(K, dtype=float)
    row_mean = K.mean(axis=1, keepdims=True)
    col_mean = K.mean(axis=0, keepdims=True)
    return K - row_mean - col_mean + K.mean()


def alignment_score(pair: KernelPair) -> float:
    """Tr(H K_c H K_u)"""
    return float(np.sum(center(pair.K_c) * pair.K_u.T))


def weighted_pair_sums(X, M: np.ndarray) -> np.ndarray:
    """
    对每个特征 a 计算 sum_ij M_ij (X_ai - X_aj)^2

    展开为平方项与交叉项，避免构造 d × n × n 张量。
    """
    data = _as_array(X)
    sq = data ** 2
    cross = np.sum((data @ M) * data, axis=1)
    return sq @ M.sum(axis=1) + sq @ M.sum(axis=0) - 2.0 * cross


def alignment_grad_lambda(X, lam: np.ndarray, pair: KernelPair, sigma: float) -> np.ndarray:
    """
    -Tr(H K_c H K_u) 对 lambda 的梯度（目标函数取最小化形式）

    Args:
        X: 视图数据 d_v × n
        lam: 当前 lambda
        pair: 由 (X, lam, sigma) 计算得到的核对
        sigma: 带宽
    """
    lam = np.asarray(lam, dtype=float)
    selected = weighted_pair_sums(X, center(pair.K_u) * pair.K_c)
    unselected = weighted_pair_sums(X, center(pair.K_c) * pair.K_u)
    scale = 2.0 / sigma ** 2
    return scale * lam * selected - scale * (1.0 - lam) * unselected
