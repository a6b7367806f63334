"""
聚类评估
对选中特征做 k-means，并用 ACC（匈牙利匹配）与 NMI 评分
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning
from sklearn.metrics import normalized_mutual_info_score
from sklearn.metrics.cluster import contingency_matrix

from .dataset import MultiViewDataset
from .solver import FeatureRanking, RankedFeature
from ..exceptions import ConfigurationError, InputError
from ..utils.logger import log_execution_time

logger = logging.getLogger(__name__)

DEFAULT_RUNS = 50
DEFAULT_RATIO = 0.3
KMEANS_MAX_ITER = 300


@dataclass(frozen=True, eq=False)
class ClusteringResult:
    """
    k-means 结果

    Attributes:
        assignment: 长度 n，取值 1..m
        centroids: m × p
        inertia: 样本到所属中心的平方距离和
        iterations: 实际迭代次数
    """
    assignment: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int


@dataclass(frozen=True)
class EvaluationReport:
    """多次 k-means 的 ACC / NMI 统计（百分数）"""
    acc_mean: float
    acc_std: float
    nmi_mean: float
    nmi_std: float
    runs: int
    feature_ratio: float
    selected: Tuple[Tuple[int, int], ...] = ()


def kmeans(X: np.ndarray, m: int, seed: int = 0) -> ClusteringResult:
    """
    对 p × n 矩阵的列做 k-means（k-means++ 初始化，最多300次 Lloyd 迭代）

    Raises:
        ConfigurationError: m 不在 [1, n] 内
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    if not 1 <= m <= n:
        raise ConfigurationError(f"聚类数 m={m} 超出范围 [1, {n}]")

    model = KMeans(
        n_clusters=m,
        init='k-means++',
        n_init=1,
        max_iter=KMEANS_MAX_ITER,
        tol=0.0,
        random_state=seed,
        algorithm='lloyd',
    )
    with warnings.catch_warnings():
        # 重复样本少于 m 个时 sklearn 会发出警告，结果仍然有效
        warnings.simplefilter('ignore', ConvergenceWarning)
        labels = model.fit_predict(X.T)

    return ClusteringResult(
        assignment=labels.astype(np.int64) + 1,
        centroids=model.cluster_centers_,
        inertia=float(model.inertia_),
        iterations=int(model.n_iter_),
    )


def _check_pair(y, y_hat) -> Tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y).ravel()
    y_hat = np.asarray(y_hat).ravel()
    if y.shape != y_hat.shape:
        raise InputError(f"标签长度不一致: {y.size} != {y_hat.size}")
    if y.size == 0:
        raise InputError("标签不能为空")
    return y, y_hat


def accuracy(y, y_hat) -> float:
    """最优一一映射下的聚类准确率（在补齐的方阵上做匈牙利匹配）"""
    y, y_hat = _check_pair(y, y_hat)
    table = contingency_matrix(y, y_hat)
    size = max(table.shape)
    padded = np.zeros((size, size), dtype=table.dtype)
    padded[:table.shape[0], :table.shape[1]] = table
    rows, cols = linear_sum_assignment(padded, maximize=True)
    return float(padded[rows, cols].sum()) / y.size


def nmi(y, y_hat) -> float:
    """几何平均熵归一化的互信息；单块划分与另一划分不同时记为0"""
    y, y_hat = _check_pair(y, y_hat)
    value = normalized_mutual_info_score(y, y_hat, average_method='geometric')
    return float(min(max(value, 0.0), 1.0))


def feature_count(ds: MultiViewDataset, ratio: float) -> int:
    """l = round(ratio * sum d_v)，至少为1"""
    if not 0 < ratio <= 1:
        raise InputError(f"特征比例必须在 (0, 1] 内: {ratio}")
    return max(1, int(np.floor(ratio * ds.total_features + 0.5)))


def select_features(ds: MultiViewDataset, ranking: FeatureRanking,
                    ratio: float) -> Tuple[List[Tuple[int, int]], np.ndarray]:
    """
    取排序前 l 个特征

    Returns:
        (选中的 (视图, 特征) 列表, 堆叠后的 l × n 矩阵)
    """
    l = feature_count(ds, ratio)
    if len(ranking) < l:
        raise InputError(f"排序只有 {len(ranking)} 个特征，需要 {l} 个")
    pairs = ranking.pairs(l)
    for v, f in pairs:
        if not (0 <= v < ds.V and 0 <= f < ds.dims[v]):
            raise InputError(f"排序中的特征 ({v}, {f}) 不在数据集中")
    return pairs, ds.select_rows(pairs)


@log_execution_time
def evaluate_selection(ds: MultiViewDataset, ranking: FeatureRanking,
                       ratio: float = DEFAULT_RATIO, runs: int = DEFAULT_RUNS,
                       seed: int = 0) -> EvaluationReport:
    """
    在选中特征上重复 k-means 并统计 ACC / NMI

    Args:
        ds: 带标签的数据集
        ranking: 特征排序
        ratio: 选择比例 (0, 1]
        runs: k-means 次数，种子依次为 seed..seed+runs-1
        seed: 起始种子

    Returns:
        EvaluationReport: 百分数形式的均值与总体标准差

    Raises:
        InputError: 数据集无标签、比例或次数无效
    """
    if ds.labels is None:
        raise InputError(f"数据集 {ds.name} 没有标签，无法评估")
    if runs < 1:
        raise InputError(f"运行次数必须为正: {runs}")

    pairs, selected = select_features(ds, ranking, ratio)
    m = int(ds.class_count)

    acc_scores = np.empty(runs)
    nmi_scores = np.empty(runs)
    for i in range(runs):
        result = kmeans(selected, m, seed=seed + i)
        acc_scores[i] = accuracy(ds.labels, result.assignment)
        nmi_scores[i] = nmi(ds.labels, result.assignment)

    report = EvaluationReport(
        acc_mean=100.0 * float(acc_scores.mean()),
        acc_std=100.0 * float(acc_scores.std()),
        nmi_mean=100.0 * float(nmi_scores.mean()),
        nmi_std=100.0 * float(nmi_scores.std()),
        runs=runs,
        feature_ratio=ratio,
        selected=tuple(pairs),
    )
    logger.info(
        f"评估 {ds.name}: ratio={ratio}, l={len(pairs)}, runs={runs}, "
        f"ACC={report.acc_mean:.2f}±{report.acc_std:.2f}, "
        f"NMI={report.nmi_mean:.2f}±{report.nmi_std:.2f}"
    )
    return report


def report_to_row(report: EvaluationReport, extra: Optional[Dict] = None) -> Dict:
    """报告转为CSV行，百分数保留两位小数"""
    row = dict(extra or {})
    row.update({
        'ratio': report.feature_ratio,
        'features': len(report.selected),
        'runs': report.runs,
        'acc_mean': round(report.acc_mean, 2),
        'acc_std': round(report.acc_std, 2),
        'nmi_mean': round(report.nmi_mean, 2),
        'nmi_std': round(report.nmi_std, 2),
    })
    return row


def all_features_ranking(ds: MultiViewDataset) -> FeatureRanking:
    """按 (视图, 特征) 顺序列出全部特征，分数均为1"""
    return FeatureRanking(tuple(
        RankedFeature(v, f, 1.0) for v in range(ds.V) for f in range(ds.dims[v])
    ))


@dataclass(frozen=True)
class SelectionComposition:
    """
    前 l 个特征按合成真值角色的构成（比例）

    Attributes:
        informative / duplicate / nonlinear / noise: 各角色所占比例
        distinct_sources: 不同来源信息特征数 / l，冗余副本与其来源算同一来源
    """
    informative: float
    duplicate: float
    nonlinear: float
    noise: float
    distinct_sources: float
    features: int


def selection_composition(ds: MultiViewDataset, ranking: FeatureRanking,
                          l: int) -> SelectionComposition:
    """
    统计排序前 l 个特征的角色构成

    精确复制与其来源的数据行完全相同，任何只看数据的方法都无法区分二者；
    distinct_sources 衡量的是冗余是否被去除。

    Raises:
        InputError: 数据集没有合成真值或 l 无效
    """
    truth = ds.truth
    if truth is None:
        raise InputError(f"数据集 {ds.name} 没有合成真值")
    if not 1 <= l <= len(ranking):
        raise InputError(f"选择特征数 l={l} 超出范围 [1, {len(ranking)}]")

    picked = [ds.global_index(v, f) for v, f in ranking.pairs(l)]
    roles = [truth.roles[i] for i in picked]
    sources = set()
    for i, role in zip(picked, roles):
        if role == 'informative':
            sources.add(i)
        elif role == 'duplicate':
            sources.add(truth.duplicate_sources[i])
        elif role == 'nonlinear':
            sources.add(truth.nonlinear_sources[i])

    def share(role: str) -> float:
        return roles.count(role) / l

    return SelectionComposition(
        informative=share('informative'),
        duplicate=share('duplicate'),
        nonlinear=share('nonlinear'),
        noise=share('noise'),
        distinct_sources=len(sources) / l,
        features=l,
    )
