"""
图学习模块
视图图初始化、一致图 Z、视图图 S^(v)、样本级视图权重 q 的更新以及拉普拉斯矩阵

所有图按列随机（column-stochastic）存储：第 j 列是样本 j 的近邻分布，
对角线强制为0，每列至多 k 个非零元。
"""

import itertools
import logging
from collections import Counter
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from ..exceptions import ConfigurationError

logger = logging.getLogger(__name__)

# 闭式解分母的退化阈值
DEGENERATE_DENOMINATOR = 1e-12

# q 更新中判定 B_j B_j^T 奇异的条件数上限
SINGULAR_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class GraphState:
    """
    图变量

    Attributes:
        Z: n × n 一致图
        S: V 个 n × n 视图图
        q: V × n 样本级视图权重，第 j 列为 q_{·j}
        k: 近邻数
        eta: 长度 n 的 Z 列正则系数，初始化时确定后冻结（None 表示按当前状态推导）
        gamma: V × n 的 S^(v) 列正则系数，同上
    """
    Z: np.ndarray
    S: Tuple[np.ndarray, ...]
    q: np.ndarray
    k: int
    eta: Optional[np.ndarray] = None
    gamma: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def V(self) -> int:
        return len(self.S)


def sq_dist_matrix(M) -> np.ndarray:
    """列之间的平方欧氏距离，结果对称、对角为0、非负"""
    M = np.asarray(M, dtype=float)
    if M.shape[1] == 1:
        return np.zeros((1, 1))
    return cdist(M.T, M.T, metric='sqeuclidean')


def _check_k(n: int, k: int):
    if not 1 <= k <= n - 2:
        raise ConfigurationError(f"近邻数 k={k} 超出范围 [1, {n - 2}]")


def _sorted_candidates(values: np.ndarray, k: int):
    """
    每列排除自身后升序排列（稳定排序，按原索引打破平局）

    Returns:
        order: 排序后的行索引
        top: 最小的 k 个值（k × n）
        boundary: 第 k+1 小的值（长度 n）
    """
    values = np.array(values, dtype=float, copy=True)
    n = values.shape[0]
    _check_k(n, k)
    np.fill_diagonal(values, np.inf)
    order = np.argsort(values, axis=0, kind='stable')
    ranked = np.take_along_axis(values, order, axis=0)
    return order, ranked[:k], ranked[k]


def simplex_neighbors(values: np.ndarray, k: int,
                      flags: Optional[Counter] = None,
                      label: str = "graph") -> np.ndarray:
    """
    k 稀疏单纯形闭式解（逐列）

    对列 j 的候选值 a（已排除自身）升序排列后，
    x_ij = (a_{k+1} - a_i) / (k a_{k+1} - sum_{i<=k} a_i)，其余为0。
    分母退化时在选中的 k 个元素上均匀分配 1/k。

    Args:
        values: n × n 候选值矩阵，第 j 列对应样本 j
        k: 近邻数
        flags: 可选计数器，记录回退次数
        label: 日志中的图名称
    """
    n = values.shape[0]
    order, top, boundary = _sorted_candidates(values, k)
    denominator = k * boundary - top.sum(axis=0)
    degenerate = ~(denominator >= DEGENERATE_DENOMINATOR)

    safe = np.where(degenerate, 1.0, denominator)
    weights = (boundary[None, :] - top) / safe[None, :]
    weights[:, degenerate] = 1.0 / k

    count = int(degenerate.sum())
    if count:
        logger.warning(f"{label}: {count} 列的闭式解分母退化，使用均匀权重 1/{k}")
        if flags is not None:
            flags[f"{label}_uniform_fallback"] += count

    result = np.zeros((n, n))
    np.put_along_axis(result, order[:k], weights, axis=0)
    return result


def column_regularizers(values: np.ndarray, k: int) -> np.ndarray:
    """
    每列的 (k a_{k+1} - sum_{i<=k} a_i) / 2

    即 simplex_neighbors 隐含的二次项系数（恰好 k 个近邻）；
    eta_j 与 gamma_j^(v) 由此减去各自的常数项得到。
    """
    _, top, boundary = _sorted_candidates(values, k)
    return (k * boundary - top.sum(axis=0)) / 2.0


def sparse_simplex_solve(values: np.ndarray, coef, k: int,
                         flags: Optional[Counter] = None,
                         label: str = "graph") -> np.ndarray:
    """
    逐列求解 min_x coef_j ||x||^2 + a^T x，x 在至多 k 个非零元的单纯形上且 x_j = 0

    二次项系数固定时，取 a 最小的 k 个位置作为支撑集，
    再把 -a / (2 coef_j) 投影到该支撑集的单纯形上，得到精确最优解。
    coef_j = column_regularizers(values, k) 时与 simplex_neighbors 一致。
    coef_j <= 0 时目标为凹（或线性），最优解是 a 最小处的顶点。

    Args:
        values: n × n 候选值矩阵
        coef: 每列的二次项系数（标量或长度 n）
        k: 近邻数
        flags: 可选计数器
        label: 日志中的图名称
    """
    n = values.shape[0]
    order, top, _ = _sorted_candidates(values, k)
    coef = np.broadcast_to(np.asarray(coef, dtype=float), (n,))
    vertex = ~(coef > DEGENERATE_DENOMINATOR)

    # top 升序，y 按列降序
    y = -top / (2.0 * np.where(vertex, 1.0, coef))[None, :]
    ranks = np.arange(1, k + 1)[:, None]
    thresholds = (np.cumsum(y, axis=0) - 1.0) / ranks
    support = np.sum(y - thresholds > 0, axis=0)
    tau = thresholds[support - 1, np.arange(n)]
    weights = np.maximum(y - tau[None, :], 0.0)

    count = int(vertex.sum())
    if count:
        weights[:, vertex] = 0.0
        weights[0, vertex] = 1.0
        logger.debug(f"{label}: {count} 列的二次项系数非正，取顶点解")
        if flags is not None:
            flags[f"{label}_vertex"] += count

    result = np.zeros((n, n))
    np.put_along_axis(result, order[:k], weights, axis=0)
    return result


def init_view_graph(O: np.ndarray, k: int, flags: Optional[Counter] = None) -> np.ndarray:
    """按平方距离构造 k 近邻概率图"""
    return simplex_neighbors(O, k, flags=flags, label="init_S")


def fused_graph(S: Sequence[np.ndarray], q: np.ndarray) -> np.ndarray:
    """sum_v q_vj S^(v)_{·j}，即每列的 S̃_j^T q_{·j}"""
    fused = np.zeros_like(S[0])
    for v, graph in enumerate(S):
        fused += q[v][None, :] * graph
    return fused


def z_candidates(F: np.ndarray, S: Sequence[np.ndarray], q: np.ndarray,
                 alpha: float) -> np.ndarray:
    """A_{·j} = alpha D_{·j} - 2 S̃_j^T q_{·j}，D = 1/2 ||F_i - F_j||^2"""
    D = 0.5 * sq_dist_matrix(F)
    return alpha * D - 2.0 * fused_graph(S, q)


def update_Z(F: np.ndarray, S: Sequence[np.ndarray], q: np.ndarray,
             alpha: float, k: int, flags: Optional[Counter] = None,
             eta: Optional[np.ndarray] = None) -> np.ndarray:
    """
    一致图 Z 的更新

    Args:
        F: c × n 聚类指示矩阵
        S: 各视图图
        q: V × n 样本级视图权重
        alpha: 标签平滑权重
        k: 近邻数
        eta: 冻结的列正则系数；为 None 时使用恰好 k 近邻的闭式解
    """
    A = z_candidates(F, S, q, alpha)
    if eta is None:
        return simplex_neighbors(A, k, flags=flags, label="Z")
    return sparse_simplex_solve(A, 1.0 + eta, k, flags=flags, label="Z")


def other_views(S: Sequence[np.ndarray], q: np.ndarray, v: int) -> np.ndarray:
    """sum_{w != v} q_wj S^(w)_{·j}"""
    return fused_graph(S, q) - q[v][None, :] * S[v]


def s_candidates(O: np.ndarray, Z: np.ndarray, q_v: np.ndarray, beta: float,
                 others: Optional[np.ndarray] = None) -> np.ndarray:
    """
    N^(v)_{·j} = beta/2 O^(v)_{·j} - 2 q_vj (Z_{·j} - sum_{w != v} q_wj S^(w)_{·j})

    others 为 None 时省略其他视图的融合项。
    """
    target = Z if others is None else Z - others
    return 0.5 * beta * O - 2.0 * q_v[None, :] * target


def update_S(O: np.ndarray, Z: np.ndarray, q_v: np.ndarray, beta: float,
             k: int, flags: Optional[Counter] = None,
             gamma: Optional[np.ndarray] = None,
             others: Optional[np.ndarray] = None) -> np.ndarray:
    """
    单个视图图 S^(v) 的更新，q_v 为 q 的第 v 行

    gamma 给定时二次项系数为 q_vj^2 + gamma_j，按固定系数精确求解。
    """
    N = s_candidates(O, Z, q_v, beta, others)
    if gamma is None:
        return simplex_neighbors(N, k, flags=flags, label="S")
    return sparse_simplex_solve(N, q_v ** 2 + gamma, k, flags=flags, label="S")


def graph_regularizers(F: np.ndarray, O: Sequence[np.ndarray], graph: GraphState,
                       alpha: float, beta: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    在给定状态下按闭式公式计算 eta 与 gamma^(v)

    Args:
        F: c × n 聚类指示矩阵
        O: 每个视图在当前 lambda 下的平方距离矩阵

    Returns:
        (长度 n 的 eta, V × n 的 gamma)
    """
    k = graph.k
    eta = column_regularizers(z_candidates(F, graph.S, graph.q, alpha), k) - 1.0
    gamma = np.stack([
        column_regularizers(
            s_candidates(O[v], graph.Z, graph.q[v], beta, other_views(graph.S, graph.q, v)), k)
        - graph.q[v] ** 2
        for v in range(graph.V)
    ])
    return eta, gamma


def update_q(Z: np.ndarray, S: Sequence[np.ndarray],
             flags: Optional[Counter] = None) -> np.ndarray:
    """
    样本级视图权重

    q_{·j} = (B_j B_j^T)^{-1} 1 / (1^T (B_j B_j^T)^{-1} 1)，B_j = 1_V Z_{·j}^T - S̃_j。
    奇异时加岭 eps I；出现负权重的样本改为在单纯形上精确求解。

    Returns:
        V × n 矩阵
    """
    V = len(S)
    n = Z.shape[0]
    if V == 1:
        return np.ones((1, n))

    residual = Z[None, :, :] - np.stack(S)
    gram = np.einsum('vij,wij->jvw', residual, residual)
    return weights_from_gram(gram, flags=flags).T.copy()


def weights_from_gram(gram: np.ndarray, flags: Optional[Counter] = None) -> np.ndarray:
    """
    由一组 V × V Gram 矩阵 B_j B_j^T 求单纯形权重

    Args:
        gram: 形状 (n, V, V)

    Returns:
        形状 (n, V)，每行位于单纯形上
    """
    n, V, _ = gram.shape
    with np.errstate(divide='ignore', invalid='ignore'):
        condition = np.linalg.cond(gram)
    singular = ~(condition < SINGULAR_CONDITION)
    if singular.any():
        if flags is not None:
            flags["q_ridge"] += int(singular.sum())
        logger.debug(f"q: {int(singular.sum())} 个样本的 B_j B_j^T 奇异，已加岭")

    ridged = gram + (singular * _ridge(gram))[:, None, None] * np.eye(V)[None, :, :]
    with np.errstate(divide='ignore', invalid='ignore'):
        solution = np.linalg.solve(ridged, np.ones((n, V, 1)))[:, :, 0]
        q = solution / solution.sum(axis=1, keepdims=True)

    constrained = np.any(q < 0, axis=1) | ~np.all(np.isfinite(q), axis=1)
    count = int(constrained.sum())
    if count:
        q[constrained] = simplex_least_squares(gram[constrained])
        if flags is not None:
            flags["q_constrained"] += count
        logger.debug(f"q: {count} 个样本的无约束解含负权重，改用单纯形精确解")

    return q


def _ridge(gram: np.ndarray) -> np.ndarray:
    V = gram.shape[-1]
    return 1e-10 * np.trace(gram, axis1=-2, axis2=-1) / V + 1e-12


def simplex_least_squares(gram: np.ndarray) -> np.ndarray:
    """
    min_w w^T G w，w 在单纯形上（逐样本）

    枚举所有支撑集，在每个支撑集上求等式约束解，保留可行且目标最小者。
    支撑集共 2^V - 1 个。

    Args:
        gram: 形状 (m, V, V) 的半正定矩阵

    Returns:
        形状 (m, V)
    """
    m, V, _ = gram.shape
    best = np.zeros((m, V))
    best_value = np.full(m, np.inf)
    for size in range(1, V + 1):
        for support in itertools.combinations(range(V), size):
            index = list(support)
            sub = gram[:, index][:, :, index]
            sub = sub + _ridge(sub)[:, None, None] * np.eye(size)[None, :, :]
            solution = np.linalg.solve(sub, np.ones((m, size, 1)))[:, :, 0]
            with np.errstate(divide='ignore', invalid='ignore'):
                weights = solution / solution.sum(axis=1, keepdims=True)
            feasible = np.all(np.isfinite(weights), axis=1) & np.all(weights >= 0, axis=1)

            candidate = np.zeros((m, V))
            candidate[:, index] = np.where(feasible[:, None], weights, 0.0)
            value = np.einsum('mi,mij,mj->m', candidate, gram, candidate)
            better = feasible & (value < best_value)
            best[better] = candidate[better]
            best_value[better] = value[better]
    return best


def laplacian(weights: np.ndarray) -> np.ndarray:
    """对称化后的图拉普拉斯 diag(Ŵ1) - Ŵ"""
    symmetric = 0.5 * (weights + weights.T)
    return np.diag(symmetric.sum(axis=1)) - symmetric


def fusion_residual(Z: np.ndarray, S: Sequence[np.ndarray], q: np.ndarray) -> float:
    """sum_j ||Z_{·j} - q_{·j}^T S̃_j||^2"""
    return float(np.sum((Z - fused_graph(S, q)) ** 2))


def _check_stochastic(name: str, M: np.ndarray, k: Optional[int], tol: float) -> Tuple[bool, str]:
    if np.any(M < -tol):
        return False, f"{name} 存在负元素"
    if np.max(np.abs(M.sum(axis=0) - 1.0)) > tol:
        return False, f"{name} 列和不为1"
    if k is not None:
        if np.any(np.diag(M) != 0):
            return False, f"{name} 对角线非零"
        if np.any(np.count_nonzero(M, axis=0) > k):
            return False, f"{name} 存在超过 {k} 个非零元的列"
    return True, "验证通过"


def check_graph_state(graph: GraphState, tol: float = 1e-10,
                      sparse: bool = True) -> Tuple[bool, str]:
    """
    检查图变量约束

    Args:
        graph: 图变量
        tol: 单纯形容差
        sparse: 是否检查 k 稀疏与零对角（初始 Z = 1/n 不满足）
    """
    k = graph.k if sparse else None
    checks: List[Tuple[str, np.ndarray, Optional[int]]] = [("Z", graph.Z, k)]
    checks += [(f"S[{v}]", S_v, graph.k) for v, S_v in enumerate(graph.S)]
    checks.append(("q", graph.q, None))
    for name, matrix, limit in checks:
        is_valid, message = _check_stochastic(name, matrix, limit, tol)
        if not is_valid:
            return False, message
    return True, "验证通过"
