"""
交替优化求解器
按 W, F, Z, S^(v), q, theta, omega, Lambda 的顺序交替更新，
输出特征排序与收敛轨迹。

目标函数（中心化形式）:
    sum_v theta_v^2 ||W^T Λ X H - F H||^2 - omega_v^r Tr(H K_c H K_u) + zeta ||lambda||_1
    + sum_j ||Z_{·j} - q_{·j}^T S̃_j||^2 + eta ||Z||^2 + alpha Tr(F L_Z F^T)
    + beta Tr(Λ X L_S (Λ X)^T) + gamma ||S||^2

eta 与 gamma 在初始化时由闭式公式确定后冻结，W, F, Z, S, q, theta, Lambda
各块都是同一目标的精确下降步；omega 的闭式解见 update_omega。
"""

import logging
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from .config import GPIConfig, SolverConfig
from .dataset import MultiViewDataset
from .graph import (
    GraphState, check_graph_state, fusion_residual, graph_regularizers,
    init_view_graph, laplacian, other_views, sq_dist_matrix, update_q,
    update_S, update_Z,
)
from .kernels import (
    KernelPair, alignment_grad_lambda, alignment_score, kernel_pair,
    resolve_bandwidth,
)
from ..exceptions import ConfigurationError, InputError, NumericalError
from ..utils.logger import LoggerMixin, log_execution_time

logger = logging.getLogger(__name__)

# theta / omega 闭式解中视为零的阈值
EPS_G = 1e-12
EPS_H = 1e-12

# 外层单调性检查的松弛
MONOTONE_SLACK = 1e-6

GRAPH_TERMS = (
    'fusion',
    'z_regularizer',
    'label_smoothness',
    'view_smoothness',
    's_regularizer',
)

TERM_NAMES = ('regression', 'alignment', *GRAPH_TERMS, 'sparsity')


@dataclass(frozen=True, eq=False)
class ModelState:
    """
    全部优化变量

    Attributes:
        W: 每个视图 d_v × c 的列正交投影
        F: c × n 行正交聚类指示矩阵
        lam: 每个视图的特征选择指示向量，取值 [0,1]
        theta: 回归项视图权重（单纯形）
        omega: 核对齐项视图权重（单纯形）
        b: 每个视图的最优偏置（由 W, lam, F 导出）
        graph: 图变量
        sigma: 每个视图冻结的核带宽（graph_only 模式为 None）
    """
    W: Tuple[np.ndarray, ...]
    F: np.ndarray
    lam: Tuple[np.ndarray, ...]
    theta: np.ndarray
    omega: np.ndarray
    b: Tuple[np.ndarray, ...]
    graph: GraphState
    sigma: Tuple[Optional[float], ...]

    @property
    def V(self) -> int:
        return len(self.W)

    @property
    def c(self) -> int:
        return self.F.shape[0]


@dataclass(frozen=True, eq=False)
class IterationWorkspace:
    """
    单个视图在 lambda 更新中使用的中间量，每次使用时重新计算

    Attributes:
        U: (X H X^T) ∘ (W W^T)
        e: diag(2 X H F^T W^T)
        smooth_diag: diag(X L_S X^T)
    """
    U: np.ndarray
    e: np.ndarray
    smooth_diag: Optional[np.ndarray]


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    terms: Dict[str, float]
    wall_time: float
    flags: Dict[str, int] = field(default_factory=dict)


@dataclass
class ConvergenceTrace:
    """外层迭代的目标函数轨迹"""
    records: List[IterationRecord] = field(default_factory=list)
    initial_objective: Optional[float] = None
    converged: bool = False
    stop_reason: str = ""

    def __len__(self):
        return len(self.records)

    @property
    def objectives(self) -> List[float]:
        return [record.objective for record in self.records]

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for record in self.records:
            row = {'iter': record.iteration, 'objective': record.objective}
            row.update({name: record.terms.get(name, 0.0) for name in TERM_NAMES})
            row['wall_time'] = record.wall_time
            row['flags'] = ";".join(f"{key}={value}" for key, value in sorted(record.flags.items()))
            rows.append(row)
        columns = ['iter', 'objective', *TERM_NAMES, 'wall_time', 'flags']
        return pd.DataFrame(rows, columns=columns)


@dataclass(frozen=True)
class RankedFeature:
    view: int
    feature: int
    score: float


@dataclass(frozen=True)
class FeatureRanking:
    """按 lambda 分数降序排列的特征，平局按 (视图, 特征) 升序"""
    entries: Tuple[RankedFeature, ...]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def pairs(self, limit: Optional[int] = None) -> List[Tuple[int, int]]:
        entries = self.entries if limit is None else self.entries[:limit]
        return [(entry.view, entry.feature) for entry in entries]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(rank, e.view, e.feature, e.score) for rank, e in enumerate(self.entries, 1)],
            columns=['rank', 'view', 'feature', 'score'],
        )

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> 'FeatureRanking':
        missing = {'rank', 'view', 'feature', 'score'} - set(frame.columns)
        if missing:
            raise InputError(f"排序文件缺少列: {', '.join(sorted(missing))}")
        frame = frame.sort_values('rank', kind='stable')
        return cls(tuple(
            RankedFeature(int(row.view), int(row.feature), float(row.score))
            for row in frame.itertuples(index=False)
        ))


# ---------------------------------------------------------------------------
# 基础组件
# ---------------------------------------------------------------------------

def random_orthonormal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """对种子高斯矩阵做QR，得到 rows × cols 的列正交矩阵"""
    Q, R = scipy.linalg.qr(rng.standard_normal((rows, cols)), mode='economic')
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs[None, :]


def soft_threshold(v: np.ndarray, tau: float) -> np.ndarray:
    """sign(v) * max(|v| - tau, 0)"""
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def row_center(M: np.ndarray) -> np.ndarray:
    """M H：减去每行均值"""
    return M - M.mean(axis=1, keepdims=True)


def centering_matrix(n: int) -> np.ndarray:
    return np.eye(n) - np.full((n, n), 1.0 / n)


def optimal_bias(W: np.ndarray, lam: np.ndarray, X: np.ndarray, F: np.ndarray) -> np.ndarray:
    """b = (F 1 - W^T Λ X 1) / n"""
    selected = lam[:, None] * X
    return F.mean(axis=1) - W.T @ selected.mean(axis=1)


def spectral_bound(A: np.ndarray, iterations: int, seed: int = 0) -> float:
    """幂迭代估计 ||A||_2"""
    m = A.shape[0]
    rng = np.random.default_rng(seed)
    vector = rng.standard_normal(m)
    vector /= np.linalg.norm(vector)
    estimate = 0.0
    for _ in range(iterations):
        product = A @ vector
        estimate = float(np.linalg.norm(product))
        if estimate == 0.0:
            return 0.0
        vector = product / estimate
    return estimate


def polar_factor(M: np.ndarray, seed: int = 0,
                 flags: Optional[Counter] = None) -> np.ndarray:
    """
    M 的极分解正交因子 U V^T（薄SVD）

    M 秩亏时，用种子QR得到的正交补基补全缺失方向。
    """
    m, c = M.shape
    U, s, Vt = scipy.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        rank = 0
    else:
        rank = int(np.sum(s > max(m, c) * np.finfo(float).eps * s[0]))
    if rank == c:
        return U @ Vt

    logger.warning(f"GPI: 极分解矩阵秩亏 ({rank}/{c})，使用正交补基补全")
    if flags is not None:
        flags['gpi_polar_completion'] += 1
    rng = np.random.default_rng(seed)
    basis = U[:, :rank]
    filler = rng.standard_normal((m, c - rank))
    filler -= basis @ (basis.T @ filler)
    Q, _ = scipy.linalg.qr(filler, mode='economic')
    return basis @ Vt[:rank] + Q @ Vt[rank:]


def gpi_objective(A: np.ndarray, B: np.ndarray, W: np.ndarray) -> float:
    """Tr(W^T A W - 2 W^T B)"""
    return float(np.sum(W * (A @ W)) - 2.0 * np.sum(W * B))


def gpi_solve(A: np.ndarray, B: np.ndarray, W0: np.ndarray,
              cfg: GPIConfig = GPIConfig(), seed: int = 0,
              flags: Optional[Counter] = None) -> np.ndarray:
    """
    广义幂迭代求解 min Tr(W^T A W - 2 W^T B) s.t. W^T W = I

    Args:
        A: m × m 对称矩阵（可不定）
        B: m × c
        W0: 初始列正交矩阵
        cfg: 松弛系数、内层容差与迭代次数
        seed: 幂迭代与秩亏补全的种子
        flags: 可选计数器

    Returns:
        m × c 列正交矩阵，内层目标不增
    """
    m, c = B.shape
    if m < c:
        raise ConfigurationError(f"GPI要求 m >= c，实际 m={m}, c={c}")

    eta = cfg.margin * spectral_bound(A, cfg.power_iters, seed)
    relaxed = eta * np.eye(m) - A

    W = W0
    objective = gpi_objective(A, B, W)
    for _ in range(cfg.max_iter):
        candidate = polar_factor(2.0 * relaxed @ W + 2.0 * B, seed=seed, flags=flags)
        new_objective = gpi_objective(A, B, candidate)
        if new_objective > objective + 1e-12 * (1.0 + abs(objective)):
            # 松弛常数估计不足时可能上升，保留上一步
            if flags is not None:
                flags['gpi_rejected_step'] += 1
            break
        change = abs(objective - new_objective)
        W, objective = candidate, new_objective
        if change <= cfg.tol * max(abs(objective), np.finfo(float).tiny):
            break
    return W


# ---------------------------------------------------------------------------
# 目标函数各项
# ---------------------------------------------------------------------------

def regression_residual(W: np.ndarray, lam: np.ndarray, X: np.ndarray, F: np.ndarray) -> float:
    """g^(v) = ||W^T Λ X H - F H||_F^2"""
    residual = W.T @ (lam[:, None] * row_center(X)) - row_center(F)
    return float(np.sum(residual ** 2))


def regression_residuals(state: ModelState, ds: MultiViewDataset) -> np.ndarray:
    return np.array([
        regression_residual(state.W[v], state.lam[v], ds.views[v].data, state.F)
        for v in range(ds.V)
    ])


def view_distances(lam: np.ndarray, X: np.ndarray) -> np.ndarray:
    """O^(v)_ij = ||(ΛX)_{·i} - (ΛX)_{·j}||^2"""
    return sq_dist_matrix(lam[:, None] * X)


def kernel_pairs(state: ModelState, ds: MultiViewDataset) -> List[KernelPair]:
    return [kernel_pair(ds.views[v].data, state.lam[v], state.sigma[v]) for v in range(ds.V)]


def alignment_values(state: ModelState, ds: MultiViewDataset) -> np.ndarray:
    """h^(v) = Tr(H K_c H K_u)"""
    return np.array([alignment_score(pair) for pair in kernel_pairs(state, ds)])


def frozen_regularizers(state: ModelState, ds: MultiViewDataset,
                        cfg: SolverConfig) -> Tuple[np.ndarray, np.ndarray]:
    """(eta, gamma)：优先使用冻结值"""
    graph = state.graph
    if graph.eta is not None and graph.gamma is not None:
        return graph.eta, graph.gamma
    O = [view_distances(state.lam[v], ds.views[v].data) for v in range(ds.V)]
    return graph_regularizers(state.F, O, graph, cfg.alpha, cfg.beta)


def compute_objective(state: ModelState, ds: MultiViewDataset,
                      cfg: SolverConfig) -> Tuple[float, Dict[str, float]]:
    """
    计算完整目标函数及各项分解

    eta 与 gamma^(v) 取 GraphState 中冻结的值；未冻结时按当前状态的闭式公式推导。

    Returns:
        (总值, {项名: 值})，总值为分解项按 TERM_NAMES 顺序求和
    """
    terms = {name: 0.0 for name in TERM_NAMES}
    terms['regression'] = float(np.sum(state.theta ** 2 * regression_residuals(state, ds)))

    if cfg.uses_kernel:
        h = alignment_values(state, ds)
        terms['alignment'] = float(-np.sum(state.omega ** cfg.r * h))

    if cfg.uses_graph:
        graph = state.graph
        eta, gamma = frozen_regularizers(state, ds, cfg)
        terms['fusion'] = fusion_residual(graph.Z, graph.S, graph.q)
        terms['z_regularizer'] = float(np.sum(eta * np.sum(graph.Z ** 2, axis=0)))
        terms['label_smoothness'] = float(
            cfg.alpha * np.trace(state.F @ laplacian(graph.Z) @ state.F.T))

        view_smoothness = 0.0
        s_regularizer = 0.0
        for v in range(ds.V):
            selected = state.lam[v][:, None] * ds.views[v].data
            view_smoothness += float(np.trace(selected @ laplacian(graph.S[v]) @ selected.T))
            s_regularizer += float(np.sum(gamma[v] * np.sum(graph.S[v] ** 2, axis=0)))
        terms['view_smoothness'] = cfg.beta * view_smoothness
        terms['s_regularizer'] = s_regularizer

    terms['sparsity'] = cfg.zeta * float(sum(np.sum(np.abs(lam)) for lam in state.lam))

    for name, value in terms.items():
        if not np.isfinite(value):
            raise NumericalError(f"目标函数项 {name} 出现非有限值: {value}", term=name)

    total = 0.0
    for name in TERM_NAMES:
        total += terms[name]
    return total, terms


# ---------------------------------------------------------------------------
# 变量更新
# ---------------------------------------------------------------------------

def update_W(state: ModelState, ds: MultiViewDataset, cfg: SolverConfig,
             flags: Optional[Counter] = None) -> Tuple[np.ndarray, ...]:
    """
    逐视图 GPI：J = ΛXH(ΛX)^T，M = ΛXHF^T
    """
    updated = []
    for v, view in enumerate(ds.views):
        projected = state.lam[v][:, None] * row_center(view.data)
        J = projected @ projected.T
        M = projected @ state.F.T
        updated.append(gpi_solve(J, M, state.W[v], cfg.gpi, seed=cfg.seed + v, flags=flags))
    return tuple(updated)


def f_system(state: ModelState, ds: MultiViewDataset,
             cfg: SolverConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    F 子问题的 G 与 E

    G = alpha L_Z + (sum_v theta_v^2) H，E = sum_v theta_v^2 H (ΛX)^T W。
    回归项对 F 贡献 +theta_v^2 Tr(F H F^T)，标签平滑项只出现一次。
    """
    n = ds.n
    G = np.sum(state.theta ** 2) * centering_matrix(n)
    if cfg.uses_graph:
        G += cfg.alpha * laplacian(state.graph.Z)
    E = np.zeros((n, state.c))
    for v, view in enumerate(ds.views):
        E += state.theta[v] ** 2 * (state.lam[v][:, None] * row_center(view.data)).T @ state.W[v]
    return G, E


def update_F(state: ModelState, ds: MultiViewDataset, cfg: SolverConfig,
             flags: Optional[Counter] = None) -> np.ndarray:
    """min Tr(F G F^T - 2 F E) s.t. F F^T = I，对 F^T 使用 GPI"""
    G, E = f_system(state, ds, cfg)
    return gpi_solve(G, E, state.F.T, cfg.gpi, seed=cfg.seed + ds.V, flags=flags).T


def update_theta(g: np.ndarray, flags: Optional[Counter] = None) -> np.ndarray:
    """
    theta_v = g_v^{-1} / sum g^{-1}

    存在 g_v < EPS_G 时，在这些视图上均匀分配（公式的极限）。
    """
    g = np.asarray(g, dtype=float)
    small = g < EPS_G
    if small.any():
        if flags is not None:
            flags['theta_zero_residual'] += 1
        return small / small.sum()
    inverse = 1.0 / g
    return inverse / inverse.sum()


def update_omega(h: np.ndarray, r: float, flags: Optional[Counter] = None) -> np.ndarray:
    """
    omega_v = h_v^{1/(1-r)} / sum h^{1/(1-r)}

    h_v <= EPS_H 时指数发散，权重在这些视图上平分。
    该解最小化 sum omega_v^r h_v，而总目标中对齐项带负号，
    所以这一步可能使总目标小幅上升，上升量是 h 变化量的二阶小量。
    """
    if not r > 1:
        raise ConfigurationError(f"参数 r 必须大于1: {r}")
    h = np.asarray(h, dtype=float)
    small = h <= EPS_H
    if small.any():
        logger.warning(f"omega: {int(small.sum())} 个视图的核对齐值接近0，权重在这些视图上平分")
        if flags is not None:
            flags['omega_zero_alignment'] += 1
        return small / small.sum()
    logs = np.log(h) / (1.0 - r)
    weights = np.exp(logs - logs.max())
    return weights / weights.sum()


def view_workspace(v: int, state: ModelState, ds: MultiViewDataset,
                   cfg: SolverConfig) -> IterationWorkspace:
    X = ds.views[v].data
    centered = row_center(X)
    W = state.W[v]
    U = (centered @ centered.T) * (W @ W.T)
    e = 2.0 * np.sum((centered @ state.F.T) * W, axis=1)
    smooth_diag = None
    if cfg.uses_graph:
        smooth_diag = np.sum((X @ laplacian(state.graph.S[v])) * X, axis=1)
    return IterationWorkspace(U=U, e=e, smooth_diag=smooth_diag)


def lambda_smooth_objective(v: int, lam: np.ndarray, state: ModelState,
                            ds: MultiViewDataset, cfg: SolverConfig,
                            workspace: Optional[IterationWorkspace] = None) -> float:
    """lambda 子问题的光滑部分（回归 + 核对齐 + 视图平滑）"""
    workspace = workspace or view_workspace(v, state, ds, cfg)
    value = state.theta[v] ** 2 * regression_residual(
        state.W[v], lam, ds.views[v].data, state.F)
    if cfg.uses_kernel:
        pair = kernel_pair(ds.views[v].data, lam, state.sigma[v])
        value -= state.omega[v] ** cfg.r * alignment_score(pair)
    if cfg.uses_graph:
        value += cfg.beta * float(np.sum(lam ** 2 * workspace.smooth_diag))
    return float(value)


def lambda_objective(v: int, lam: np.ndarray, state: ModelState,
                     ds: MultiViewDataset, cfg: SolverConfig,
                     workspace: Optional[IterationWorkspace] = None) -> float:
    """松弛后的 lambda 子问题目标：光滑部分 + zeta ||lambda||_1"""
    smooth = lambda_smooth_objective(v, lam, state, ds, cfg, workspace)
    return smooth + cfg.zeta * float(np.sum(np.abs(lam)))


def lambda_gradient(v: int, lam: np.ndarray, state: ModelState,
                    ds: MultiViewDataset, cfg: SolverConfig,
                    workspace: Optional[IterationWorkspace] = None) -> np.ndarray:
    """光滑部分对 lambda 的梯度"""
    workspace = workspace or view_workspace(v, state, ds, cfg)
    grad = state.theta[v] ** 2 * ((workspace.U + workspace.U.T) @ lam - workspace.e)
    if cfg.uses_kernel:
        X = ds.views[v].data
        pair = kernel_pair(X, lam, state.sigma[v])
        grad = grad + state.omega[v] ** cfg.r * alignment_grad_lambda(X, lam, pair, state.sigma[v])
    if cfg.uses_graph:
        grad = grad + 2.0 * cfg.beta * workspace.smooth_diag * lam
    return grad


def prox_step(lam: np.ndarray, grad: np.ndarray, step: float, zeta: float) -> np.ndarray:
    """软阈值近端步后投影到 [0,1]"""
    return np.clip(soft_threshold(lam - step * grad, zeta * step), 0.0, 1.0)


def update_lambda(state: ModelState, ds: MultiViewDataset, cfg: SolverConfig,
                  flags: Optional[Counter] = None) -> Tuple[np.ndarray, ...]:
    """
    近端梯度更新每个视图的 lambda

    backtracking 策略下步长从 cfg.prox.step 开始减半，直到松弛目标不增；
    回溯耗尽时保留原值。
    """
    updated = []
    for v in range(ds.V):
        lam = state.lam[v]
        workspace = view_workspace(v, state, ds, cfg)
        grad = lambda_gradient(v, lam, state, ds, cfg, workspace)
        step = cfg.prox.step

        if cfg.prox.policy == 'fixed':
            updated.append(prox_step(lam, grad, step, cfg.zeta))
            continue

        current = lambda_objective(v, lam, state, ds, cfg, workspace)
        accepted = None
        for _ in range(cfg.prox.max_halvings + 1):
            candidate = prox_step(lam, grad, step, cfg.zeta)
            if lambda_objective(v, candidate, state, ds, cfg, workspace) <= current:
                accepted = candidate
                break
            step *= 0.5

        if accepted is None:
            logger.warning(f"lambda: 视图 {v} 回溯耗尽，保留上一步")
            if flags is not None:
                flags['lambda_backtracking_exhausted'] += 1
            accepted = lam.copy()
        updated.append(accepted)
    return tuple(updated)


# ---------------------------------------------------------------------------
# 初始化、检查与排序
# ---------------------------------------------------------------------------

def _validated(ds: MultiViewDataset, cfg: SolverConfig) -> int:
    is_valid, message = cfg.validate_for(ds.n, ds.dims, ds.class_count)
    if not is_valid:
        raise ConfigurationError(message)
    return cfg.resolve_c(ds.class_count)


def initialize(ds: MultiViewDataset, cfg: SolverConfig) -> ModelState:
    """
    初始化全部变量

    Z 全部为 1/n；theta、omega、q 为 1/V；lambda 为 1/d_v；
    W 与 F 由种子高斯矩阵的QR得到；S^(v) 为 lambda = 1/d_v 下的 k 近邻概率图。
    图模式下 eta 与 gamma 在此状态上按闭式公式计算并冻结。

    Raises:
        ConfigurationError: 配置对该数据集无效（例如 c > min d_v）
    """
    c = _validated(ds, cfg)
    rng = np.random.default_rng(cfg.seed)
    V, n = ds.V, ds.n

    W = tuple(random_orthonormal(rng, view.d, c) for view in ds.views)
    F = random_orthonormal(rng, n, c).T.copy()
    lam = tuple(np.full(view.d, 1.0 / view.d) for view in ds.views)

    O = [view_distances(lam[v], ds.views[v].data) for v in range(V)]
    graph = GraphState(
        Z=np.full((n, n), 1.0 / n),
        S=tuple(init_view_graph(O[v], cfg.k) for v in range(V)),
        q=np.full((V, n), 1.0 / V),
        k=cfg.k,
    )
    if cfg.uses_graph:
        eta, gamma = graph_regularizers(F, O, graph, cfg.alpha, cfg.beta)
        graph = replace(graph, eta=eta, gamma=gamma)
    sigma = tuple(
        resolve_bandwidth(view, cfg.kernel) if cfg.uses_kernel else None
        for view in ds.views
    )
    b = tuple(optimal_bias(W[v], lam[v], ds.views[v].data, F) for v in range(V))

    return ModelState(
        W=W,
        F=F,
        lam=lam,
        theta=np.full(V, 1.0 / V),
        omega=np.full(V, 1.0 / V),
        b=b,
        graph=graph,
        sigma=sigma,
    )


def check_state(state: ModelState, ortho_tol: float = 1e-8, simplex_tol: float = 1e-10,
                sparse_graph: bool = True) -> Tuple[bool, str]:
    """
    检查 ModelState 与 GraphState 的约束

    Returns:
        Tuple[是否有效, 消息]
    """
    c = state.c
    identity = np.eye(c)
    for v, W in enumerate(state.W):
        if np.max(np.abs(W.T @ W - identity)) > ortho_tol:
            return False, f"W[{v}] 不满足列正交"
    if np.max(np.abs(state.F @ state.F.T - identity)) > ortho_tol:
        return False, "F 不满足行正交"
    for name, weights in (('theta', state.theta), ('omega', state.omega)):
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > simplex_tol:
            return False, f"{name} 不在单纯形上"
    for v, lam in enumerate(state.lam):
        if np.any(lam < 0) or np.any(lam > 1):
            return False, f"lambda[{v}] 超出 [0,1]"
    return check_graph_state(state.graph, tol=simplex_tol, sparse=sparse_graph)


def rank_features(state: ModelState, l: Optional[int] = None) -> FeatureRanking:
    """
    按 lambda 分数全局降序排列特征，平局按 (视图, 特征) 升序，取前 l 个

    Raises:
        InputError: l 不在 [1, sum d_v] 内
    """
    views = np.concatenate([np.full(lam.size, v) for v, lam in enumerate(state.lam)])
    features = np.concatenate([np.arange(lam.size) for lam in state.lam])
    scores = np.concatenate(state.lam)
    total = scores.size
    if l is None:
        l = total
    if not 1 <= l <= total:
        raise InputError(f"选择特征数 l={l} 超出范围 [1, {total}]")

    order = np.lexsort((features, views, -scores))[:l]
    return FeatureRanking(tuple(
        RankedFeature(int(views[i]), int(features[i]), float(scores[i])) for i in order
    ))


# ---------------------------------------------------------------------------
# 主循环
# ---------------------------------------------------------------------------

class KafuseSolver(LoggerMixin):
    """
    交替优化求解器

    Usage:
        solver = KafuseSolver(SolverConfig(alpha=1, beta=1, r=3))
        state, trace = solver.fit(dataset)
        ranking = solver.rank_features(state, l=50)
    """

    def __init__(self, cfg: Optional[SolverConfig] = None):
        self.cfg = cfg or SolverConfig()
        is_valid, message = self.cfg.validate()
        if not is_valid:
            raise ConfigurationError(message)

    def update_graph(self, state: ModelState, ds: MultiViewDataset,
                     flags: Counter) -> GraphState:
        """
        依次更新 Z、各 S^(v)（按视图顺序，使用已更新的其他视图）与 q
        """
        cfg = self.cfg
        graph = state.graph
        Z = update_Z(state.F, graph.S, graph.q, cfg.alpha, graph.k, flags, eta=graph.eta)
        S = list(graph.S)
        for v in range(ds.V):
            gamma = None if graph.gamma is None else graph.gamma[v]
            S[v] = update_S(view_distances(state.lam[v], ds.views[v].data), Z, graph.q[v],
                            cfg.beta, graph.k, flags, gamma=gamma,
                            others=other_views(S, graph.q, v))
        S = tuple(S)
        return replace(graph, Z=Z, S=S, q=update_q(Z, S, flags))

    def step(self, state: ModelState, ds: MultiViewDataset,
             flags: Counter) -> ModelState:
        """一次外层迭代：W, F, Z, S^(v), q, theta, omega, Lambda"""
        cfg = self.cfg

        state = replace(state, W=update_W(state, ds, cfg, flags))
        state = replace(state, F=update_F(state, ds, cfg, flags))

        if cfg.uses_graph:
            state = replace(state, graph=self.update_graph(state, ds, flags))

        state = replace(state, theta=update_theta(regression_residuals(state, ds), flags))

        if cfg.uses_kernel:
            state = replace(state, omega=update_omega(alignment_values(state, ds), cfg.r, flags))

        lam = update_lambda(state, ds, cfg, flags)
        b = tuple(optimal_bias(state.W[v], lam[v], ds.views[v].data, state.F)
                  for v in range(ds.V))
        return replace(state, lam=lam, b=b)

    @log_execution_time
    def fit(self, ds: MultiViewDataset,
            callback: Optional[Callable[[int, ModelState, IterationRecord], None]] = None
            ) -> Tuple[ModelState, ConvergenceTrace]:
        """
        交替优化直到相对目标变化小于 tol 或达到 max_iter

        Args:
            ds: 数据集
            callback: 每次外层迭代后调用 callback(iteration, state, record)

        Returns:
            (最终状态, 收敛轨迹)

        Raises:
            ConfigurationError: 配置无效
            NumericalError: 目标函数出现非有限值
        """
        cfg = self.cfg
        state = initialize(ds, cfg)
        previous, _ = compute_objective(state, ds, cfg)
        trace = ConvergenceTrace(initial_objective=previous)

        self.logger.info(
            f"开始优化: 数据集={ds.name}, V={ds.V}, n={ds.n}, mode={cfg.mode}, "
            f"alpha={cfg.alpha}, beta={cfg.beta}, r={cfg.r}, k={cfg.k}, seed={cfg.seed}"
        )

        for iteration in range(1, cfg.outer.max_iter + 1):
            started = time.perf_counter()
            flags: Counter = Counter()
            state = self.step(state, ds, flags)
            try:
                objective, terms = compute_objective(state, ds, cfg)
            except NumericalError as e:
                e.iteration = iteration
                self.logger.error(f"第 {iteration} 次迭代目标函数异常: {e}")
                raise

            if objective > previous + MONOTONE_SLACK * (1.0 + abs(previous)):
                flags['nonmonotone'] += 1
                self.logger.warning(
                    f"第 {iteration} 次迭代目标函数上升: {previous:.6g} -> {objective:.6g}")

            record = IterationRecord(
                iteration=iteration,
                objective=objective,
                terms=terms,
                wall_time=time.perf_counter() - started,
                flags=dict(flags),
            )
            trace.records.append(record)

            if self.logger.isEnabledFor(logging.DEBUG):
                is_valid, message = check_state(state, sparse_graph=cfg.uses_graph)
                if not is_valid:
                    self.logger.warning(f"第 {iteration} 次迭代约束检查失败: {message}")

            if callback is not None:
                callback(iteration, state, record)

            change = abs(previous - objective) / max(abs(previous), np.finfo(float).tiny)
            self.logger.debug(f"迭代 {iteration}: 目标={objective:.8g}, 相对变化={change:.3e}")
            if iteration % 10 == 0:
                self.logger.info(f"迭代 {iteration}: 目标={objective:.8g}")

            if change < cfg.outer.tol:
                trace.converged = True
                trace.stop_reason = f"相对变化 {change:.3e} < {cfg.outer.tol}"
                break
            previous = objective
        else:
            trace.stop_reason = f"达到最大迭代次数 {cfg.outer.max_iter}"

        self.logger.info(f"优化结束: {len(trace)} 次迭代, {trace.stop_reason}")
        return state, trace

    def rank_features(self, state: ModelState, l: Optional[int] = None) -> FeatureRanking:
        return rank_features(state, l)

    def __repr__(self):
        return f"{self.__class__.__name__}(mode={self.cfg.mode}, seed={self.cfg.seed})"


def fit(ds: MultiViewDataset, cfg: Optional[SolverConfig] = None,
        callback=None) -> Tuple[ModelState, ConvergenceTrace]:
    """KafuseSolver(cfg).fit(ds) 的便捷函数"""
    return KafuseSolver(cfg).fit(ds, callback=callback)
