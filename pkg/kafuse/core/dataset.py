"""
多视图数据集
数据集的读取、校验、归一化、写出以及带真值的合成数据生成

磁盘格式:
    dataset.json   清单 {name, n, views:[{name, file, d}], labels_file?, class_count?}
    <view>.csv     无表头CSV，行 = 特征，列 = 样本
    labels.csv     可选，每行一个整数标签（1..class_count）
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import SUPPORTED_NORMALIZATIONS, SyntheticSpec
from ..exceptions import (
    ConfigurationError, DataError, ResourceNotFoundError, SchemaError
)

logger = logging.getLogger(__name__)

MANIFEST_NAME = "dataset.json"
LABELS_NAME = "labels.csv"
GROUND_TRUTH_NAME = "ground_truth.json"


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ViewMatrix:
    """单个视图的数据矩阵，形状 d_v × n"""
    data: np.ndarray
    view_name: str

    def __post_init__(self):
        object.__setattr__(self, 'data', _frozen(self.data))

    @property
    def d(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class SyntheticTruth:
    """
    合成数据的真值元数据

    索引为全局0起始特征编号（各视图按顺序拼接）。
    """
    roles: Tuple[str, ...]
    duplicate_sources: Dict[int, int] = field(default_factory=dict)
    nonlinear_sources: Dict[int, int] = field(default_factory=dict)

    def indices(self, role: str) -> List[int]:
        return [i for i, r in enumerate(self.roles) if r == role]

    @property
    def informative(self) -> List[int]:
        return self.indices('informative')

    @property
    def redundant(self) -> List[int]:
        return [i for i, r in enumerate(self.roles) if r in ('duplicate', 'nonlinear')]

    @property
    def noise(self) -> List[int]:
        return self.indices('noise')

    def to_dict(self) -> dict:
        return {
            'informative': self.informative,
            'redundant': self.redundant,
            'noise': self.noise,
            'duplicate_sources': {str(k): v for k, v in self.duplicate_sources.items()},
            'nonlinear_sources': {str(k): v for k, v in self.nonlinear_sources.items()},
        }


@dataclass(frozen=True, eq=False)
class MultiViewDataset:
    """
    多视图数据集

    Attributes:
        views: 视图矩阵列表，第 j 列在所有视图中对应同一个样本
        labels: 可选真实标签，取值 1..class_count
        class_count: 可选类别数
        name: 数据集名称
        truth: 合成数据的真值（仅 synth_generate 产生）
    """
    views: Tuple[ViewMatrix, ...]
    labels: Optional[np.ndarray] = None
    class_count: Optional[int] = None
    name: str = "dataset"
    truth: Optional[SyntheticTruth] = None

    def __post_init__(self):
        object.__setattr__(self, 'views', tuple(self.views))
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.size and not np.all(np.equal(np.mod(labels, 1), 0)):
                raise DataError("标签必须为整数")
            labels = labels.astype(np.int64)
            labels.setflags(write=False)
            object.__setattr__(self, 'labels', labels)
            if self.class_count is None and labels.size:
                object.__setattr__(self, 'class_count', int(labels.max()))
        is_valid, message = self.validate()
        if not is_valid:
            raise SchemaError(message)

    @property
    def n(self) -> int:
        return self.views[0].n

    @property
    def V(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> List[int]:
        return [view.d for view in self.views]

    @property
    def total_features(self) -> int:
        return sum(self.dims)

    @property
    def offsets(self) -> List[int]:
        """每个视图在全局特征编号中的起始位置"""
        return [int(x) for x in np.concatenate([[0], np.cumsum(self.dims)[:-1]])]

    def validate(self) -> Tuple[bool, str]:
        if not self.views:
            return False, "数据集至少需要一个视图"
        n = self.views[0].n
        if n < 2:
            return False, f"样本数必须不小于2: {n}"
        for view in self.views:
            if view.data.ndim != 2:
                return False, f"视图 {view.view_name} 不是二维矩阵"
            if view.d < 1:
                return False, f"视图 {view.view_name} 没有特征"
            if view.n != n:
                return False, f"视图 {view.view_name} 列数 {view.n} 与样本数 {n} 不一致"
            if not np.all(np.isfinite(view.data)):
                return False, f"视图 {view.view_name} 包含非有限值"
        if self.labels is not None:
            if self.labels.shape != (n,):
                return False, f"标签长度 {self.labels.shape} 与样本数 {n} 不一致"
            if self.class_count is None or self.class_count < 1:
                return False, f"类别数无效: {self.class_count}"
            if self.labels.min() < 1 or self.labels.max() > self.class_count:
                return False, f"标签取值必须在 1..{self.class_count} 之间"
            present = np.unique(self.labels)
            if present.size != self.class_count:
                return False, f"类别数为 {self.class_count}，但只出现了 {present.size} 个类别"
        return True, "验证通过"

    def global_index(self, view: int, feature: int) -> int:
        return self.offsets[view] + feature

    def select_rows(self, pairs: Sequence[Tuple[int, int]]) -> np.ndarray:
        """按 (视图, 特征) 顺序堆叠被选中的特征行"""
        if not pairs:
            return np.zeros((0, self.n))
        return np.vstack([self.views[v].data[f] for v, f in pairs])

    def equals(self, other: 'MultiViewDataset') -> bool:
        """逐位比较视图矩阵与标签"""
        if self.V != other.V or self.dims != other.dims or self.n != other.n:
            return False
        for mine, theirs in zip(self.views, other.views):
            if mine.view_name != theirs.view_name or not np.array_equal(mine.data, theirs.data):
                return False
        if (self.labels is None) != (other.labels is None):
            return False
        if self.labels is not None and not np.array_equal(self.labels, other.labels):
            return False
        return self.class_count == other.class_count

    def __repr__(self):
        return (f"{self.__class__.__name__}(name={self.name}, V={self.V}, "
                f"n={self.n}, dims={self.dims}, labelled={self.labels is not None})")


def _read_matrix(path: Path) -> np.ndarray:
    try:
        frame = pd.read_csv(path, header=None, sep=',', float_precision='round_trip')
    except pd.errors.EmptyDataError as e:
        raise SchemaError(f"文件为空: {path}") from e
    except pd.errors.ParserError as e:
        raise SchemaError(f"CSV格式错误: {path}: {e}") from e
    try:
        return frame.to_numpy(dtype=float)
    except (TypeError, ValueError) as e:
        raise DataError(f"文件包含无法解析的数值: {path}") from e


def _load_manifest(root: Path) -> dict:
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ResourceNotFoundError(f"清单文件不存在: {manifest_path}")
    try:
        with open(manifest_path, 'r', encoding='utf-8') as f:
            manifest = json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaError(f"清单文件不是合法JSON: {manifest_path}: {e}") from e

    for key in ('n', 'views'):
        if key not in manifest:
            raise SchemaError(f"清单缺少字段: {key}")
    if not isinstance(manifest['views'], list) or not manifest['views']:
        raise SchemaError("清单字段 views 必须是非空列表")
    for entry in manifest['views']:
        for key in ('file', 'd'):
            if key not in entry:
                raise SchemaError(f"视图条目缺少字段: {key}")
    return manifest


def load_dataset(root_path) -> MultiViewDataset:
    """
    从目录读取多视图数据集

    Args:
        root_path: 包含 dataset.json 的目录

    Returns:
        MultiViewDataset: 校验后的数据集

    Raises:
        ResourceNotFoundError: 清单或其引用的文件不存在
        SchemaError: 清单声明的维度与文件内容不一致
        DataError: 文件包含非有限值或无法解析的数值
    """
    root = Path(root_path)
    manifest = _load_manifest(root)
    n = int(manifest['n'])

    views = []
    for v, entry in enumerate(manifest['views']):
        path = root / entry['file']
        if not path.is_file():
            raise ResourceNotFoundError(f"视图文件不存在: {path}")
        data = _read_matrix(path)
        expected = (int(entry['d']), n)
        if data.shape != expected:
            raise SchemaError(
                f"视图 {entry.get('name', v)} 形状 {data.shape} 与清单声明 {expected} 不一致"
            )
        if not np.all(np.isfinite(data)):
            raise DataError(f"视图 {entry.get('name', v)} 包含非有限值: {path}")
        views.append(ViewMatrix(data=data, view_name=str(entry.get('name', f"view{v + 1}"))))

    labels = None
    class_count = manifest.get('class_count')
    labels_file = manifest.get('labels_file')
    if labels_file:
        path = root / labels_file
        if not path.is_file():
            raise ResourceNotFoundError(f"标签文件不存在: {path}")
        raw = _read_matrix(path)
        if raw.shape != (n, 1):
            raise SchemaError(f"标签文件形状 {raw.shape} 与样本数 {n} 不一致")
        if not np.all(np.isfinite(raw)):
            raise DataError(f"标签文件包含非有限值: {path}")
        labels = raw[:, 0]

    dataset = MultiViewDataset(
        views=views,
        labels=labels,
        class_count=int(class_count) if class_count is not None else None,
        name=str(manifest.get('name', root.name)),
    )
    logger.info(f"读取数据集 {dataset.name}: V={dataset.V}, n={dataset.n}, dims={dataset.dims}")
    return dataset


def write_dataset(ds: MultiViewDataset, root_path, name: Optional[str] = None) -> Path:
    """
    按文档格式写出数据集

    Returns:
        清单文件路径
    """
    root = Path(root_path)
    root.mkdir(parents=True, exist_ok=True)

    entries = []
    for v, view in enumerate(ds.views):
        filename = f"view{v + 1}.csv"
        pd.DataFrame(view.data).to_csv(
            root / filename, header=False, index=False, lineterminator='\n'
        )
        entries.append({'name': view.view_name, 'file': filename, 'd': view.d})

    manifest = {'name': name or ds.name, 'n': ds.n, 'views': entries}
    if ds.labels is not None:
        pd.DataFrame(ds.labels.reshape(-1, 1)).to_csv(
            root / LABELS_NAME, header=False, index=False, lineterminator='\n'
        )
        manifest['labels_file'] = LABELS_NAME
        manifest['class_count'] = int(ds.class_count)

    manifest_path = root / MANIFEST_NAME
    with open(manifest_path, 'w', encoding='utf-8') as f:
        json.dump(manifest, f, indent=2, ensure_ascii=False)
        f.write('\n')

    logger.debug(f"数据集已写出: {manifest_path}")
    return manifest_path


def write_ground_truth(truth: SyntheticTruth, root_path) -> Path:
    path = Path(root_path) / GROUND_TRUTH_NAME
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(truth.to_dict(), f, indent=2)
        f.write('\n')
    return path


def dataset_checksum(root_path) -> str:
    """清单及其引用文件的 SHA-256（按清单顺序）"""
    root = Path(root_path)
    manifest = _load_manifest(root)
    digest = hashlib.sha256()
    files = [MANIFEST_NAME] + [entry['file'] for entry in manifest['views']]
    if manifest.get('labels_file'):
        files.append(manifest['labels_file'])
    for filename in files:
        path = root / filename
        if not path.is_file():
            raise ResourceNotFoundError(f"文件不存在: {path}")
        digest.update(path.read_bytes())
    return digest.hexdigest()


def _normalize_rows(data: np.ndarray, scheme: str) -> np.ndarray:
    if scheme == 'minmax':
        low = data.min(axis=1, keepdims=True)
        span = data.max(axis=1, keepdims=True) - low
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (data - low) / safe, 0.0)
    if scheme == 'zscore':
        mean = data.mean(axis=1, keepdims=True)
        std = data.std(axis=1, keepdims=True)
        safe = np.where(std > 0, std, 1.0)
        return np.where(std > 0, (data - mean) / safe, 0.0)
    return data.copy()


def normalize(ds: MultiViewDataset, scheme: str = 'minmax') -> MultiViewDataset:
    """
    逐特征（逐行）归一化

    Args:
        ds: 数据集
        scheme: minmax（映射到[0,1]）/ zscore（均值0方差1）/ none

    常数行映射为0。
    """
    if scheme not in SUPPORTED_NORMALIZATIONS:
        raise ConfigurationError(
            f"不支持的归一化方式: {scheme}, 支持方式: {', '.join(SUPPORTED_NORMALIZATIONS)}"
        )
    if scheme == 'none':
        return ds
    views = [ViewMatrix(data=_normalize_rows(view.data, scheme), view_name=view.view_name)
             for view in ds.views]
    return replace(ds, views=tuple(views))


def _standardize(row: np.ndarray) -> np.ndarray:
    std = row.std()
    if std == 0:
        return np.zeros_like(row)
    return (row - row.mean()) / std


def _balanced_labels(n: int, classes: int, rng: np.random.Generator) -> np.ndarray:
    counts = [n // classes + (1 if i < n % classes else 0) for i in range(classes)]
    labels = np.repeat(np.arange(1, classes + 1), counts)
    return labels[rng.permutation(n)]


def synth_generate(spec: SyntheticSpec) -> MultiViewDataset:
    """
    生成带有真值的合成多视图数据集

    信息特征为各类别高斯中心加噪声；线性冗余为信息特征的精确复制；
    非线性冗余为标准化信息特征的 tanh；噪声特征与类别无关。
    每个视图内的特征行按种子随机打乱，真值记录在 dataset.truth 中。

    Raises:
        ConfigurationError: 规格无效
    """
    is_valid, message = spec.validate()
    if not is_valid:
        raise ConfigurationError(message)

    rng = np.random.default_rng(spec.seed)
    labels = _balanced_labels(spec.n, spec.classes, rng)

    views = []
    roles: List[str] = []
    duplicate_sources: Dict[int, int] = {}
    nonlinear_sources: Dict[int, int] = {}
    offset = 0

    for v in range(spec.views):
        centers = rng.normal(0.0, spec.separation, size=(spec.classes, spec.informative))
        informative = centers[labels - 1].T + spec.noise_std * rng.standard_normal(
            (spec.informative, spec.n))

        rows = [informative[i] for i in range(spec.informative)]
        view_roles = ['informative'] * spec.informative
        sources = list(range(spec.informative))

        for i in range(spec.duplicates):
            src = i % spec.informative
            rows.append(informative[src].copy())
            view_roles.append('duplicate')
            sources.append(src)
        for i in range(spec.nonlinear):
            src = i % spec.informative
            rows.append(np.tanh(_standardize(informative[src])))
            view_roles.append('nonlinear')
            sources.append(src)
        for _ in range(spec.noise):
            rows.append(rng.standard_normal(spec.n))
            view_roles.append('noise')
            sources.append(-1)

        perm = rng.permutation(len(rows))
        inverse = np.argsort(perm)
        data = np.vstack(rows)[perm]

        for pos, original in enumerate(perm):
            role = view_roles[original]
            roles.append(role)
            if role in ('duplicate', 'nonlinear'):
                target = duplicate_sources if role == 'duplicate' else nonlinear_sources
                target[offset + pos] = offset + int(inverse[sources[original]])

        views.append(ViewMatrix(data=data, view_name=f"view{v + 1}"))
        offset += len(rows)

    truth = SyntheticTruth(
        roles=tuple(roles),
        duplicate_sources=duplicate_sources,
        nonlinear_sources=nonlinear_sources,
    )
    logger.debug(f"生成合成数据集: n={spec.n}, V={spec.views}, d_v={spec.view_dim}, seed={spec.seed}")
    return MultiViewDataset(
        views=views,
        labels=labels,
        class_count=spec.classes,
        name=f"synth_seed{spec.seed}",
        truth=truth,
    )
