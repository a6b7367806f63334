"""
输出文件工具
输出目录管理、CSV/JSON写出以及运行清单
"""

import json
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple
import logging

import pandas as pd

logger = logging.getLogger(__name__)

MANIFEST_FILENAME = "manifest.json"


@dataclass
class RunManifest:
    """
    运行清单，记录重放一次运行所需的全部信息

    Attributes:
        command: 子命令名
        version: 工具版本
        config: 解析后的配置（SolverConfig.to_dict() 或 SyntheticSpec.to_dict()）
        dataset: 数据集目录
        dataset_checksum: 数据集 SHA-256
        arguments: 其余命令行参数
        started_at / finished_at: UTC 时间戳（ISO 8601）
        outputs: 输出文件名 -> 路径
    """
    command: str
    version: str
    config: Dict[str, Any] = field(default_factory=dict)
    dataset: Optional[str] = None
    dataset_checksum: Optional[str] = None
    arguments: Dict[str, Any] = field(default_factory=dict)
    started_at: str = field(default_factory=lambda: utc_now())
    finished_at: Optional[str] = None
    outputs: Dict[str, str] = field(default_factory=dict)

    def finish(self):
        self.finished_at = utc_now()

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunManifest':
        return cls(**data)


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec='seconds')


class OutputHandler:
    """输出目录与结果文件工具类"""

    # 支持的输入文件格式
    FILE_TYPE_EXTENSIONS = {
        'csv': ['.csv'],
        'json': ['.json'],
    }

    def __init__(self, output_dir: str = "./kafuse-output"):
        """
        初始化输出处理器

        Args:
            output_dir: 输出目录
        """
        self.output_dir = Path(output_dir)
        self.written: Dict[str, str] = {}
        self._ensure_directory_exists()

    def _ensure_directory_exists(self):
        """确保目录存在"""
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            logger.debug(f"输出目录: {self.output_dir}")
        except OSError as e:
            logger.error(f"创建输出目录失败: {e}")
            raise

    def path(self, filename: str) -> Path:
        return self.output_dir / filename

    def write_csv(self, frame: pd.DataFrame, filename: str) -> Path:
        """写出带表头的CSV（点号小数，与区域设置无关）"""
        target = self.path(filename)
        frame.to_csv(target, index=False, lineterminator='\n')
        self.written[filename] = str(target)
        logger.debug(f"写出 {target} ({len(frame)} 行)")
        return target

    def write_json(self, payload: Dict[str, Any], filename: str) -> Path:
        target = self.path(filename)
        with open(target, 'w', encoding='utf-8') as f:
            json.dump(payload, f, indent=2, ensure_ascii=False, default=_json_default)
            f.write('\n')
        self.written[filename] = str(target)
        return target

    def write_manifest(self, manifest: RunManifest) -> Path:
        """补全完成时间与输出列表后写出 manifest.json"""
        manifest.finish()
        manifest.outputs = dict(self.written)
        manifest.outputs[MANIFEST_FILENAME] = str(self.path(MANIFEST_FILENAME))
        return self.write_json(manifest.to_dict(), MANIFEST_FILENAME)

    def validate_file(self, file_path: str, expected_type: str = None) -> Tuple[bool, str]:
        """
        验证输入文件

        Args:
            file_path: 文件路径
            expected_type: 期望的文件类型（可选）

        Returns:
            Tuple[是否有效, 消息]
        """
        if not os.path.exists(file_path):
            return False, f"文件不存在: {file_path}"
        if not os.access(file_path, os.R_OK):
            return False, f"文件不可读: {file_path}"
        if os.path.getsize(file_path) == 0:
            return False, f"文件为空: {file_path}"

        if expected_type:
            ext = Path(file_path).suffix.lower()
            supported_exts = self.FILE_TYPE_EXTENSIONS.get(expected_type, [])
            if ext not in supported_exts:
                return False, (
                    f"不支持的文件格式: {ext}, "
                    f"期望格式: {', '.join(supported_exts)}"
                )
        return True, "验证通过"

    def list_output_files(self, pattern: str = "*") -> List[str]:
        return sorted(str(p) for p in self.output_dir.glob(pattern) if p.is_file())


def load_manifest(path) -> RunManifest:
    with open(path, 'r', encoding='utf-8') as f:
        return RunManifest.from_dict(json.load(f))


def _json_default(value):
    # numpy 标量与数组
    if hasattr(value, 'tolist'):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"无法序列化为JSON: {type(value).__name__}")
