"""
核心模块
数据集、核函数、图学习、求解器与评估
"""

from .config import SolverConfig, SyntheticSpec
from .dataset import MultiViewDataset, load_dataset, synth_generate
from .solver import KafuseSolver, fit, rank_features
from .evaluation import evaluate_selection

__all__ = [
    'SolverConfig',
    'SyntheticSpec',
    'MultiViewDataset',
    'load_dataset',
    'synth_generate',
    'KafuseSolver',
    'fit',
    'rank_features',
    'evaluate_selection',
]
