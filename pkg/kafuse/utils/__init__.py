"""
工具模块
日志与输出文件
"""

from .file_handler import OutputHandler, RunManifest
from .logger import setup_logger

__all__ = ['OutputHandler', 'RunManifest', 'setup_logger']
