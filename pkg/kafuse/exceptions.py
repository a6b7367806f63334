"""
异常模块
定义SDK中的所有异常类
"""


class KafuseError(Exception):
    """特征选择异常基类"""
    pass


class ResourceNotFoundError(KafuseError):
    """资源未找到异常（清单文件、视图文件、标签文件）"""
    pass


class SchemaError(KafuseError):
    """数据集清单与文件内容维度不一致"""
    pass


class DataError(KafuseError):
    """数据内容异常（非有限值、无法解析的数值）"""
    pass


class ConfigurationError(KafuseError):
    """配置错误异常"""
    pass


class InputError(KafuseError):
    """输入参数异常（长度不一致、缺少标签等）"""
    pass


class NumericalError(KafuseError):
    """数值计算异常，目标函数出现非有限值"""
    def __init__(self, message, term=None, iteration=None):
        super().__init__(message)
        self.term = term
        self.iteration = iteration


class SweepError(KafuseError):
    """参数扫描异常"""
    def __init__(self, message, failed_points=None):
        super().__init__(message)
        self.failed_points = failed_points or []
