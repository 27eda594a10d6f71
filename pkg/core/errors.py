"""
medfpca 异常体系。

每个异常类携带 `exit_code`，由 app.py 统一映射为进程退出码：
0 成功，2 配置/数据错误，3 I/O 错误，4 数值/链失败。
"""

from __future__ import annotations

from collections.abc import Sequence


class MedFpcaError(Exception):
    exit_code = 1


class ConfigError(MedFpcaError):
    """配置校验失败；message 以字段路径开头，例如 `sim.sigma_m`。"""

    exit_code = 2

    def __init__(self, field_path: str, reason: str):
        self.field_path = field_path
        self.reason = reason
        super().__init__(f"{field_path}: {reason}")


class DataIOError(MedFpcaError):
    exit_code = 3


class DataValidationError(MedFpcaError):
    exit_code = 2

    def __init__(self, message: str, violations: Sequence[str] | None = None):
        self.violations = list(violations or [])
        super().__init__(message)


class SchemaError(DataValidationError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"missing column: {column}", [column])


class RowValidationError(DataValidationError):
    def __init__(self, row: int, reason: str):
        self.row = row
        super().__init__(f"row {row}: {reason}", [reason])


class DegenerateRangeError(DataValidationError):
    pass


class KnotDegeneracyError(MedFpcaError):
    exit_code = 4


class DomainError(MedFpcaError, ValueError):
    exit_code = 4


class DimensionMismatchError(MedFpcaError, ValueError):
    exit_code = 4


class InsufficientDataError(MedFpcaError):
    exit_code = 4


class SubjectNotFoundError(MedFpcaError, LookupError):
    exit_code = 2


class NumericalFailureError(MedFpcaError):
    """Cholesky 在 jitter 升级后仍失败。"""

    exit_code = 4

    def __init__(self, message: str, jitter_levels: Sequence[float] = ()):
        self.jitter_levels = list(jitter_levels)
        super().__init__(f"{message} (jitter tried: {self.jitter_levels})")


class ChainFailureError(MedFpcaError):
    exit_code = 4

    def __init__(self, stage: str, sweep: int, cause: Exception):
        self.stage = stage
        self.sweep = sweep
        self.cause = cause
        super().__init__(f"[{stage}] chain failed at sweep {sweep}: {cause}")


class RankDeficiencyError(MedFpcaError):
    exit_code = 4


__all__ = [
    "MedFpcaError",
    "ConfigError",
    "DataIOError",
    "DataValidationError",
    "SchemaError",
    "RowValidationError",
    "DegenerateRangeError",
    "KnotDegeneracyError",
    "DomainError",
    "DimensionMismatchError",
    "InsufficientDataError",
    "SubjectNotFoundError",
    "NumericalFailureError",
    "ChainFailureError",
    "RankDeficiencyError",
]
