"""
稀疏、不规则纵向数据的领域类型与 CSV 读写。

长格式 CSV：每行一个观测 (id, 处理, 时间, 中介, 结局, 协变量...)，列名通过 ColumnSchema 映射。
Dataset 构造后不可变，可在并发读者之间共享。
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
import pandas as pd
from loguru import logger

from core.errors import (
    DataIOError,
    DataValidationError,
    DegenerateRangeError,
    RowValidationError,
    SchemaError,
)
from core.run_config import ColumnSchema


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SubjectSeries:
    id: str
    z: int
    times: np.ndarray
    mediator: np.ndarray
    outcome: np.ndarray
    covariates: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "times", _frozen(self.times))
        object.__setattr__(self, "mediator", _frozen(self.mediator))
        object.__setattr__(self, "outcome", _frozen(self.outcome))
        n = len(self.times)
        cov = np.array(self.covariates, dtype=float)
        if cov.size == 0:
            cov = np.zeros((n, 0))
        elif cov.ndim == 1:
            cov = cov.reshape(n, -1)
        object.__setattr__(self, "covariates", _frozen(cov))

    @property
    def n_obs(self) -> int:
        return len(self.times)


@dataclass(frozen=True, eq=False)
class Dataset:
    subjects: tuple[SubjectSeries, ...]
    covariate_names: tuple[str, ...]
    time_range: tuple[float, float] = field(default=(0.0, 1.0))

    def __post_init__(self) -> None:
        object.__setattr__(self, "subjects", tuple(self.subjects))
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    @property
    def n_obs(self) -> int:
        return sum(s.n_obs for s in self.subjects)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.subjects]

    def subject(self, subject_id: str) -> SubjectSeries:
        for s in self.subjects:
            if s.id == str(subject_id):
                return s
        raise KeyError(subject_id)

    def stacked(self) -> dict[str, np.ndarray]:
        """按观测堆叠：subject 下标、处理、时间、中介、结局、协变量矩阵。"""
        p = len(self.covariate_names)
        if not self.subjects:
            empty = np.zeros(0)
            return {"sid": np.zeros(0, dtype=int), "z": empty, "times": empty,
                    "mediator": empty, "outcome": empty, "covariates": np.zeros((0, p))}
        sid = np.concatenate([np.full(s.n_obs, i, dtype=int) for i, s in enumerate(self.subjects)])
        return {
            "sid": sid,
            "z": np.array([s.z for s in self.subjects], dtype=float)[sid],
            "times": np.concatenate([s.times for s in self.subjects]),
            "mediator": np.concatenate([s.mediator for s in self.subjects]),
            "outcome": np.concatenate([s.outcome for s in self.subjects]),
            "covariates": np.vstack([s.covariates.reshape(s.n_obs, p) for s in self.subjects]),
        }


@dataclass(frozen=True)
class Violation:
    subject_id: str | None
    message: str

    def __str__(self) -> str:
        return f"{self.subject_id}: {self.message}" if self.subject_id is not None else self.message


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def messages(self) -> list[str]:
        return [str(v) for v in self.violations]


def _subject_violations(s: SubjectSeries, n_cov: int) -> list[Violation]:
    out: list[Violation] = []
    n = s.n_obs
    if n < 1:
        out.append(Violation(s.id, "no observations"))
    if s.z not in (0, 1):
        out.append(Violation(s.id, f"treatment not in {{0,1}}: {s.z}"))
    if len(s.mediator) != n or len(s.outcome) != n or s.covariates.shape[0] != n:
        out.append(Violation(s.id, "length mismatch between times and values"))
        return out
    if s.covariates.shape[1] != n_cov:
        out.append(Violation(s.id, f"covariate column count {s.covariates.shape[1]} != {n_cov}"))
    for name, arr in (("times", s.times), ("mediator", s.mediator),
                      ("outcome", s.outcome), ("covariates", s.covariates)):
        if not np.all(np.isfinite(arr)):
            out.append(Violation(s.id, f"non-finite {name}"))
    if n > 1 and np.any(np.diff(s.times) <= 0):
        out.append(Violation(s.id, "non-increasing times"))
    if n and np.any(s.times < 0):
        out.append(Violation(s.id, "negative times"))
    return out


def validate(ds: Dataset) -> ValidationReport:
    violations: list[Violation] = []
    n_cov = len(ds.covariate_names)
    seen: set[str] = set()
    for s in ds.subjects:
        if s.id in seen:
            violations.append(Violation(s.id, "duplicate subject id"))
        seen.add(s.id)
        violations.extend(_subject_violations(s, n_cov))
    arms = {s.z for s in ds.subjects}
    for arm in (0, 1):
        if arm not in arms:
            violations.append(Violation(None, f"treatment arm empty (z={arm})"))
    return ValidationReport(tuple(violations))


def _require_columns(frame: pd.DataFrame, schema: ColumnSchema) -> None:
    for column in [schema.id, schema.treatment, schema.time, schema.mediator,
                   schema.outcome, *schema.covariates]:
        if column not in frame.columns:
            raise SchemaError(column)


def load_dataset(
    path: str,
    schema: ColumnSchema | None = None,
    transform: Literal["none", "log"] = "none",
) -> Dataset:
    """读取长格式 CSV，按 id 分组、组内按时间排序。"""
    schema = schema or ColumnSchema()
    try:
        frame = pd.read_csv(path, dtype={schema.id: str}, keep_default_na=True, encoding="utf-8")
    except FileNotFoundError as e:
        raise DataIOError(f"dataset not found: {path}") from e
    except (OSError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataIOError(f"cannot read dataset {path}: {e}") from e
    _require_columns(frame, schema)

    value_cols = [schema.time, schema.mediator, schema.outcome, *schema.covariates]
    blanks = frame[[schema.id, schema.treatment, *value_cols]].isna().any(axis=1).to_numpy()
    if blanks.any():
        raise RowValidationError(int(np.argmax(blanks)), "blank value")

    numeric = frame[[schema.treatment, *value_cols]].apply(pd.to_numeric, errors="coerce")
    bad = ~np.isfinite(numeric.to_numpy(dtype=float)).all(axis=1)
    if bad.any():
        raise RowValidationError(int(np.argmax(bad)), "non-finite value")
    z = numeric[schema.treatment].to_numpy(dtype=float)
    bad_z = ~np.isin(z, (0.0, 1.0))
    if bad_z.any():
        raise RowValidationError(int(np.argmax(bad_z)), f"treatment not in {{0,1}}: {z[bad_z][0]}")

    times = numeric[schema.time].to_numpy(dtype=float)
    negative = times < 0
    if negative.any():
        raise RowValidationError(int(np.argmax(negative)), f"negative time: {times[negative][0]}")

    outcome = numeric[schema.outcome].to_numpy(dtype=float)
    if transform == "log":
        nonpos = outcome <= 0
        if nonpos.any():
            raise RowValidationError(int(np.argmax(nonpos)), "outcome <= 0 under log transform")
        outcome = np.log(outcome)

    work = pd.DataFrame({
        "id": frame[schema.id].astype(str).to_numpy(),
        "z": z,
        "time": times,
        "mediator": numeric[schema.mediator].to_numpy(dtype=float),
        "outcome": outcome,
        "row": np.arange(len(frame)),
    })
    cov = numeric[list(schema.covariates)].to_numpy(dtype=float).reshape(len(frame), len(schema.covariates))

    subjects: list[SubjectSeries] = []
    # 保持 CSV 中 id 的首次出现顺序
    for sid, group in work.groupby("id", sort=False):
        group = group.sort_values("time", kind="mergesort")
        z_values = np.unique(group["z"].to_numpy())
        if len(z_values) != 1:
            raise RowValidationError(int(group["row"].iloc[0]), f"treatment varies within subject {sid}")
        rows = group["row"].to_numpy()
        subjects.append(SubjectSeries(
            id=str(sid),
            z=int(z_values[0]),
            times=group["time"].to_numpy(),
            mediator=group["mediator"].to_numpy(),
            outcome=group["outcome"].to_numpy(),
            covariates=cov[rows],
        ))

    t_max = float(work["time"].max()) if len(work) else 0.0
    ds = Dataset(tuple(subjects), tuple(schema.covariates), (0.0, t_max))
    per_subject = [v for s in ds.subjects for v in _subject_violations(s, len(ds.covariate_names))]
    if per_subject:
        raise DataValidationError(f"dataset {path} violates invariants: {per_subject[0]}",
                                  [str(v) for v in per_subject])
    logger.info(f"已加载数据集 {path}: {ds.n_subjects} 个个体, {ds.n_obs} 个观测")
    return ds


def write_dataset(ds: Dataset, path: str, schema: ColumnSchema | None = None) -> None:
    """写出长格式 CSV；浮点以 17 位有效数字写出，保证读回逐位一致。"""
    schema = schema or ColumnSchema(covariates=list(ds.covariate_names))
    if len(schema.covariates) != len(ds.covariate_names):
        schema = schema.model_copy(update={"covariates": list(ds.covariate_names)})
    records: dict[str, list] = {schema.id: [], schema.treatment: [], schema.time: [],
                                schema.mediator: [], schema.outcome: []}
    cov_rows: list[np.ndarray] = []
    for s in ds.subjects:
        records[schema.id].extend([s.id] * s.n_obs)
        records[schema.treatment].extend([s.z] * s.n_obs)
        records[schema.time].extend(s.times.tolist())
        records[schema.mediator].extend(s.mediator.tolist())
        records[schema.outcome].extend(s.outcome.tolist())
        cov_rows.append(s.covariates)
    frame = pd.DataFrame(records)
    cov = np.vstack(cov_rows) if cov_rows else np.zeros((0, len(schema.covariates)))
    for j, name in enumerate(schema.covariates):
        frame[name] = cov[:, j]
    try:
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    except OSError as e:
        raise DataIOError(f"cannot write dataset {path}: {e}") from e


def normalize_time(ds: Dataset) -> tuple[Dataset, float]:
    """时间除以 T_max 映射到 [0,1]，返回 scale = T_max；对已归一化的数据再次调用得到 scale 1。"""
    all_times = [s.times for s in ds.subjects if s.n_obs]
    if not all_times:
        raise DegenerateRangeError("empty dataset has no time range")
    t_max = float(max(t.max() for t in all_times))
    if t_max <= 0:
        raise DegenerateRangeError("all time stamps are zero")
    subjects = tuple(replace(s, times=s.times / t_max) for s in ds.subjects)
    return Dataset(subjects, ds.covariate_names, (0.0, 1.0)), t_max


def add_history_covariate(ds: Dataset, kind: Literal["last", "mean"] = "last", name: str | None = None) -> Dataset:
    """
    追加一列"历史结局"协变量：最近一次先前观测的结局（last）或全部先前结局的均值（mean）。
    个体的第一个观测没有历史，用全数据结局均值填充。
    """
    name = name or f"prior_outcome_{kind}"
    if name in ds.covariate_names:
        raise DataValidationError(f"covariate {name} already present", [name])
    fill = float(np.mean(np.concatenate([s.outcome for s in ds.subjects]))) if ds.n_obs else 0.0
    subjects = []
    for s in ds.subjects:
        hist = np.empty(s.n_obs)
        hist[:1] = fill
        if kind == "last":
            hist[1:] = s.outcome[:-1]
        else:
            hist[1:] = np.cumsum(s.outcome)[:-1] / np.arange(1, s.n_obs)
        subjects.append(replace(s, covariates=np.column_stack([s.covariates, hist])))
    return Dataset(tuple(subjects), (*ds.covariate_names, name), ds.time_range)


__all__ = [
    "SubjectSeries",
    "Dataset",
    "Violation",
    "ValidationReport",
    "validate",
    "load_dataset",
    "write_dataset",
    "normalize_time",
    "add_history_covariate",
]
