"""运行产物的读写：效应曲线 CSV、抽样轨迹 CSV、报告 CSV、JSON 摘要与 manifest。"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from core.errors import DataIOError, DataValidationError
from domain.fpca_mcmc import FpcaDraws
from domain.mediation import EffectCurve, MediationFit, impute_trajectories
from domain.study import REPORT_COLUMNS

FLOAT_FORMAT = "%.17g"


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return None if not np.isfinite(obj) else float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def ensure_dir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise DataIOError(f"cannot create directory {path}: {e}") from e
    return path


def write_json(path: str, payload: dict) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, ensure_ascii=False, indent=2, default=_json_default)
            f.write("\n")
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e}") from e


def _write_frame(frame: pd.DataFrame, path: str) -> None:
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e}") from e


def write_curve(curve: EffectCurve, path: str) -> None:
    """列: t, mean, lower, upper（t 为归一化时间）。"""
    _write_frame(curve.to_frame(), path)


def write_curves(curves: dict[str, EffectCurve], out_dir: str) -> dict[str, str]:
    ensure_dir(out_dir)
    paths = {}
    for name, curve in curves.items():
        paths[name] = os.path.join(out_dir, f"{name}.csv")
        write_curve(curve, paths[name])
    return paths


def write_draws(draws: FpcaDraws, path: str) -> None:
    """每行一个保留抽样的标量参数轨迹。"""
    frame = pd.DataFrame(draws.scalar_traces())
    frame.insert(0, "draw", np.arange(draws.n_draws))
    _write_frame(frame, path)


def write_trajectories(fit: MediationFit, path: str) -> None:
    """宽表：每行一个 (个体, 模型, 统计量)，列为报告网格上的取值。"""
    bands = impute_trajectories(fit, fit.mediator_draws.ids)
    cols = [f"t_{t:.4f}" for t in fit.grid]
    records = []
    for sid, per_model in bands.items():
        for model, band in per_model.items():
            for stat in ("mean", "lower", "upper"):
                records.append([sid, model, stat, *getattr(band, stat)])
    _write_frame(pd.DataFrame(records, columns=["id", "model", "stat", *cols]), path)


def write_score_summary(frame: pd.DataFrame, path: str) -> None:
    _write_frame(frame, path)


def write_report(frame: pd.DataFrame, path: str) -> None:
    _write_frame(frame[REPORT_COLUMNS], path)
    logger.info(f"报告已写入: {path}")


def read_report(path: str) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as e:
        raise DataIOError(f"report file not found: {path}") from e
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataIOError(f"cannot read report {path}: {e}") from e
    missing = [c for c in REPORT_COLUMNS if c not in frame.columns]
    if missing:
        raise DataValidationError(f"report is missing columns: {', '.join(missing)}", missing)
    return frame


__all__ = [
    "ensure_dir",
    "write_json",
    "write_curve",
    "write_curves",
    "write_draws",
    "write_trajectories",
    "write_score_summary",
    "write_report",
    "read_report",
]
