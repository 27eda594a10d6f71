"""
重复模拟实验：每个重复由 (主种子, "replicate", T, r) 派生的种子生成数据集，
依次用各方法估计积分 TE / ACME，汇总绝对偏差、RMSE 与 95% 区间覆盖率。
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from loguru import logger

from core.run_config import FitConfig, RunConfig, SimConfig
from core.seed_service import derive_seed
from domain.baselines import gee_mediation
from domain.mediation import acme_curve, fit_mediation, integrate_effect, te_curve
from domain.simulate import SimTruth, generate_dataset
from infra.worker_pool import run_ordered

ESTIMANDS = ("te", "acme")
METHOD_LABELS = {"mfpca": "MFPCA", "gee": "GEE"}
REPORT_COLUMNS = ["method", "estimand", "sparsity_T", "n_reps", "abs_bias", "rmse", "coverage", "n_failed"]
FULL_SCALE_REPS = 1000


@dataclass(frozen=True)
class IntervalEstimate:
    estimate: float
    lower: float
    upper: float


@dataclass(frozen=True)
class ReplicateTask:
    index: int
    sparsity_T: float
    seed: int
    sim_cfg: SimConfig
    fit_cfg: FitConfig
    methods: tuple[str, ...]
    gee_corr: str = "ar1"


@dataclass(frozen=True)
class ReplicateResult:
    index: int
    sparsity_T: float
    seed: int
    estimates: dict[str, dict[str, IntervalEstimate]] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class MetricCell:
    abs_bias: float
    rmse: float
    coverage: float
    n_used: int


def _run_mfpca(task: ReplicateTask, ds) -> dict[str, IntervalEstimate]:
    fit = fit_mediation(ds, task.fit_cfg, seed=derive_seed(task.seed, "mfpca"))
    out = {}
    for name, curve in (("te", te_curve(fit)), ("acme", acme_curve(fit))):
        s = integrate_effect(curve)
        out[name] = IntervalEstimate(s.mean, s.lower, s.upper)
    return out


def _run_gee(task: ReplicateTask, ds) -> dict[str, IntervalEstimate]:
    res = gee_mediation(ds, corr=task.gee_corr)
    return {name: IntervalEstimate(est.estimate, est.lower, est.upper)
            for name, est in (("te", res.te), ("acme", res.acme))}


_RUNNERS = {"mfpca": _run_mfpca, "gee": _run_gee}


def run_replicate(task: ReplicateTask) -> ReplicateResult:
    """单个重复：方法级失败被记录而不中断其他方法。"""
    sim_cfg = task.sim_cfg.model_copy(update={"mean_obs": task.sparsity_T, "seed": task.seed})
    ds, _ = generate_dataset(sim_cfg, np.random.default_rng(task.seed))
    estimates: dict[str, dict[str, IntervalEstimate]] = {}
    failures: dict[str, str] = {}
    for method in task.methods:
        try:
            estimates[method] = _RUNNERS[method](task, ds)
        except Exception as e:
            logger.warning(f"重复 {task.index} (T={task.sparsity_T}) 方法 {method} 失败: {e}")
            failures[method] = f"{type(e).__name__}: {e}"
    return ReplicateResult(task.index, task.sparsity_T, task.seed, estimates, failures)


def compute_metrics(estimates, lowers, uppers, truth: float) -> MetricCell:
    """abs_bias = |mean(est) - truth|；rmse = sqrt(mean((est - truth)²))；coverage = 区间覆盖真值的比例。"""
    est = np.asarray(estimates, dtype=float)
    if len(est) == 0:
        return MetricCell(float("nan"), float("nan"), float("nan"), 0)
    err = est - truth
    covered = (np.asarray(lowers, dtype=float) <= truth) & (truth <= np.asarray(uppers, dtype=float))
    return MetricCell(
        abs_bias=float(abs(err.mean())),
        rmse=float(np.sqrt(np.mean(err**2))),
        coverage=float(covered.mean()),
        n_used=len(est),
    )


@dataclass(frozen=True, eq=False)
class ReplicationReport:
    sparsity_T: float
    n_reps: int
    methods: tuple[str, ...]
    results: tuple[ReplicateResult, ...]
    master_seed: int
    truth: SimTruth = field(default_factory=SimTruth)
    max_failure_rate: float = 0.05
    config: dict = field(default_factory=dict)

    def n_failed(self, method: str) -> int:
        return sum(1 for r in self.results if method in r.failures)

    @property
    def valid(self) -> bool:
        return all(self.n_failed(m) <= self.max_failure_rate * self.n_reps for m in self.methods)

    def metrics(self, method: str, estimand: str) -> MetricCell:
        rows = [r.estimates[method][estimand] for r in self.results if method in r.estimates]
        return compute_metrics([e.estimate for e in rows], [e.lower for e in rows], [e.upper for e in rows],
                               self.truth.value(estimand))

    def to_frame(self) -> pd.DataFrame:
        records = []
        for method in self.methods:
            for estimand in ESTIMANDS:
                cell = self.metrics(method, estimand)
                records.append({
                    "method": method,
                    "estimand": estimand,
                    "sparsity_T": self.sparsity_T,
                    "n_reps": self.n_reps,
                    "abs_bias": cell.abs_bias,
                    "rmse": cell.rmse,
                    "coverage": cell.coverage,
                    "n_failed": self.n_failed(method),
                })
        return pd.DataFrame.from_records(records, columns=REPORT_COLUMNS)

    def estimates_frame(self) -> pd.DataFrame:
        """每个重复、方法、估计量的原始估计与区间。"""
        records = []
        for r in self.results:
            for method in self.methods:
                for estimand in ESTIMANDS:
                    est = r.estimates.get(method, {}).get(estimand)
                    records.append({
                        "replicate": r.index,
                        "sparsity_T": r.sparsity_T,
                        "seed": r.seed,
                        "method": method,
                        "estimand": estimand,
                        "estimate": est.estimate if est else np.nan,
                        "lower": est.lower if est else np.nan,
                        "upper": est.upper if est else np.nan,
                        "failure": r.failures.get(method, ""),
                    })
        return pd.DataFrame.from_records(records)


def run_replication(
    sim_cfg: SimConfig,
    fit_cfg: FitConfig,
    methods,
    n_reps: int,
    parallelism: int = 1,
    *,
    master_seed: int | None = None,
    gee_corr: str = "ar1",
    max_failure_rate: float = 0.05,
) -> ReplicationReport:
    """在稀疏度 T = sim_cfg.mean_obs 下运行 n_reps 个重复；结果与并行度无关。"""
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    methods = tuple(methods)
    master_seed = sim_cfg.seed if master_seed is None else int(master_seed)
    T = float(sim_cfg.mean_obs)
    tasks = [
        ReplicateTask(r, T, derive_seed(master_seed, "replicate", T, r), sim_cfg, fit_cfg, methods, gee_corr)
        for r in range(n_reps)
    ]
    logger.info(f"开始重复实验: T={T}, n_reps={n_reps}, methods={list(methods)}, parallelism={parallelism}")
    results = tuple(run_ordered(run_replicate, tasks, parallelism))
    report = ReplicationReport(T, n_reps, methods, results, master_seed, max_failure_rate=max_failure_rate,
                               config={"sim": sim_cfg.model_dump(mode="json"), "fit": fit_cfg.model_dump(mode="json")})
    for method in methods:
        failed = report.n_failed(method)
        if failed:
            logger.warning(f"T={T} 方法 {method}: {failed}/{n_reps} 个重复失败，已排除")
    if not report.valid:
        logger.error(f"T={T}: 失败重复超过 {max_failure_rate:.0%}，报告无效")
    return report


def run_study(cfg: RunConfig, parallelism: int | None = None) -> list[ReplicationReport]:
    """按 sparsity_levels 逐个稀疏度运行；默认使用缩短的链长度。"""
    study = cfg.study
    n_reps = study.n_reps
    fit_cfg = cfg.fit
    if study.full_scale:
        n_reps = FULL_SCALE_REPS
        logger.warning(f"full_scale 模式: 每个稀疏度 {FULL_SCALE_REPS} 个重复、完整链长度，运行时间可能以天计")
    else:
        fit_cfg = fit_cfg.model_copy(update={
            "chain": fit_cfg.chain.model_copy(update={"n_iter": study.n_iter, "n_burn": study.n_burn})
        })
    reports = []
    for T in study.sparsity_levels:
        sim_cfg = cfg.sim.model_copy(update={"mean_obs": T})
        reports.append(run_replication(
            sim_cfg, fit_cfg, study.methods, n_reps, parallelism or cfg.threads,
            master_seed=cfg.seed, gee_corr=study.gee_corr, max_failure_rate=study.max_failure_rate,
        ))
    return reports


@dataclass(frozen=True, eq=False)
class ReportTable:
    long: pd.DataFrame
    wide: pd.DataFrame


def report_table(reports) -> ReportTable:
    """
    长表（CSV 模式）与宽表（每方法一行、按稀疏度分组、TE/ACME 各 3 个指标列）。
    接受 ReplicationReport 列表或已读回的长表 DataFrame。
    """
    if isinstance(reports, pd.DataFrame):
        long = reports[REPORT_COLUMNS].copy()
    else:
        frames = [r.to_frame() for r in reports]
        long = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=REPORT_COLUMNS)
    rows = []
    for (T, method), block in long.groupby(["sparsity_T", "method"], sort=False):
        row = {"sparsity_T": T, "method": METHOD_LABELS.get(method, method)}
        for estimand in ESTIMANDS:
            cell = block[block["estimand"] == estimand]
            for metric in ("abs_bias", "rmse", "coverage"):
                row[f"{estimand}_{metric}"] = float(cell[metric].iloc[0]) if len(cell) else np.nan
        rows.append(row)
    wide = pd.DataFrame(rows, columns=["sparsity_T", "method"] + [
        f"{e}_{m}" for e in ESTIMANDS for m in ("abs_bias", "rmse", "coverage")
    ])
    return ReportTable(long, wide)


__all__ = [
    "ESTIMANDS",
    "REPORT_COLUMNS",
    "IntervalEstimate",
    "ReplicateTask",
    "ReplicateResult",
    "MetricCell",
    "ReplicationReport",
    "run_replicate",
    "compute_metrics",
    "run_replication",
    "run_study",
    "ReportTable",
    "report_table",
]
