"""
长时间运行的验收检查（不属于 pytest 套件）。

  python -m scripts.run_acceptance truth
  python -m scripts.run_acceptance recovery [--seed 1]
  python -m scripts.run_acceptance table [--reps 100] [--threads 8]
  python -m scripts.run_acceptance ordering [--reps 50] [--threads 8]
  python -m scripts.run_acceptance determinism

每项检查打印实测值与门限，全部通过时退出码为 0。
"""

from __future__ import annotations

import argparse
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
from loguru import logger
from rich.console import Console
from rich.table import Table
from scipy import integrate

_ROOT = Path(__file__).resolve().parents[1]
if str(_ROOT) not in sys.path:
    sys.path.insert(0, str(_ROOT))

from app import main as cli_main  # noqa: E402
from core.run_config import FitConfig, RunConfig, SimConfig, StudyConfig  # noqa: E402
from domain.mediation import acme_curve, fit_mediation, te_curve  # noqa: E402
from domain.simulate import SimTruth, generate_dataset  # noqa: E402
from domain.study import run_replication, run_study  # noqa: E402

console = Console()


def _verdict(rows: list[tuple[str, float, str, bool]]) -> bool:
    table = Table(title="验收结果", border_style="blue")
    table.add_column("指标", style="cyan")
    table.add_column("实测", justify="right")
    table.add_column("门限")
    table.add_column("结果")
    for name, value, gate, ok in rows:
        table.add_row(name, f"{value:.4f}", gate, "[green]通过[/green]" if ok else "[red]未通过[/red]")
    console.print(table)
    return all(ok for *_, ok in rows)


def check_truth() -> bool:
    grid = np.linspace(0.0, 1.0, 201)
    acme = float(integrate.trapezoid(SimTruth.acme_curve(grid), grid))
    te = float(integrate.trapezoid(SimTruth.te_curve(grid), grid))
    return _verdict([
        ("∫ACME", acme, "|x - 1.20| < 1e-3", abs(acme - 1.2) < 1e-3),
        ("∫TE", te, "|x - 2.7667| < 1e-3", abs(te - 2.7667) < 1e-3),
    ])


def check_recovery(seed: int) -> bool:
    ds, _ = generate_dataset(SimConfig(n_subjects=200, mean_obs=50.0), np.random.default_rng(seed))
    fit = fit_mediation(ds, FitConfig(), seed=seed)
    rows = []
    for name, curve, truth in (("TE", te_curve(fit), SimTruth.te_curve(fit.grid)),
                               ("ACME", acme_curve(fit), SimTruth.acme_curve(fit.grid))):
        covered = float(np.mean((curve.lower <= truth) & (truth <= curve.upper)))
        rows.append((f"{name} 带覆盖的网格比例", covered, ">= 0.90", covered >= 0.9))
    return _verdict(rows)


def check_table(n_reps: int, threads: int) -> bool:
    cfg = RunConfig(study=StudyConfig(n_reps=n_reps, sparsity_levels=[25.0], methods=["mfpca"]), threads=threads)
    report = run_study(cfg)[0]
    cell = report.metrics("mfpca", "te")
    return _verdict([
        ("TE abs_bias", cell.abs_bias, "[0.05, 0.15]", 0.05 <= cell.abs_bias <= 0.15),
        ("TE rmse", cell.rmse, "[0.08, 0.20]", 0.08 <= cell.rmse <= 0.20),
        ("TE coverage", cell.coverage, ">= 0.85", cell.coverage >= 0.85),
        ("报告有效", float(report.valid), "= 1", report.valid),
    ])


def check_ordering(n_reps: int, threads: int) -> bool:
    base = RunConfig()
    fit_cfg = base.fit.model_copy(update={
        "chain": base.fit.chain.model_copy(update={"n_iter": base.study.n_iter, "n_burn": base.study.n_burn})
    })
    report = run_replication(base.sim.model_copy(update={"mean_obs": 15.0}), fit_cfg, ["mfpca", "gee"],
                             n_reps, threads, master_seed=base.seed)
    mfpca = report.metrics("mfpca", "acme").abs_bias
    gee = report.metrics("gee", "acme").abs_bias
    return _verdict([
        ("MFPCA ACME abs_bias", mfpca, "-", True),
        ("GEE ACME abs_bias", gee, ">= 2 × MFPCA", gee >= 2 * mfpca),
    ])


def check_determinism() -> bool:
    with tempfile.TemporaryDirectory() as tmp:
        outputs = {}
        for threads in (1, 4):
            cfg_path = Path(tmp) / f"cfg_{threads}.json"
            cfg_path.write_text(RunConfig(
                seed=99, threads=threads, sim=SimConfig(n_subjects=60),
                study=StudyConfig(n_reps=4, sparsity_levels=[10.0], methods=["gee"]),
            ).model_dump_json(by_alias=True), encoding="utf-8")
            out = Path(tmp) / f"out_{threads}"
            cli_main(["simulate", "-c", str(cfg_path), "-o", str(out)], environ={})
            cli_main(["replicate", "-c", str(cfg_path), "-o", str(out)], environ={})
            outputs[threads] = ((out / "dataset.csv").read_bytes(), (out / "report.csv").read_bytes())
    same = outputs[1] == outputs[4]
    return _verdict([("CSV 逐字节一致 (threads 1 vs 4)", float(same), "= 1", same)])


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="medfpca 验收检查")
    parser.add_argument("check", choices=["truth", "recovery", "table", "ordering", "determinism"])
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--reps", type=int, default=None)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    t0 = time.perf_counter()
    if args.check == "truth":
        ok = check_truth()
    elif args.check == "recovery":
        ok = check_recovery(args.seed)
    elif args.check == "table":
        ok = check_table(args.reps or 100, args.threads)
    elif args.check == "ordering":
        ok = check_ordering(args.reps or 50, args.threads)
    else:
        ok = check_determinism()
    logger.info(f"验收检查 {args.check} 用时 {time.perf_counter() - t0:.1f}s")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
