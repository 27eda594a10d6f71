import argparse
import os
import sys
import time
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version

import numpy as np
import pandas as pd
from loguru import logger
from rich.console import Console

from core.config_manager import ConfigManager
from core.errors import MedFpcaError
from core.run_config import RunConfig
from core.seed_service import derive_seed, make_rng
from domain.chain_diagnostics import diagnostics
from domain.data_model import load_dataset, write_dataset
from domain.mediation import effect_curves, fit_mediation, fit_summary, score_summary
from domain.simulate import generate_dataset, truth_curves
from domain.study import report_table, run_study
from exception_handler import ExceptionHandler
from infra import csv_store
from ui.report_view import ReportView

EXIT_OK = 0
EXIT_IO = 3
EXIT_NUMERICAL = 4


def package_version() -> str:
    try:
        return version("medfpca")
    except PackageNotFoundError:
        return "0.1.0"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class MedFpcaApp:
    """medfpca 主应用类（组合根）：配置 → 领域计算 → 产物写出。"""

    def __init__(self, cfg: RunConfig | None = None, output_dir: str | None = None,
                 console: Console | None = None, *, log_to_file: bool = True):
        self.cfg = cfg or RunConfig()
        self.output_dir = output_dir or self.cfg.io.output_dir
        self.console = console or Console()
        self.config = ConfigManager(self.output_dir, log_to_file=log_to_file)
        self.view = ReportView(self.console)
        self._started_at = _now()
        self._t0 = time.perf_counter()

    def close(self) -> None:
        self.config.close()

    def _path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def _write_manifest(self, command: str, outputs: dict, **extra) -> str:
        manifest = {
            "command": command,
            "config": self.config.resolved_settings(self.cfg),
            "seed": self.cfg.seed,
            "threads": self.cfg.threads,
            "version": package_version(),
            "started_at": self._started_at,
            "finished_at": _now(),
            "wall_time_s": round(time.perf_counter() - self._t0, 3),
            "outputs": outputs,
            **extra,
        }
        path = self._path("manifest.json")
        csv_store.write_json(path, manifest)
        return path

    def simulate(self) -> int:
        """写出模拟数据集 CSV 与真值 JSON。"""
        sim = self.cfg.sim
        ds, truth = generate_dataset(sim, make_rng(self.cfg.seed, "simulate"))
        outputs = {"dataset": self._path("dataset.csv"), "truth": self._path("truth.json"),
                   "truth_curves": self._path("truth_curves.csv")}
        write_dataset(ds, outputs["dataset"], self.cfg.io.columns)
        csv_store.write_json(outputs["truth"], {**truth.to_dict(), "sim": sim.model_dump(mode="json"),
                                                "seed": self.cfg.seed})
        grid = np.linspace(0.0, 1.0, self.cfg.fit.report_grid_size)
        truth_curves(grid).to_csv(outputs["truth_curves"], index=False, float_format=csv_store.FLOAT_FORMAT,
                                  lineterminator="\n")
        self._write_manifest("simulate", outputs, n_subjects=ds.n_subjects, n_obs=ds.n_obs)
        self.console.print(f"[bold green]✓ 已生成 {ds.n_subjects} 个个体 / {ds.n_obs} 个观测 → "
                           f"{outputs['dataset']}[/bold green]")
        return EXIT_OK

    def fit(self, data_path: str) -> int:
        """拟合中介分析并写出效应曲线、积分摘要、诊断与 manifest。"""
        io_cfg = self.cfg.io
        ds = load_dataset(data_path, io_cfg.columns, io_cfg.transform)
        fit = fit_mediation(ds, self.cfg.fit, seed=derive_seed(self.cfg.seed, "fit"))

        curves = effect_curves(fit)
        outputs = csv_store.write_curves(curves, self.output_dir)
        summary = fit_summary(fit, curves)
        outputs["effects"] = self._path("effects.json")
        csv_store.write_json(outputs["effects"], {**summary, "config": self.cfg.fit.model_dump(mode="json")})

        reports = {name: diagnostics(fit.draws_for(name)) for name in ("mediator", "outcome")}
        outputs["diagnostics"] = self._path("diagnostics.json")
        csv_store.write_json(outputs["diagnostics"], {k: r.to_dict() for k, r in reports.items()})
        for name in ("mediator", "outcome"):
            outputs[f"draws_{name}"] = self._path(f"draws_{name}.csv")
            csv_store.write_draws(fit.draws_for(name), outputs[f"draws_{name}"])
            outputs[f"scores_{name}"] = self._path(f"scores_{name}.csv")
            csv_store.write_score_summary(score_summary(fit, name), outputs[f"scores_{name}"])
        if io_cfg.write_trajectories:
            outputs["trajectories"] = self._path("trajectories.csv")
            csv_store.write_trajectories(fit, outputs["trajectories"])

        warning = any(r.warning for r in reports.values())
        self._write_manifest("fit", outputs, dataset=os.path.abspath(data_path), warning=warning,
                             flagged={k: r.flagged for k, r in reports.items()},
                             basis=summary["basis"], mh_acceptance=summary["mh_acceptance"])
        self.view.show_effects(summary)
        for r in reports.values():
            self.view.show_diagnostics(r)
        return EXIT_OK

    def replicate(self) -> int:
        """重复模拟实验：report.csv / report.txt / replicates.csv / manifest。"""
        reports = run_study(self.cfg)
        table = report_table(reports)
        outputs = {"report": self._path("report.csv"), "report_text": self._path("report.txt"),
                   "replicates": self._path("replicates.csv")}
        csv_store.write_report(table.long, outputs["report"])
        with open(outputs["report_text"], "w", encoding="utf-8") as f:
            f.write(self.view.export_text(table.wide))
        estimates = [r.estimates_frame() for r in reports]
        if estimates:
            pd.concat(estimates, ignore_index=True).to_csv(
                outputs["replicates"], index=False, float_format=csv_store.FLOAT_FORMAT, lineterminator="\n")
        valid = all(r.valid for r in reports)
        self._write_manifest("replicate", outputs, valid=valid,
                             n_failed={f"{r.sparsity_T:g}": {m: r.n_failed(m) for m in r.methods} for r in reports})
        self.view.show_report(table.wide)
        if not valid:
            self.console.print("[red]失败重复比例超过上限，报告无效[/red]")
            return EXIT_NUMERICAL
        return EXIT_OK


def show_report_file(report_path: str, console: Console) -> int:
    table = report_table(csv_store.read_report(report_path))
    ReportView(console).show_report(table.wide)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="medfpca", description="纵向稀疏数据的函数型因果中介分析")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("-c", "--config", help="JSON 运行配置（缺省使用内置默认值）")
        p.add_argument("-o", "--output", help="输出目录（覆盖 io.output_dir）")

    add_common(sub.add_parser("simulate", help="生成模拟数据集与真值"))
    p_fit = sub.add_parser("fit", help="拟合中介/结局模型并计算效应曲线")
    add_common(p_fit)
    p_fit.add_argument("-d", "--data", required=True, help="长格式 CSV 数据集")
    add_common(sub.add_parser("replicate", help="运行重复模拟实验"))
    p_report = sub.add_parser("report", help="显示已有的报告 CSV")
    p_report.add_argument("-i", "--input", required=True, help="report.csv")
    return parser


def _load_config(path: str | None, environ=None) -> RunConfig:
    if not path:
        return ConfigManager.validate({}, environ)
    return ConfigManager.validate(ConfigManager.read_json(path), environ)


def main(argv: list[str] | None = None, environ: dict[str, str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    console = Console()
    output_dir = getattr(args, "output", None)
    app: MedFpcaApp | None = None
    try:
        if args.command == "report":
            return show_report_file(args.input, console)
        cfg = _load_config(args.config, environ)
        app = MedFpcaApp(cfg, output_dir, console)
        logger.info(f"medfpca {args.command} 开始 (seed={cfg.seed}, threads={cfg.threads}, 输出={app.output_dir})")
        if args.command == "simulate":
            return app.simulate()
        if args.command == "fit":
            return app.fit(args.data)
        return app.replicate()
    except MedFpcaError as e:
        console.print(f"[red]错误: {e}[/red]")
        _record(e, args, app, output_dir)
        return e.exit_code
    except OSError as e:
        console.print(f"[red]I/O 错误: {e}[/red]")
        _record(e, args, app, output_dir)
        return EXIT_IO
    finally:
        if app is not None:
            app.close()


def _record(exc: BaseException, args: argparse.Namespace, app: "MedFpcaApp | None", output_dir: str | None) -> None:
    base = app.output_dir if app is not None else output_dir
    if not base:
        return
    try:
        ExceptionHandler(base).log_exception(exc, context={"command": args.command, "argv": sys.argv[1:]})
    except OSError:
        pass


if __name__ == "__main__":
    sys.exit(main())
