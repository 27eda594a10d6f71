import io
import math

import pandas as pd
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from domain.chain_diagnostics import ChainReport


def _fmt(value, pct: bool = False) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return f"{value * 100:.1f}%" if pct else f"{value:.3f}"


class ReportView:
    """终端渲染：重复实验报告、效应摘要、链诊断。"""

    def __init__(self, console: Console | None = None):
        self.console = console or Console()

    def report_tables(self, wide: pd.DataFrame) -> list[Table]:
        tables = []
        for T, block in wide.groupby("sparsity_T", sort=False):
            table = Table(title=f"T = {T:g}", border_style="blue")
            table.add_column("方法", style="cyan")
            for estimand in ("TE", "ACME"):
                table.add_column(f"{estimand} |bias|", justify="right")
                table.add_column(f"{estimand} RMSE", justify="right")
                table.add_column(f"{estimand} 覆盖率", justify="right")
            for _, row in block.iterrows():
                table.add_row(
                    str(row["method"]),
                    *(_fmt(row[f"{e}_{m}"], pct=(m == "coverage"))
                      for e in ("te", "acme") for m in ("abs_bias", "rmse", "coverage")),
                )
            tables.append(table)
        return tables

    def show_report(self, wide: pd.DataFrame) -> None:
        for table in self.report_tables(wide):
            self.console.print(table)

    def show_effects(self, summary: dict) -> None:
        table = Table(title="积分效应（95% 可信区间）", border_style="green")
        table.add_column("效应", style="cyan")
        table.add_column("均值", justify="right")
        table.add_column("下限", justify="right")
        table.add_column("上限", justify="right")
        for name, s in summary["integrated"].items():
            table.add_row(name, _fmt(s["mean"]), _fmt(s["lower"]), _fmt(s["upper"]))
        gamma = summary["gamma"]
        table.add_row("γ", _fmt(gamma["mean"]), _fmt(gamma["lower"]), _fmt(gamma["upper"]))
        self.console.print(table)
        comps = summary["n_components"]
        self.console.print(f"[dim]主成分: 中介 R={comps['mediator']}, 结局 S={comps['outcome']}; "
                           f"保留抽样 {summary['n_draws']}[/dim]")

    def show_diagnostics(self, report: ChainReport) -> None:
        if report.warning:
            body = "PSRF > 1.1: " + ", ".join(report.flagged)
            self.console.print(Panel(body, title=f"[bold yellow]{report.stage} 链未充分收敛[/bold yellow]",
                                     border_style="yellow"))
        else:
            self.console.print(f"[green]✓ {report.stage} 链诊断通过 ({report.n_draws} draws)[/green]")

    def export_text(self, wide: pd.DataFrame) -> str:
        """对齐文本（无颜色），写入 report.txt。"""
        console = Console(record=True, width=120, color_system=None, file=io.StringIO())
        for table in self.report_tables(wide):
            console.print(table)
        return console.export_text()


__all__ = ["ReportView"]
