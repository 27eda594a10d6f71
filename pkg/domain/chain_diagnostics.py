"""单链收敛诊断：每个标量参数的有效样本量与 split-chain PSRF。"""

from __future__ import annotations

from dataclasses import dataclass, field

import arviz as az
import numpy as np
from loguru import logger

from domain.fpca_mcmc import FpcaDraws

PSRF_THRESHOLD = 1.1
MIN_DRAWS = 4


@dataclass(frozen=True)
class ScalarDiagnostic:
    name: str
    ess: float
    psrf: float
    degenerate: bool = False

    @property
    def flagged(self) -> bool:
        return self.degenerate or not np.isfinite(self.psrf) or self.psrf > PSRF_THRESHOLD

    def to_dict(self) -> dict:
        return {
            "ess": None if not np.isfinite(self.ess) else round(float(self.ess), 3),
            "psrf": None if not np.isfinite(self.psrf) else round(float(self.psrf), 5),
            "degenerate": self.degenerate,
            "flagged": self.flagged,
        }


@dataclass(frozen=True)
class ChainReport:
    stage: str
    n_draws: int
    scalars: dict[str, ScalarDiagnostic] = field(default_factory=dict)

    @property
    def flagged(self) -> list[str]:
        return [name for name, d in self.scalars.items() if d.flagged and not d.degenerate]

    @property
    def degenerate(self) -> list[str]:
        return [name for name, d in self.scalars.items() if d.degenerate]

    @property
    def warning(self) -> bool:
        return bool(self.flagged)

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "n_draws": self.n_draws,
            "psrf_threshold": PSRF_THRESHOLD,
            "flagged": self.flagged,
            "degenerate": self.degenerate,
            "scalars": {k: v.to_dict() for k, v in self.scalars.items()},
        }


def scalar_diagnostic(name: str, trace: np.ndarray) -> ScalarDiagnostic:
    trace = np.asarray(trace, dtype=float).ravel()
    if len(trace) < MIN_DRAWS or np.ptp(trace) == 0.0:
        return ScalarDiagnostic(name, float("nan"), float("nan"), degenerate=True)
    ary = trace[None, :]
    ess = float(az.ess(ary))
    psrf = float(az.rhat(ary, method="split"))
    return ScalarDiagnostic(name, ess, psrf)


def diagnostics(draws: FpcaDraws) -> ChainReport:
    scalars = {name: scalar_diagnostic(name, trace) for name, trace in draws.scalar_traces().items()}
    report = ChainReport(draws.stage, draws.n_draws, scalars)
    if report.flagged:
        logger.warning(f"[{draws.stage}] PSRF > {PSRF_THRESHOLD}: {', '.join(report.flagged)}")
    if report.degenerate:
        logger.debug(f"[{draws.stage}] 退化（常数或过短）轨迹: {', '.join(report.degenerate)}")
    return report


__all__ = ["PSRF_THRESHOLD", "ScalarDiagnostic", "ChainReport", "scalar_diagnostic", "diagnostics"]
