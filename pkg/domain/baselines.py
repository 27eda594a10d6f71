"""
GEE 基线：中介方程与结局方程各拟合一次，系数乘积给出 ACME/TE 点估计，delta 方法给出区间。

  M_ij = β_0 + X_ij'β_m + τ_m Z_i + e
  Y_ij = β_0 + X_ij'β_y + τ_y Z_i + γ M_ij + e
AR(1) 工作相关按个体内观测序号索引（ρ^{|j-j'|}），与观测时间间隔无关。
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np
import pandas as pd
import statsmodels.api as sm
from loguru import logger
from scipy import stats
from statsmodels.tools.sm_exceptions import ConvergenceWarning, IterationLimitWarning

from core.errors import RankDeficiencyError
from domain.data_model import Dataset

Equation = Literal["mediator", "outcome"]
Corr = Literal["independence", "ar1"]
TREATMENT = "treatment"
MEDIATOR = "mediator"


@dataclass(frozen=True, eq=False)
class GeeFit:
    equation: str
    corr: str
    coefficients: pd.Series
    robust_cov: pd.DataFrame
    rho: float
    n_iter_used: int
    converged: bool

    @property
    def robust_se(self) -> pd.Series:
        return pd.Series(np.sqrt(np.clip(np.diag(self.robust_cov), 0.0, None)), index=self.coefficients.index)

    def to_dict(self) -> dict:
        return {
            "equation": self.equation,
            "corr": self.corr,
            "coefficients": {k: float(v) for k, v in self.coefficients.items()},
            "robust_se": {k: float(v) for k, v in self.robust_se.items()},
            "rho": self.rho,
            "n_iter_used": self.n_iter_used,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class PointEstimate:
    estimate: float
    se: float
    lower: float
    upper: float

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "se": self.se, "lower": self.lower, "upper": self.upper}


@dataclass(frozen=True, eq=False)
class GeeMediation:
    acme: PointEstimate
    te: PointEstimate
    mediator_fit: GeeFit
    outcome_fit: GeeFit

    def to_dict(self) -> dict:
        return {
            "acme": self.acme.to_dict(),
            "te": self.te.to_dict(),
            "interval": "delta-method Wald 95%",
            "fits": {"mediator": self.mediator_fit.to_dict(), "outcome": self.outcome_fit.to_dict()},
        }


def _design(ds: Dataset, equation: Equation) -> tuple[np.ndarray, pd.DataFrame, np.ndarray, np.ndarray]:
    stacked = ds.stacked()
    exog = pd.DataFrame(stacked["covariates"], columns=list(ds.covariate_names))
    exog.insert(0, "const", 1.0)
    exog[TREATMENT] = stacked["z"]
    if equation == "outcome":
        exog[MEDIATOR] = stacked["mediator"]
        endog = stacked["outcome"]
    else:
        endog = stacked["mediator"]
    sid = stacked["sid"]
    # 个体内观测序号 0..T_i-1
    starts = np.concatenate([[0], np.cumsum(np.bincount(sid))[:-1]]) if len(sid) else np.zeros(0, dtype=int)
    rank = np.arange(len(sid)) - starts[sid] if len(sid) else np.zeros(0, dtype=int)
    return endog, exog, sid, rank


def fit_gee(
    ds: Dataset,
    equation: Equation = "mediator",
    corr: Corr = "ar1",
    tol: float = 1e-8,
    max_iter: int = 50,
) -> GeeFit:
    endog, exog, groups, rank = _design(ds, equation)
    if np.linalg.matrix_rank(exog.to_numpy()) < exog.shape[1]:
        raise RankDeficiencyError(f"GEE {equation} design is rank deficient: columns {list(exog.columns)}")

    cov_struct = sm.cov_struct.Autoregressive(grid=True) if corr == "ar1" else sm.cov_struct.Independence()
    model = sm.GEE(endog, exog, groups=groups, time=rank, family=sm.families.Gaussian(), cov_struct=cov_struct)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = model.fit(maxiter=max_iter, ctol=tol)
    issues = [w for w in caught if issubclass(w.category, (ConvergenceWarning, IterationLimitWarning))]
    for w in issues:
        logger.warning(f"GEE {equation} ({corr}) 未收敛: {w.message}")
    if result is None:
        raise RankDeficiencyError(f"GEE {equation} covariance is singular")

    names = list(exog.columns)
    coefficients = pd.Series(np.asarray(result.params, dtype=float), index=names)
    robust_cov = pd.DataFrame(np.asarray(result.cov_robust, dtype=float), index=names, columns=names)
    rho = float(np.atleast_1d(model.cov_struct.dep_params)[0]) if corr == "ar1" else 0.0
    return GeeFit(
        equation=equation,
        corr=corr,
        coefficients=coefficients,
        robust_cov=(robust_cov + robust_cov.T) / 2,
        rho=rho,
        n_iter_used=len(result.fit_history.get("params", [])),
        converged=not issues,
    )


def _wald(estimate: float, var: float, level: float = 0.95) -> PointEstimate:
    se = float(np.sqrt(max(var, 0.0)))
    q = float(stats.norm.ppf(0.5 + level / 2))
    return PointEstimate(float(estimate), se, float(estimate - q * se), float(estimate + q * se))


def product_estimates(mediator_fit: GeeFit, outcome_fit: GeeFit) -> tuple[PointEstimate, PointEstimate]:
    """
    acme = γ τ_m，te = acme + τ_y；两个方程视为独立：
      Var(acme) = τ_m² Var(γ) + γ² Var(τ_m)
      Var(te)   = γ² Var(τ_m) + [τ_m, 1] Cov(γ, τ_y) [τ_m, 1]'
    """
    tau_m = float(mediator_fit.coefficients[TREATMENT])
    tau_y = float(outcome_fit.coefficients[TREATMENT])
    gamma = float(outcome_fit.coefficients[MEDIATOR])
    var_tau_m = float(mediator_fit.robust_cov.loc[TREATMENT, TREATMENT])
    cov_out = outcome_fit.robust_cov.loc[[MEDIATOR, TREATMENT], [MEDIATOR, TREATMENT]].to_numpy()

    acme = gamma * tau_m
    var_acme = tau_m**2 * cov_out[0, 0] + gamma**2 * var_tau_m
    grad = np.array([tau_m, 1.0])
    var_te = gamma**2 * var_tau_m + float(grad @ cov_out @ grad)
    return _wald(acme, var_acme), _wald(acme + tau_y, var_te)


def gee_mediation(ds: Dataset, corr: Corr = "ar1", tol: float = 1e-8, max_iter: int = 50) -> GeeMediation:
    mediator_fit = fit_gee(ds, "mediator", corr, tol, max_iter)
    outcome_fit = fit_gee(ds, "outcome", corr, tol, max_iter)
    acme, te = product_estimates(mediator_fit, outcome_fit)
    logger.debug(f"GEE ({corr}): acme={acme.estimate:.4f}±{acme.se:.4f}, te={te.estimate:.4f}±{te.se:.4f}")
    return GeeMediation(acme, te, mediator_fit, outcome_fit)


__all__ = ["GeeFit", "PointEstimate", "GeeMediation", "fit_gee", "product_estimates", "gee_mediation"]
