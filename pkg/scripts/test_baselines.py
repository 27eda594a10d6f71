"""GEE 基线测试。"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import statsmodels.api as sm

_ROOT = Path(__file__).resolve().parents[1]
if str(_ROOT) not in sys.path:
    sys.path.insert(0, str(_ROOT))

from core.errors import RankDeficiencyError  # noqa: E402
from domain.baselines import GeeFit, fit_gee, gee_mediation, product_estimates  # noqa: E402
from domain.data_model import Dataset, SubjectSeries  # noqa: E402
from scripts.helpers import small_sim  # noqa: E402


def test_independence_matches_ols() -> None:
    ds = small_sim(n_subjects=30, mean_obs=6.0, seed=2)
    fit = fit_gee(ds, "outcome", corr="independence")
    stacked = ds.stacked()
    X = np.column_stack([np.ones(ds.n_obs), stacked["covariates"], stacked["z"], stacked["mediator"]])
    ols = sm.OLS(stacked["outcome"], X).fit()
    np.testing.assert_allclose(fit.coefficients.to_numpy(), ols.params, atol=1e-8)
    assert list(fit.coefficients.index) == ["const", "x1", "x2", "x3", "treatment", "mediator"]
    assert fit.rho == 0.0


def test_ar1_fit_reports_correlation() -> None:
    ds = small_sim(n_subjects=40, mean_obs=10.0, seed=3)
    fit = fit_gee(ds, "mediator", corr="ar1")
    assert -1.0 < fit.rho < 1.0
    assert np.all(fit.robust_se > 0)
    assert set(fit.to_dict()) >= {"coefficients", "robust_se", "rho", "converged"}


def _fake_fit(equation: str, coefs: dict, cov: np.ndarray) -> GeeFit:
    names = list(coefs)
    return GeeFit(equation, "ar1", pd.Series(coefs), pd.DataFrame(cov, index=names, columns=names), 0.3, 5, True)


def test_product_estimates() -> None:
    mfit = _fake_fit("mediator", {"const": 0.0, "treatment": 1.5}, np.diag([0.1, 0.04]))
    ofit = _fake_fit("outcome", {"const": 0.0, "treatment": 0.7, "mediator": 2.0},
                     np.array([[0.1, 0.0, 0.0], [0.0, 0.09, 0.01], [0.0, 0.01, 0.0025]]))
    acme, te = product_estimates(mfit, ofit)
    assert acme.estimate == pytest.approx(3.0)
    assert te.estimate == pytest.approx(3.7)
    # Var(acme) = 1.5² · 0.0025 + 2² · 0.04
    assert acme.se == pytest.approx(np.sqrt(1.5**2 * 0.0025 + 4.0 * 0.04))
    # Var(te) = γ² Var(τ_m) + τ_m² Var(γ) + 2 τ_m Cov(γ, τ_y) + Var(τ_y)
    var_te = 4.0 * 0.04 + 1.5**2 * 0.0025 + 2 * 1.5 * 0.01 + 0.09
    assert te.se == pytest.approx(np.sqrt(var_te))
    assert acme.lower == pytest.approx(3.0 - 1.959963984540054 * acme.se)
    assert acme.covers(3.0) and not acme.covers(100.0)


def test_rank_deficient_design() -> None:
    subjects = []
    for i in range(6):
        t = np.linspace(0.1, 0.9, 4)
        subjects.append(SubjectSeries(f"r{i}", i % 2, t, t + i, t * 2, np.ones((4, 1))))
    ds = Dataset(tuple(subjects), ("always_one",))
    with pytest.raises(RankDeficiencyError):
        fit_gee(ds, "mediator", corr="independence")


def test_gee_mediation_intervals() -> None:
    ds = small_sim(n_subjects=60, mean_obs=8.0, seed=4)
    res = gee_mediation(ds, corr="ar1")
    for est in (res.acme, res.te):
        assert np.isfinite(est.estimate) and est.lower < est.estimate < est.upper
    assert res.to_dict()["interval"].startswith("delta-method")


def main() -> int:
    test_independence_matches_ols()
    test_ar1_fit_reports_correlation()
    test_product_estimates()
    test_rank_deficient_design()
    test_gee_mediation_intervals()
    print("baselines: OK")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
