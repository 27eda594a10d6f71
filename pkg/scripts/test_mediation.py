"""
效应曲线测试：手工构造的后验抽样给出解析可算的 ACME / TE / ANDE，
外加符号不变性、积分、轨迹与一次端到端短链拟合。
"""

from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

_ROOT = Path(__file__).resolve().parents[1]
if str(_ROOT) not in sys.path:
    sys.path.insert(0, str(_ROOT))

from core.errors import DataValidationError, DomainError, InsufficientDataError, SubjectNotFoundError  # noqa: E402
from core.run_config import FitConfig  # noqa: E402
from domain.data_model import Dataset  # noqa: E402
from domain.fpca_mcmc import FpcaDraws  # noqa: E402
from domain.mediation import (  # noqa: E402
    EffectCurve,
    MediationFit,
    acme_curve,
    ande_curve,
    effect_curves,
    fit_mediation,
    fit_summary,
    impute_trajectories,
    integrate_effect,
    score_summary,
    te_curve,
)
from domain.splines import SplineBasis  # noqa: E402
from scripts.helpers import short_chain, small_sim, tiny_dataset  # noqa: E402

BASIS = SplineBasis(np.array([0.25, 0.5, 0.75]), grid_size=30)
GRID = np.linspace(0.0, 1.0, 201)
CONST = np.eye(BASIS.dim)[0]
LINEAR = np.eye(BASIS.dim)[1]


def _draws(stage, coeffs, group_means, covariate_names=(), reg=None) -> FpcaDraws:
    coeffs = np.asarray(coeffs, dtype=float)
    D, R, _ = coeffs.shape
    p = len(covariate_names)
    return FpcaDraws(
        stage=stage, basis=BASIS, ids=("a", "b"), z=np.array([0, 1]), covariate_names=tuple(covariate_names),
        mean_covariates=np.zeros((2, p)), basis_coeffs=coeffs, scores=np.ones((D, 2, R)),
        group_means=np.asarray(group_means, dtype=float), score_vars=np.ones((D, R)), noise_var=np.ones(D),
        reg_coeffs=np.zeros((D, p)) if reg is None else np.asarray(reg, dtype=float),
        smoothness=np.ones((D, R)), deltas=np.ones((D, R)), chi_deltas=np.ones((D, R)),
        shrink_shapes=np.ones((D, 4)), fitted_mean_obs=np.zeros(0), mh_acceptance=np.zeros(4),
        n_iter=D, n_burn=0, thin=1,
    )


def _analytic_fit() -> MediationFit:
    # 中介: Σ(χ1-χ0)ψ = 1.0·1 + 0.5·t；结局直接效应 0.3；γ = 2
    mediator = _draws("mediator", [[CONST, LINEAR]], [[[0.2, -0.1], [1.2, 0.4]]])
    outcome = _draws("outcome", [[CONST]], [[[0.1], [0.4]]], ("mediator",), [[2.0]])
    return MediationFit(mediator, outcome, GRID, FitConfig(), seed=0)


def test_effect_curves_match_closed_form() -> None:
    fit = _analytic_fit()
    np.testing.assert_allclose(acme_curve(fit).mean, 2.0 + GRID, atol=1e-12)
    np.testing.assert_allclose(te_curve(fit).mean, 2.3 + GRID, atol=1e-12)
    np.testing.assert_allclose(ande_curve(fit).mean, np.full_like(GRID, 0.3), atol=1e-12)
    assert integrate_effect(acme_curve(fit)).mean == pytest.approx(2.5, abs=1e-12)
    assert integrate_effect(te_curve(fit)).mean == pytest.approx(2.8, abs=1e-12)


def test_decomposition_holds_per_draw() -> None:
    rng = np.random.default_rng(0)
    D = 7
    mediator = _draws("mediator", rng.normal(size=(D, 2, BASIS.dim)), rng.normal(size=(D, 2, 2)))
    outcome = _draws("outcome", rng.normal(size=(D, 3, BASIS.dim)), rng.normal(size=(D, 2, 3)),
                     ("x1", "mediator"), rng.normal(size=(D, 2)))
    fit = MediationFit(mediator, outcome, GRID, FitConfig(), seed=0)
    curves = effect_curves(fit)
    np.testing.assert_allclose(curves["te"].draws, curves["ande"].draws + curves["acme"].draws, atol=1e-12)
    np.testing.assert_allclose(fit.gamma, outcome.reg_coeffs[:, 1])


def test_curves_invariant_to_component_sign() -> None:
    coeffs = np.array([[CONST + 0.3 * LINEAR, LINEAR]])
    means = np.array([[[0.1, 0.2], [0.7, -0.4]]])
    flipped = coeffs.copy()
    flipped[0, 0] *= -1
    flipped_means = means.copy()
    flipped_means[0, :, 0] *= -1
    mediator = _draws("mediator", np.concatenate([coeffs, flipped]), np.concatenate([means, flipped_means]))
    outcome = _draws("outcome", [[CONST], [CONST]], [[[0.0], [0.5]], [[0.0], [0.5]]], ("mediator",), [[1.5], [1.5]])
    acme = acme_curve(MediationFit(mediator, outcome, GRID, FitConfig(), seed=0))
    np.testing.assert_allclose(acme.draws[0], acme.draws[1], atol=1e-12)
    np.testing.assert_allclose(acme.lower, acme.upper, atol=1e-12)


def test_integrate_known_functions() -> None:
    assert integrate_effect(EffectCurve("c", GRID, np.full((1, 201), 3.0))).mean == pytest.approx(3.0, abs=1e-12)
    assert integrate_effect(EffectCurve("l", GRID, GRID[None, :])).mean == pytest.approx(0.5, abs=1e-12)
    sin = integrate_effect(EffectCurve("s", GRID, np.sin(np.pi * GRID)[None, :]))
    assert sin.mean == pytest.approx(2.0 / np.pi, abs=1e-4)
    full = integrate_effect(EffectCurve("s2", GRID, np.sin(2 * np.pi * GRID)[None, :]))
    assert full.mean == pytest.approx(0.0, abs=1e-4)


def test_band_contains_mean() -> None:
    draws = np.vstack([np.zeros(5), np.zeros(5), np.full(5, 100.0)])
    curve = EffectCurve("skew", np.linspace(0, 1, 5), draws)
    assert np.all(curve.lower <= curve.mean) and np.all(curve.mean <= curve.upper)
    summary = integrate_effect(curve)
    assert summary.covers(summary.mean)


def test_curve_errors() -> None:
    with pytest.raises(DomainError):
        EffectCurve("short", np.linspace(0, 0.5, 11), np.ones((2, 11))).integral_draws
    with pytest.raises(DomainError):
        EffectCurve("bad", GRID, np.ones((2, 10)))
    with pytest.raises(InsufficientDataError):
        EffectCurve("empty", GRID, np.zeros((0, 201)))
    fit = _analytic_fit()
    with pytest.raises(InsufficientDataError):
        MediationFit(fit.mediator_draws, replace(fit.outcome_draws, basis_coeffs=np.zeros((2, 1, BASIS.dim))),
                     GRID, FitConfig(), seed=0)


def test_trajectories_and_scores() -> None:
    fit = _analytic_fit()
    bands = impute_trajectories(fit, ["a"], models=("mediator",))
    np.testing.assert_allclose(bands["a"]["mediator"].mean, 1.0 + GRID, atol=1e-12)
    assert bands["a"]["mediator"].mean_width == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(SubjectNotFoundError):
        impute_trajectories(fit, ["zz"])
    frame = score_summary(fit, "mediator")
    assert list(frame.columns) == ["id", "z", "score_1", "score_2"]
    assert frame["id"].tolist() == ["a", "b"]


def test_fit_mediation_short_chain_is_reproducible() -> None:
    ds = small_sim(n_subjects=30, mean_obs=8.0, seed=4)
    cfg = FitConfig(chain=short_chain(), truncation="fixed", report_grid_size=51)
    a = fit_mediation(ds, cfg, seed=5)
    b = fit_mediation(ds, cfg, seed=5)
    assert a.n_draws == cfg.chain.n_draws
    assert a.grid.shape == (51,)
    np.testing.assert_array_equal(te_curve(a).draws, te_curve(b).draws)
    summary = fit_summary(a)
    assert set(summary["integrated"]) == {"te", "acme", "ande", "mediator_effect"}
    assert summary["n_components"] == {"mediator": 2, "outcome": 2}
    assert summary["mediator_plugin"] == "posterior_mean"


def test_fit_mediation_pilot_selects_components() -> None:
    ds = small_sim(n_subjects=30, mean_obs=8.0, seed=6)
    cfg = FitConfig(chain=short_chain(), pilot_components=3, pilot_iter=20, pilot_burn=10,
                    mediator_plugin="observed", report_grid_size=21)
    fit = fit_mediation(ds, cfg, seed=1)
    assert 1 <= fit.mediator_draws.n_components <= 3
    assert 1 <= fit.outcome_draws.n_components <= 3


def test_fit_mediation_rejects_single_arm() -> None:
    ds = tiny_dataset(n_subjects=6, n_obs=5)
    one_arm = Dataset(tuple(replace(s, z=0) for s in ds.subjects), ds.covariate_names)
    with pytest.raises(DataValidationError) as info:
        fit_mediation(one_arm, FitConfig(chain=short_chain(), truncation="fixed"))
    assert "treatment arm empty" in str(info.value)


def main() -> int:
    test_effect_curves_match_closed_form()
    test_decomposition_holds_per_draw()
    test_curves_invariant_to_component_sign()
    test_integrate_known_functions()
    test_band_contains_mean()
    test_curve_errors()
    test_trajectories_and_scores()
    test_fit_mediation_short_chain_is_reproducible()
    test_fit_mediation_pilot_selects_components()
    test_fit_mediation_rejects_single_arm()
    print("mediation: OK")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
