"""
满条件分布的联合分布检验：交替“由参数模拟数据 / 由数据更新参数”，
被更新参数的平稳分布必须回到其先验。

单块检验各自只更新一个参数块；联合检验在 N=10、R=1、L=3 的小问题上
依次执行得分、组均值、回归、方差四步，与直接由先验抽样的结果做秩检验。
特征函数一步（抽样后单位化并按范数缩放得分）不保持 (p, ζ) 的先验，
不参与联合检验，由 test_fpca_mcmc 中的逐项检验覆盖。
"""

from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy import stats

_ROOT = Path(__file__).resolve().parents[1]
if str(_ROOT) not in sys.path:
    sys.path.insert(0, str(_ROOT))

import domain.fpca_mcmc as fm  # noqa: E402
from domain.splines import SplineBasis  # noqa: E402
from scripts.helpers import short_chain, tiny_dataset  # noqa: E402

N_ITER = 6000
THIN = 10


def _setup(**overrides):
    ds = tiny_dataset(n_subjects=4, n_obs=2, n_cov=0, seed=3)
    cfg = short_chain(n_components=1, n_knots=1, sample_shapes=False, **overrides)
    basis = SplineBasis.from_times(ds.stacked()["times"], cfg.n_knots, cfg.grid_size)
    data = fm.prepare_chain_data(ds, fm.ResponseDesign.for_mediator(ds), basis)
    return cfg, data, fm.init_state(data, cfg)


def test_noise_precision_returns_to_prior() -> None:
    cfg, data, state = _setup(noise_prior_shape=2.0, noise_prior_rate=1.0)
    rng = np.random.default_rng(2024)
    state.noise_var = 1.0 / rng.gamma(2.0, 1.0)
    fitted = np.sum((data.basis_obs @ state.basis_coeffs.T) * state.scores[data.sid], axis=1)
    kept = []
    for it in range(N_ITER):
        y = fitted + np.sqrt(state.noise_var) * rng.standard_normal(data.n_obs)
        sim = replace(data, y=y)
        # 只保留 σ 的更新：其余参数在此检验中固定
        frozen = state.copy()
        fm.sweep_variances(state, sim, cfg, rng)
        noise_var = state.noise_var
        state = frozen
        state.noise_var = noise_var
        if it % THIN == 0:
            kept.append(1.0 / noise_var)
    kept = np.array(kept)
    assert abs(kept.mean() - 2.0) < 0.3
    assert stats.kstest(kept, stats.gamma(a=2.0, scale=1.0).cdf).pvalue > 0.001


def test_group_means_return_to_prior() -> None:
    cfg, data, state = _setup()
    rng = np.random.default_rng(7)
    sd = float(np.sqrt(state.chi_vars[0]))
    state.group_means = rng.normal(0.0, sd, (2, 1))
    kept = []
    for it in range(N_ITER):
        scale = np.sqrt(state.score_vars / state.mix_weights)
        state.scores = state.group_means[data.z] + scale * rng.standard_normal(state.scores.shape)
        fm.sweep_group_means(state, data, cfg, rng)
        if it % THIN == 0:
            kept.append(state.group_means[:, 0].copy())
    kept = np.array(kept)
    for arm in (0, 1):
        assert stats.kstest(kept[:, arm], stats.norm(scale=sd).cdf).pvalue > 0.001


def test_score_precision_returns_to_prior() -> None:
    cfg, data, state = _setup()
    rng = np.random.default_rng(11)
    v = cfg.t_mixing_dof
    # h 取上界，δ 的截断下界 1/h 可以忽略
    state.smoothness = np.full(1, cfg.h_upper)
    state.deltas = rng.gamma(2.0, 1.0, 1)
    state.score_vars = 1.0 / np.cumprod(state.deltas)
    state.mix_weights = rng.gamma(v / 2.0, 2.0 / v, state.mix_weights.shape)
    kept = []
    for it in range(N_ITER):
        scale = np.sqrt(state.score_vars / state.mix_weights)
        state.scores = state.group_means[data.z] + scale * rng.standard_normal(state.scores.shape)
        fm.sweep_variances(state, data, cfg, rng)
        if it % THIN == 0:
            kept.append(state.deltas[0])
    assert stats.kstest(np.array(kept), stats.gamma(a=2.0, scale=1.0).cdf).pvalue > 0.001


JOINT_ITER = 40_000
JOINT_THIN = 40
JOINT_PRIOR_DRAWS = 2000


def _draw_from_prior(state, data, cfg, rng):
    """按模型先验抽全部参数（ψ 固定、h 取上界，形状参数固定）。"""
    a1, _, a_chi1, _ = state.shrink_shapes
    v = cfg.t_mixing_dof
    state.noise_var = 1.0 / rng.gamma(cfg.noise_prior_shape, 1.0 / cfg.noise_prior_rate)
    state.chi_deltas = rng.gamma(a_chi1, 1.0, 1)
    state.group_means = rng.normal(0.0, 1.0 / np.sqrt(state.chi_deltas[0]), (2, 1))
    state.deltas = rng.gamma(a1, 1.0, 1)
    state.score_vars = 1.0 / state.deltas
    state.smoothness = np.full(1, cfg.h_upper)
    state.mix_weights = rng.gamma(v / 2.0, 2.0 / v, state.mix_weights.shape)
    scale = np.sqrt(state.score_vars / state.mix_weights)
    state.scores = state.group_means[data.z] + scale * rng.standard_normal(state.scores.shape)
    state.reg_coeffs = rng.normal(0.0, cfg.prior_sd_beta, data.p)
    return state


def _joint_statistics(state) -> tuple[float, float, float]:
    return float(state.group_means[1, 0]), 1.0 / state.noise_var, float(state.score_vars[0])


def test_joint_sweeps_match_prior_draws() -> None:
    ds = tiny_dataset(n_subjects=10, n_obs=5, n_cov=1, seed=5)
    cfg = short_chain(n_components=1, n_knots=3, sample_shapes=False, noise_prior_shape=2.0, noise_prior_rate=1.0)
    basis = SplineBasis.from_times(ds.stacked()["times"], cfg.n_knots, cfg.grid_size)
    data = fm.prepare_chain_data(ds, fm.ResponseDesign.for_mediator(ds), basis)
    state = fm.init_state(data, cfg)
    rng = np.random.default_rng(31)
    marginal = np.array([_joint_statistics(_draw_from_prior(state.copy(), data, cfg, rng))
                         for _ in range(JOINT_PRIOR_DRAWS)])

    state = _draw_from_prior(state, data, cfg, rng)
    psi_obs = data.basis_obs @ state.basis_coeffs.T
    kept = []
    for it in range(JOINT_ITER):
        mean = data.X @ state.reg_coeffs + np.sum(psi_obs * state.scores[data.sid], axis=1)
        sim = replace(data, y=mean + np.sqrt(state.noise_var) * rng.standard_normal(data.n_obs))
        for sweep in (fm.sweep_scores, fm.sweep_group_means, fm.sweep_regression, fm.sweep_variances):
            state = sweep(state, sim, cfg, rng)
        if it % JOINT_THIN == 0:
            kept.append(_joint_statistics(state))
    kept = np.array(kept)
    for k, name in enumerate(("chi1_1", "noise_precision", "score_var_1")):
        p = stats.mannwhitneyu(kept[:, k], marginal[:, k]).pvalue
        assert p > 0.01, (name, p)


def main() -> int:
    test_noise_precision_returns_to_prior()
    test_group_means_return_to_prior()
    test_score_precision_returns_to_prior()
    test_joint_sweeps_match_prior_draws()
    print("getting_it_right: OK")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
