"""
Bayesian FPCA Gibbs 采样器。

同一套机制通过 ResponseDesign 同时拟合中介模型与结局模型：
结局模型把（插补后的）中介值作为回归设计的最后一列，其系数即同期效应 γ。

每个 sweep 依次执行：
  1. 特征函数系数 p_r（正交约束下的高斯抽样，随后单位化并补偿得分）与平滑参数 h_r
  2. 主成分得分 ζ_{i,r}
  3. 组均值 χ_0, χ_1
  4. 回归系数 β
  5. 方差/精度：σ^{-2}、δ_χ、δ（乘性 Gamma）、ξ_{i,r}、形状参数 a 的 MH 更新
单条链严格串行；多条链各自持有由 (主种子, 用途) 派生的独立随机流。
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
from loguru import logger
from scipy import linalg, special

from core.errors import ChainFailureError, InsufficientDataError, NumericalFailureError, SubjectNotFoundError
from core.run_config import FpcaConfig
from domain.data_model import Dataset
from domain.sampling_utils import constrained_gaussian_draw, gaussian_from_precision, truncated_gamma
from domain.splines import SplineBasis, trapezoid_weights

ORTHONORMAL_TOL = 1e-6
SHAPE_NAMES = ("a1", "a2", "a_chi1", "a_chi2")
# Ga(2,1) / Ga(3,1) 先验形状
_SHAPE_PRIORS = (2.0, 3.0, 2.0, 3.0)


@dataclass(frozen=True, eq=False)
class ResponseDesign:
    name: str
    response: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple[str, ...]

    @classmethod
    def for_mediator(cls, ds: Dataset) -> "ResponseDesign":
        stacked = ds.stacked()
        return cls("mediator", stacked["mediator"], stacked["covariates"], tuple(ds.covariate_names))

    @classmethod
    def for_outcome(cls, ds: Dataset, mediator_column: np.ndarray | None = None) -> "ResponseDesign":
        """结局模型：协变量后追加中介列（默认观测值 M_ij；两阶段时传入插补值）。"""
        stacked = ds.stacked()
        mcol = stacked["mediator"] if mediator_column is None else np.asarray(mediator_column, dtype=float)
        design = np.column_stack([stacked["covariates"], mcol])
        return cls("outcome", stacked["outcome"], design, (*ds.covariate_names, "mediator"))


@dataclass(frozen=True, eq=False)
class ChainData:
    """数据集与响应设计、样条基绑定后的观测级数组。"""

    ids: tuple[str, ...]
    sid: np.ndarray
    z: np.ndarray
    times: np.ndarray
    y: np.ndarray
    X: np.ndarray
    basis_obs: np.ndarray
    basis: SplineBasis
    covariate_names: tuple[str, ...]
    mean_covariates: np.ndarray
    n_obs_per_subject: np.ndarray

    @property
    def n_subjects(self) -> int:
        return len(self.ids)

    @property
    def n_obs(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        return self.X.shape[1]


def prepare_chain_data(ds: Dataset, design: ResponseDesign, basis: SplineBasis) -> ChainData:
    stacked = ds.stacked()
    sid = stacked["sid"]
    n = ds.n_subjects
    X = np.asarray(design.covariates, dtype=float).reshape(len(sid), -1)
    counts = np.bincount(sid, minlength=n).astype(float)
    sums = np.zeros((n, X.shape[1]))
    np.add.at(sums, sid, X)
    return ChainData(
        ids=tuple(ds.ids),
        sid=sid,
        z=np.array([s.z for s in ds.subjects], dtype=int),
        times=stacked["times"],
        y=np.asarray(design.response, dtype=float),
        X=X,
        basis_obs=basis.evaluate(stacked["times"]) if len(sid) else np.zeros((0, basis.dim)),
        basis=basis,
        covariate_names=tuple(design.covariate_names),
        mean_covariates=sums / np.maximum(counts, 1.0)[:, None],
        n_obs_per_subject=counts,
    )


@dataclass
class FpcaState:
    basis_coeffs: np.ndarray
    scores: np.ndarray
    group_means: np.ndarray
    score_vars: np.ndarray
    noise_var: float
    reg_coeffs: np.ndarray
    smoothness: np.ndarray
    mix_weights: np.ndarray
    deltas: np.ndarray
    chi_deltas: np.ndarray
    shrink_shapes: np.ndarray
    mh_accepts: np.ndarray = field(default_factory=lambda: np.zeros(4))
    mh_proposals: int = 0

    @property
    def n_components(self) -> int:
        return self.basis_coeffs.shape[0]

    @property
    def chi_vars(self) -> np.ndarray:
        return 1.0 / np.cumprod(self.chi_deltas)

    def copy(self) -> "FpcaState":
        return copy.deepcopy(self)


def _score_fit(state: FpcaState, data: ChainData, psi_obs: np.ndarray | None = None) -> np.ndarray:
    if psi_obs is None:
        psi_obs = data.basis_obs @ state.basis_coeffs.T
    return np.sum(psi_obs * state.scores[data.sid], axis=1)


def _reg_fit(state: FpcaState, data: ChainData) -> np.ndarray:
    return data.X @ state.reg_coeffs if data.p else np.zeros(data.n_obs)


def _subject_sum(values: np.ndarray, data: ChainData) -> np.ndarray:
    return np.bincount(data.sid, weights=values, minlength=data.n_subjects)


def orthonormality_error(basis_coeffs: np.ndarray, basis: SplineBasis) -> float:
    gram = basis_coeffs @ basis.gram @ basis_coeffs.T
    return float(np.max(np.abs(gram - np.eye(len(gram))))) if gram.size else 0.0


def _orthonormalize(P: np.ndarray, gram: np.ndarray) -> np.ndarray:
    """按 gram 度量做 Gram-Schmidt。"""
    out = np.array(P, dtype=float)
    for r in range(len(out)):
        for k in range(r):
            out[r] -= (out[k] @ gram @ out[r]) * out[k]
        out[r] /= np.sqrt(out[r] @ gram @ out[r])
    return out


def init_state(data: ChainData, cfg: FpcaConfig) -> FpcaState:
    """
    初值：β 取合并最小二乘；残差轨迹 ridge 投影到样条基；
    p_r 取投影系数二阶矩（gram 度量下）的前 R 个特征向量并正交化；得分取个体最小二乘。
    """
    K = data.basis.dim
    R = cfg.n_components
    N = data.n_subjects
    if data.n_obs < K + data.p:
        raise InsufficientDataError(f"{data.n_obs} observations < L+2+p = {K + data.p}")
    if R > K:
        raise InsufficientDataError(f"n_components={R} exceeds basis dimension {K}")

    beta = np.zeros(data.p)
    if data.p:
        beta = linalg.lstsq(data.X, data.y, check_finite=False)[0]
    resid = data.y - (data.X @ beta if data.p else 0.0)

    gram = data.basis.gram
    ridge = 0.1 * (gram + 1e-8 * np.eye(K))
    coefs = np.zeros((N, K))
    for i in range(N):
        rows = data.sid == i
        Bi = data.basis_obs[rows]
        coefs[i] = linalg.solve(Bi.T @ Bi + ridge, Bi.T @ resid[rows], assume_a="pos", check_finite=False)
    second_moment = coefs.T @ coefs / max(N, 1)

    g_vals, g_vecs = np.linalg.eigh(gram)
    g_vals = np.clip(g_vals, g_vals.max() * 1e-12, None)
    g_half = (g_vecs * np.sqrt(g_vals)) @ g_vecs.T
    g_half_inv = (g_vecs / np.sqrt(g_vals)) @ g_vecs.T
    m_vals, m_vecs = np.linalg.eigh(g_half @ second_moment @ g_half)
    order = np.argsort(m_vals)[::-1][:R]
    P = _orthonormalize((g_half_inv @ m_vecs[:, order]).T, gram)

    psi_obs = data.basis_obs @ P.T
    scores = np.zeros((N, R))
    for i in range(N):
        rows = data.sid == i
        Pi = psi_obs[rows]
        A = Pi.T @ Pi
        A += (1e-3 * np.trace(A) / R + 1e-8) * np.eye(R)
        scores[i] = linalg.solve(A, Pi.T @ resid[rows], assume_a="pos", check_finite=False)

    chi = np.zeros((2, R))
    for arm in (0, 1):
        mask = data.z == arm
        if mask.any():
            chi[arm] = scores[mask].mean(axis=0)
    dev = scores - chi[data.z]
    lam2 = np.clip(np.mean(dev**2, axis=0) if N else np.ones(R), 1e-3, cfg.h_upper)
    h = np.clip(np.maximum(1.0, lam2), lam2, cfg.h_upper)
    tau = 1.0 / lam2
    deltas = np.concatenate([[tau[0]], tau[1:] / tau[:-1]])
    chi_deltas = np.ones(R)
    chi_deltas[0] = 1.0 / (1.0 + float(np.max(chi**2)))

    fit_resid = resid - np.sum(psi_obs * scores[data.sid], axis=1)
    noise_var = max(float(np.mean(fit_resid**2)), 1e-6 * float(np.var(data.y)) + 1e-12)

    return FpcaState(
        basis_coeffs=P,
        scores=scores,
        group_means=chi,
        score_vars=1.0 / np.cumprod(deltas),
        noise_var=noise_var,
        reg_coeffs=beta,
        smoothness=h,
        mix_weights=np.ones((N, R)),
        deltas=deltas,
        chi_deltas=chi_deltas,
        shrink_shapes=np.array(_SHAPE_PRIORS),
    )


def sweep_eigenfunctions(state: FpcaState, data: ChainData, cfg: FpcaConfig, rng: np.random.Generator) -> FpcaState:
    """步骤 1：逐个分量抽 p_r（与其余分量 gram 正交），单位化并补偿得分，再抽 h_r。"""
    basis = data.basis
    B = data.basis_obs
    R = state.n_components
    sigma2 = state.noise_var
    omega = basis.prior_penalty
    base = data.y - _reg_fit(state, data)
    psi_obs = B @ state.basis_coeffs.T
    for r in range(R):
        zeta_obs = state.scores[data.sid, r]
        partial = base - np.sum(psi_obs * state.scores[data.sid], axis=1) + psi_obs[:, r] * zeta_obs
        Q = (B * (zeta_obs**2)[:, None]).T @ B / sigma2 + state.smoothness[r] * omega
        lin = B.T @ (zeta_obs * partial) / sigma2
        others = [k for k in range(R) if k != r]
        C = state.basis_coeffs[others] @ basis.gram if others else None
        p = constrained_gaussian_draw(Q, lin, C, rng)
        norm = float(np.sqrt(p @ basis.gram @ p))
        if not np.isfinite(norm) or norm <= 0:
            raise NumericalFailureError(f"eigenfunction {r} has zero norm", [])
        state.basis_coeffs[r] = p / norm
        state.scores[:, r] *= norm
        psi_obs[:, r] = B @ state.basis_coeffs[r]

        rate = max(float(state.basis_coeffs[r] @ omega @ state.basis_coeffs[r]), cfg.rate_floor)
        state.smoothness[r] = truncated_gamma(
            (basis.n_knots + 1) / 2.0, rate, state.score_vars[r], cfg.h_upper, rng
        )
    return state


def sweep_scores(state: FpcaState, data: ChainData, cfg: FpcaConfig, rng: np.random.Generator) -> FpcaState:
    """步骤 2：ζ_{i,r} ~ N(m/q, 1/q)，q = ||ψ_r(t_i)||²/σ² + ξ_{i,r}/λ_r²。"""
    sigma2 = state.noise_var
    base = data.y - _reg_fit(state, data)
    psi_obs = data.basis_obs @ state.basis_coeffs.T
    chi_subject = state.group_means[data.z]
    for r in range(state.n_components):
        partial = base - np.sum(psi_obs * state.scores[data.sid], axis=1) + psi_obs[:, r] * state.scores[data.sid, r]
        prior_prec = state.mix_weights[:, r] / state.score_vars[r]
        prec = _subject_sum(psi_obs[:, r] ** 2, data) / sigma2 + prior_prec
        num = _subject_sum(partial * psi_obs[:, r], data) / sigma2 + chi_subject[:, r] * prior_prec
        state.scores[:, r] = num / prec + rng.standard_normal(data.n_subjects) / np.sqrt(prec)
    return state


def sweep_group_means(state: FpcaState, data: ChainData, cfg: FpcaConfig, rng: np.random.Generator) -> FpcaState:
    """步骤 3：χ_z^r ~ N(l/Q, 1/Q)，Q = Σ_{Z_i=z} ξ_{i,r}/λ_r² + 1/σ_{χ_r}²。"""
    chi_vars = state.chi_vars
    for arm in (0, 1):
        mask = data.z == arm
        w = state.mix_weights[mask] / state.score_vars
        Q = w.sum(axis=0) + 1.0 / chi_vars
        lin = np.sum(w * state.scores[mask], axis=0)
        state.group_means[arm] = lin / Q + rng.standard_normal(state.n_components) / np.sqrt(Q)
    return state


def sweep_regression(state: FpcaState, data: ChainData, cfg: FpcaConfig, rng: np.random.Generator) -> FpcaState:
    """步骤 4：β ~ N(Q^{-1}l, Q^{-1})，Q = X'X/σ² + I/100²。"""
    if data.p == 0:
        return state
    target = data.y - _score_fit(state, data)
    Q = data.X.T @ data.X / state.noise_var + np.eye(data.p) / cfg.prior_sd_beta**2
    lin = data.X.T @ target / state.noise_var
    state.reg_coeffs = gaussian_from_precision(Q, lin, rng)
    return state


def _shape_log_target(a: float, prior_shape: float, deltas: np.ndarray) -> float:
    if a <= 0:
        return -np.inf
    return (prior_shape - 1.0) * np.log(a) - a + float(np.sum((a - 1.0) * np.log(deltas) - special.gammaln(a)))


def _mh_shapes(state: FpcaState, cfg: FpcaConfig, rng: np.random.Generator) -> None:
    groups = (state.deltas[:1], state.deltas[1:], state.chi_deltas[:1], state.chi_deltas[1:])
    for k, (prior_shape, deltas) in enumerate(zip(_SHAPE_PRIORS, groups)):
        current = float(state.shrink_shapes[k])
        proposal = current * float(np.exp(cfg.mh_step * rng.standard_normal()))
        log_ratio = (
            _shape_log_target(proposal, prior_shape, deltas)
            - _shape_log_target(current, prior_shape, deltas)
            + np.log(proposal) - np.log(current)
        )
        if np.log(rng.uniform()) < log_ratio:
            state.shrink_shapes[k] = proposal
            state.mh_accepts[k] += 1
    state.mh_proposals += 1


def sweep_variances(state: FpcaState, data: ChainData, cfg: FpcaConfig, rng: np.random.Generator) -> FpcaState:
    """步骤 5：(a) σ^{-2} (b) δ_χ (c) δ (d) ξ (e) 形状参数 MH。"""
    R = state.n_components
    N = data.n_subjects

    # (a) 噪声精度
    resid = data.y - _reg_fit(state, data) - _score_fit(state, data)
    rate = cfg.noise_prior_rate + 0.5 * float(resid @ resid)
    if rate < cfg.rate_floor:
        logger.debug(f"σ^-2 更新的 rate={rate:g} 低于下限，使用 rate_floor={cfg.rate_floor:g}")
        rate = cfg.rate_floor
    shape = cfg.noise_prior_shape + 0.5 * data.n_obs
    state.noise_var = 1.0 / rng.gamma(shape, 1.0 / rate)

    # (b) 组均值先验精度 σ_{χ_r}^{-2} = Π_{l<=r} δ_{χ_l}
    a1, a2, a_chi1, a_chi2 = state.shrink_shapes
    chi_sq = np.sum(state.group_means**2, axis=0)
    for h in range(R):
        tau_chi = np.cumprod(state.chi_deltas)
        shape_h = (a_chi1 if h == 0 else a_chi2) + (R - h)
        rate_h = 1.0 + 0.5 * float(np.sum(tau_chi[h:] / state.chi_deltas[h] * chi_sq[h:]))
        state.chi_deltas[h] = rng.gamma(shape_h, 1.0 / rate_h)

    # (c) 得分方差 λ_r^{-2} = Π_{l<=r} δ_l，截断以保证 λ_r² <= h_r
    dev = state.scores - state.group_means[data.z]
    wsum = np.sum(state.mix_weights * dev**2, axis=0)
    for h in range(R):
        tau = np.cumprod(state.deltas)
        partial = tau[h:] / state.deltas[h]
        shape_h = (a1 if h == 0 else a2) + 0.5 * (R - h) * N
        rate_h = 1.0 + 0.5 * float(np.sum(partial * wsum[h:]))
        lower = float(np.max(1.0 / (state.smoothness[h:] * partial)))
        state.deltas[h] = truncated_gamma(shape_h, rate_h, lower, np.inf, rng)
    state.score_vars = 1.0 / np.cumprod(state.deltas)

    # (d) 得分的尺度混合权重
    v = cfg.t_mixing_dof
    state.mix_weights = rng.gamma((v + 1.0) / 2.0, 1.0 / (0.5 * (v + dev**2 / state.score_vars)))

    # (e) 形状参数：对数尺度随机游走 MH
    if cfg.sample_shapes:
        _mh_shapes(state, cfg, rng)
    return state


@dataclass(frozen=True, eq=False)
class FpcaDraws:
    """保留的（burn-in 之后、thin 之后）后验抽样。"""

    stage: str
    basis: SplineBasis
    ids: tuple[str, ...]
    z: np.ndarray
    covariate_names: tuple[str, ...]
    mean_covariates: np.ndarray
    basis_coeffs: np.ndarray
    scores: np.ndarray
    group_means: np.ndarray
    score_vars: np.ndarray
    noise_var: np.ndarray
    reg_coeffs: np.ndarray
    smoothness: np.ndarray
    deltas: np.ndarray
    chi_deltas: np.ndarray
    shrink_shapes: np.ndarray
    fitted_mean_obs: np.ndarray
    mh_acceptance: np.ndarray
    n_iter: int
    n_burn: int
    thin: int

    @property
    def n_draws(self) -> int:
        return self.basis_coeffs.shape[0]

    @property
    def n_components(self) -> int:
        return self.basis_coeffs.shape[1]

    def eigenfunctions(self, grid) -> np.ndarray:
        """(D, R, len(grid)) 的特征函数取值。"""
        B = self.basis.evaluate(np.asarray(grid, dtype=float))
        return np.einsum("drk,gk->drg", self.basis_coeffs, B)

    def subject_index(self, subject_id: str) -> int:
        try:
            return self.ids.index(str(subject_id))
        except ValueError:
            raise SubjectNotFoundError(f"unknown subject id: {subject_id}") from None

    def latent_trajectories(self, subject: int, grid) -> np.ndarray:
        """(D, len(grid))：Σ_r ψ_r(t) ζ_{i,r} + x̄_i'β。"""
        psi = self.eigenfunctions(grid)
        curves = np.einsum("drg,dr->dg", psi, self.scores[:, subject, :])
        if self.reg_coeffs.shape[1]:
            curves += (self.reg_coeffs @ self.mean_covariates[subject])[:, None]
        return curves

    def reg_coef(self, name: str) -> np.ndarray:
        return self.reg_coeffs[:, list(self.covariate_names).index(name)]

    def scalar_traces(self) -> dict[str, np.ndarray]:
        traces: dict[str, np.ndarray] = {"noise_var": self.noise_var}
        for r in range(self.n_components):
            traces[f"score_var_{r + 1}"] = self.score_vars[:, r]
            traces[f"chi0_{r + 1}"] = self.group_means[:, 0, r]
            traces[f"chi1_{r + 1}"] = self.group_means[:, 1, r]
            traces[f"smoothness_{r + 1}"] = self.smoothness[:, r]
        for j, name in enumerate(self.covariate_names):
            traces[f"beta_{name}"] = self.reg_coeffs[:, j]
        for k, name in enumerate(SHAPE_NAMES):
            traces[name] = self.shrink_shapes[:, k]
        return traces


def _post_process(draws: dict[str, np.ndarray], basis: SplineBasis) -> dict[str, np.ndarray]:
    """按后验均值 λ² 降序排列分量，并翻转符号使 ∫ψ_r >= 0；效应曲线对此不变。"""
    if not len(draws["score_vars"]):
        return draws
    order = np.argsort(-draws["score_vars"].mean(axis=0), kind="stable")
    for key in ("basis_coeffs", "scores", "group_means", "score_vars", "smoothness", "mix_weights"):
        if key in draws:
            draws[key] = np.take(draws[key], order, axis=-1 if key != "basis_coeffs" else 1)
    w = trapezoid_weights(basis.grid_size)
    integrals = np.einsum("drk,gk,g->dr", draws["basis_coeffs"], basis.basis_on_grid, w)
    sign = np.where(integrals < 0, -1.0, 1.0)
    draws["basis_coeffs"] = draws["basis_coeffs"] * sign[:, :, None]
    draws["scores"] = draws["scores"] * sign[:, None, :]
    draws["group_means"] = draws["group_means"] * sign[:, None, :]
    return draws


def _check_invariants(state: FpcaState, data: ChainData, cfg: FpcaConfig) -> None:
    err = orthonormality_error(state.basis_coeffs, data.basis)
    if err > ORTHONORMAL_TOL:
        raise NumericalFailureError(f"orthonormality violated by {err:.2e}", [])
    positive = [state.noise_var, *state.score_vars, *state.smoothness, *state.deltas, *state.chi_deltas,
                *state.shrink_shapes]
    if not np.all(np.isfinite(positive)) or min(positive) <= 0 or np.any(state.mix_weights <= 0):
        raise NumericalFailureError("variance parameter left the positive half-line", [])


def run_chain(
    ds: Dataset,
    cfg: FpcaConfig,
    design: ResponseDesign,
    rng: np.random.Generator,
    *,
    basis: SplineBasis | None = None,
    stage: str | None = None,
) -> FpcaDraws:
    stage = stage or design.name
    if basis is None:
        basis = SplineBasis.from_times(ds.stacked()["times"], cfg.n_knots, cfg.grid_size)
    data = prepare_chain_data(ds, design, basis)
    state = init_state(data, cfg)

    keys = ("basis_coeffs", "scores", "group_means", "score_vars", "noise_var", "reg_coeffs",
            "smoothness", "deltas", "chi_deltas", "shrink_shapes")
    kept: dict[str, list] = {k: [] for k in keys}
    fitted_sum = np.zeros(data.n_obs)
    if cfg.n_draws == 0:
        logger.warning(f"[{stage}] n_iter={cfg.n_iter}, n_burn={cfg.n_burn}：没有保留任何抽样")

    logger.info(f"[{stage}] 开始 Gibbs 链: R={cfg.n_components}, L={basis.n_knots}, "
                f"n_iter={cfg.n_iter}, burn={cfg.n_burn}, thin={cfg.thin}, N={data.n_subjects}, n_obs={data.n_obs}")
    sweeps = (sweep_eigenfunctions, sweep_scores, sweep_group_means, sweep_regression, sweep_variances)
    for it in range(cfg.n_iter):
        try:
            for sweep in sweeps:
                state = sweep(state, data, cfg, rng)
            _check_invariants(state, data, cfg)
        except NumericalFailureError as e:
            raise ChainFailureError(stage, it, e) from e
        if it >= cfg.n_burn and (it + 1 - cfg.n_burn) % cfg.thin == 0:
            for k in keys:
                kept[k].append(np.array(getattr(state, k), dtype=float, copy=True))
            fitted_sum += _reg_fit(state, data) + _score_fit(state, data)

    n_kept = len(kept["noise_var"])
    R, K = cfg.n_components, basis.dim
    empty_shapes = {"basis_coeffs": (0, R, K), "scores": (0, data.n_subjects, R), "group_means": (0, 2, R),
                    "score_vars": (0, R), "noise_var": (0,), "reg_coeffs": (0, data.p), "smoothness": (0, R),
                    "deltas": (0, R), "chi_deltas": (0, R), "shrink_shapes": (0, 4)}
    arrays = {k: np.stack(v) if v else np.zeros(empty_shapes[k]) for k, v in kept.items()}
    arrays = _post_process(arrays, basis)
    acceptance = state.mh_accepts / max(state.mh_proposals, 1)
    logger.info(f"[{stage}] 链结束: 保留 {n_kept} 个抽样, MH 接受率 "
                + ", ".join(f"{n}={a:.2f}" for n, a in zip(SHAPE_NAMES, acceptance)))
    return FpcaDraws(
        stage=stage,
        basis=basis,
        ids=data.ids,
        z=data.z,
        covariate_names=data.covariate_names,
        mean_covariates=data.mean_covariates,
        fitted_mean_obs=fitted_sum / max(n_kept, 1),
        mh_acceptance=acceptance,
        n_iter=cfg.n_iter,
        n_burn=cfg.n_burn,
        thin=cfg.thin,
        **arrays,
    )


def explained_variance(draws: FpcaDraws) -> np.ndarray:
    """各分量的解释方差比例（后验均值 λ² 降序归一化）。"""
    if draws.n_draws == 0:
        return np.zeros(0)
    lam2 = np.sort(draws.score_vars.mean(axis=0))[::-1]
    return lam2 / lam2.sum()


def select_truncation(pilot: FpcaDraws, threshold: float) -> int:
    """累计解释方差首次达到阈值的最小 R。"""
    if pilot.n_draws == 0:
        return pilot.n_components
    cumulative = np.cumsum(explained_variance(pilot))
    hits = np.nonzero(cumulative >= threshold - 1e-12)[0]
    return int(hits[0]) + 1 if len(hits) else pilot.n_components


__all__ = [
    "ResponseDesign",
    "ChainData",
    "FpcaState",
    "FpcaDraws",
    "prepare_chain_data",
    "init_state",
    "constrained_gaussian_draw",
    "sweep_eigenfunctions",
    "sweep_scores",
    "sweep_group_means",
    "sweep_regression",
    "sweep_variances",
    "run_chain",
    "select_truncation",
    "explained_variance",
    "orthonormality_error",
]
