"""
模拟数据生成：GP 残差的中介/结局轨迹、稀疏不规则采样，以及解析真值曲线。

中介潜在过程  M_i(t) = 0.2 + (0.2 + 2t + sin 2πt)(z+1) - X1 + 0.5 X2 + ε^m(t) + c_i2
结局潜在过程  Y_i(t) = M_i(t) + cos 2πt + 0.1t² + 2t + (cos 2πt + 0.2t² + 3t) z - 0.5 X2 + X3 + ε^y(t) + c_i3
ε 为核 σ²·exp{-b(s-t)²} 的零均值 GP（平方指数核，b 默认 8）；观测值再加 N(0, obs_noise_sd²) 噪声。
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from loguru import logger

from core.run_config import SimConfig
from domain.data_model import Dataset, SubjectSeries
from domain.sampling_utils import cholesky_with_jitter

GP_JITTER = 1e-8
COVARIATE_NAMES = ("x1", "x2", "x3")
ACME_INTEGRAL = 1.2
TE_INTEGRAL = 1.2 + 0.2 / 3.0 + 1.5


def gp_kernel(s, t, variance: float, bandwidth: float) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return variance * np.exp(-bandwidth * (s[:, None] - t[None, :]) ** 2)


def gp_draw(times, variance: float, bandwidth: float, rng: np.random.Generator) -> np.ndarray:
    times = np.asarray(times, dtype=float).ravel()
    if len(times) == 0:
        return np.zeros(0)
    cov = gp_kernel(times, times, variance, bandwidth) + GP_JITTER * np.eye(len(times))
    chol = cholesky_with_jitter(cov)
    return chol @ rng.standard_normal(len(times))


def acme_truth(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return 0.2 + 2.0 * t + np.sin(2 * np.pi * t)


def direct_truth(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return np.cos(2 * np.pi * t) + 0.2 * t**2 + 3.0 * t


def mediator_mean(t, z: int, x: np.ndarray) -> np.ndarray:
    """中介过程的条件均值（不含 GP 残差与随机截距）。"""
    x = np.atleast_2d(x)
    return 0.2 + acme_truth(t) * (z + 1) - x[:, 0] + 0.5 * x[:, 1]


def outcome_mean(t, z: int, m, x: np.ndarray) -> np.ndarray:
    """给定中介值 m 时结局过程的条件均值（同期效应 γ = 1）。"""
    t = np.asarray(t, dtype=float)
    x = np.atleast_2d(x)
    base = np.cos(2 * np.pi * t) + 0.1 * t**2 + 2.0 * t
    return np.asarray(m, dtype=float) + base + direct_truth(t) * z - 0.5 * x[:, 1] + x[:, 2]


@dataclass(frozen=True)
class SimTruth:
    acme_integral: float = ACME_INTEGRAL
    te_integral: float = TE_INTEGRAL

    @staticmethod
    def acme_curve(t) -> np.ndarray:
        return acme_truth(t)

    @staticmethod
    def te_curve(t) -> np.ndarray:
        return acme_truth(t) + direct_truth(t)

    def value(self, estimand: str) -> float:
        return {"acme": self.acme_integral, "te": self.te_integral}[estimand]

    def to_dict(self) -> dict:
        return {
            "acme_integral": self.acme_integral,
            "te_integral": self.te_integral,
            "ande_integral": self.te_integral - self.acme_integral,
            "acme_curve": "0.2 + 2t + sin(2*pi*t)",
            "te_curve": "acme(t) + cos(2*pi*t) + 0.2t^2 + 3t",
        }


def truth_curves(grid) -> pd.DataFrame:
    grid = np.asarray(grid, dtype=float)
    acme = SimTruth.acme_curve(grid)
    te = SimTruth.te_curve(grid)
    return pd.DataFrame({"t": grid, "acme": acme, "te": te, "ande": te - acme})


def simulate_subject(index: int, cfg: SimConfig, rng: np.random.Generator) -> SubjectSeries:
    n_obs = max(int(rng.poisson(cfg.mean_obs)), cfg.min_obs)
    times = np.sort(rng.uniform(0.0, 1.0, n_obs))
    x = rng.normal(0.0, cfg.sigma_x, size=(n_obs, 3))
    z = int(rng.standard_normal() > 0)
    c_m = rng.normal(0.0, cfg.sigma_m)
    c_y = rng.normal(0.0, cfg.sigma_y)
    eps_m = gp_draw(times, cfg.sigma_m**2, cfg.kernel_bandwidth, rng)
    eps_y = gp_draw(times, cfg.sigma_y**2, cfg.kernel_bandwidth, rng)

    latent_m = mediator_mean(times, z, x) + eps_m + c_m
    latent_y = outcome_mean(times, z, latent_m, x) + eps_y + c_y
    mediator = latent_m + rng.normal(0.0, cfg.obs_noise_sd, n_obs)
    outcome = latent_y + rng.normal(0.0, cfg.obs_noise_sd, n_obs)
    return SubjectSeries(f"s{index:04d}", z, times, mediator, outcome, x)


def generate_dataset(cfg: SimConfig, rng: np.random.Generator | None = None) -> tuple[Dataset, SimTruth]:
    """每个个体使用由主随机流派生的独立子流，逐个生成。"""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    subject_seeds = rng.integers(0, 2**63 - 1, size=cfg.n_subjects)
    subjects = [simulate_subject(i, cfg, np.random.default_rng(int(s))) for i, s in enumerate(subject_seeds)]
    ds = Dataset(tuple(subjects), COVARIATE_NAMES, (0.0, 1.0))
    n_treated = sum(s.z for s in subjects)
    logger.debug(f"模拟数据集: N={ds.n_subjects}, n_obs={ds.n_obs}, 处理组={n_treated}, T={cfg.mean_obs}")
    return ds, SimTruth()


__all__ = [
    "SimTruth",
    "gp_kernel",
    "gp_draw",
    "acme_truth",
    "direct_truth",
    "mediator_mean",
    "outcome_mean",
    "truth_curves",
    "simulate_subject",
    "generate_dataset",
]
