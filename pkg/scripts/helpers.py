"""测试共用的小型数据集构造。"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

_ROOT = Path(__file__).resolve().parents[1]
if str(_ROOT) not in sys.path:
    sys.path.insert(0, str(_ROOT))

from core.run_config import FpcaConfig, SimConfig  # noqa: E402
from domain.data_model import Dataset, SubjectSeries  # noqa: E402
from domain.simulate import generate_dataset  # noqa: E402


def tiny_dataset(n_subjects: int = 6, n_obs: int = 5, n_cov: int = 1, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    subjects = []
    for i in range(n_subjects):
        t = np.sort(rng.uniform(0.02, 0.98, n_obs))
        x = rng.normal(size=(n_obs, n_cov))
        subjects.append(SubjectSeries(f"u{i}", i % 2, t, rng.normal(size=n_obs), rng.normal(size=n_obs), x))
    return Dataset(tuple(subjects), tuple(f"x{j + 1}" for j in range(n_cov)))


def small_sim(n_subjects: int = 40, mean_obs: float = 12.0, seed: int = 11) -> Dataset:
    ds, _ = generate_dataset(SimConfig(n_subjects=n_subjects, mean_obs=mean_obs), np.random.default_rng(seed))
    return ds


def short_chain(**overrides) -> FpcaConfig:
    base = {"n_components": 2, "n_knots": 5, "grid_size": 30, "n_iter": 60, "n_burn": 20, "thin": 2, "seed": 3}
    base.update(overrides)
    return FpcaConfig(**base)
