"""
运行配置模型（pydantic v2）。

所有模型 `extra="forbid"`：未知键在任何计算开始前被拒绝。
领域模块直接接收这里的 SimConfig / FpcaConfig / FitConfig / StudyConfig。
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ColumnSchema(_Strict):
    """长格式 CSV 的列名映射。"""

    id: str = "id"
    treatment: str = "z"
    time: str = "time"
    mediator: str = "mediator"
    outcome: str = "outcome"
    covariates: list[str] = Field(default_factory=lambda: ["x1", "x2", "x3"])


class SimConfig(_Strict):
    n_subjects: int = Field(default=200, ge=2)
    mean_obs: PositiveFloat = 25.0
    sigma_x: PositiveFloat = 1.0
    sigma_m: PositiveFloat = 1.0
    sigma_y: PositiveFloat = 1.0
    kernel_bandwidth: PositiveFloat = 8.0
    obs_noise_sd: float = Field(default=1.0, ge=0.0)
    min_obs: PositiveInt = 3
    seed: int = Field(default=20240101, ge=0, lt=2**64)


class FpcaConfig(_Strict):
    n_components: PositiveInt = 3
    n_knots: PositiveInt = 10
    grid_size: int = Field(default=50, ge=3)
    n_iter: int = Field(default=4000, ge=0)
    n_burn: int = Field(default=2000, ge=0)
    thin: PositiveInt = 2
    seed: int = Field(default=0, ge=0, lt=2**64)
    fev_threshold: float = Field(default=0.90, gt=0.0, le=1.0)
    t_mixing_dof: PositiveFloat = 30.0
    mh_step: PositiveFloat = 1.0
    h_upper: PositiveFloat = 1e4
    prior_sd_beta: PositiveFloat = 100.0
    noise_prior_shape: float = Field(default=0.0, ge=0.0)
    noise_prior_rate: float = Field(default=0.0, ge=0.0)
    rate_floor: PositiveFloat = 1e-8
    sample_shapes: bool = True

    @model_validator(mode="after")
    def _check_chain_lengths(self) -> "FpcaConfig":
        # n_iter == n_burn 允许：得到空的 draws 并给出配置警告
        if self.n_iter < self.n_burn:
            raise ValueError("n_iter must be >= n_burn")
        return self

    @property
    def n_draws(self) -> int:
        return (self.n_iter - self.n_burn) // self.thin


class FitConfig(_Strict):
    chain: FpcaConfig = Field(default_factory=FpcaConfig)
    truncation: Literal["fev", "fixed"] = "fev"
    pilot_components: PositiveInt = 8
    pilot_iter: PositiveInt = 600
    pilot_burn: int = Field(default=300, ge=0)
    mediator_plugin: Literal["posterior_mean", "observed"] = "posterior_mean"
    report_grid_size: int = Field(default=201, ge=2)

    @model_validator(mode="after")
    def _check_pilot(self) -> "FitConfig":
        if self.truncation == "fev" and self.pilot_iter <= self.pilot_burn:
            raise ValueError("pilot_iter must be > pilot_burn")
        return self


class StudyConfig(_Strict):
    n_reps: PositiveInt = 100
    sparsity_levels: list[PositiveFloat] = Field(default_factory=lambda: [25.0])
    methods: list[Literal["mfpca", "gee"]] = Field(default_factory=lambda: ["mfpca", "gee"])
    gee_corr: Literal["independence", "ar1"] = "ar1"
    full_scale: bool = False
    n_iter: PositiveInt = 2000
    n_burn: int = Field(default=1000, ge=0)
    max_failure_rate: float = Field(default=0.05, ge=0.0, le=1.0)


class IoConfig(_Strict):
    output_dir: str = "runs"
    columns: ColumnSchema = Field(default_factory=ColumnSchema, alias="schema")
    transform: Literal["none", "log"] = "none"
    write_trajectories: bool = False

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class RunConfig(_Strict):
    seed: int = Field(default=20240101, ge=0, lt=2**64)
    threads: PositiveInt = 1
    sim: SimConfig = Field(default_factory=SimConfig)
    fit: FitConfig = Field(default_factory=FitConfig)
    study: StudyConfig = Field(default_factory=StudyConfig)
    io: IoConfig = Field(default_factory=IoConfig)


__all__ = [
    "ColumnSchema",
    "SimConfig",
    "FpcaConfig",
    "FitConfig",
    "StudyConfig",
    "IoConfig",
    "RunConfig",
]
