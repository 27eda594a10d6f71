"""
Thin-plate 样条基：b(t) = (1, t, |t-k_1|^3, ..., |t-k_L|^3)'。

粗糙度惩罚按 [Ω]_{l,l'} = (k_l - k_l')^2（l, l' > 2）构造；前两行/列为零。
该矩阵对两个以上结点是不定的（平方距离矩阵只有一个正特征值），
采样器使用其半正定投影 `SplineBasis.prior_penalty` 作为先验精度形状。
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from core.errors import DimensionMismatchError, DomainError, KnotDegeneracyError

_DOMAIN_TOL = 1e-12


def place_knots(times, n_knots: int) -> np.ndarray:
    """结点取合并观测时间的 l/(L+1) 经验分位数（次序统计量之间线性插值）。"""
    if n_knots < 1:
        raise KnotDegeneracyError(f"need at least one knot, got L={n_knots}")
    pooled = np.asarray(times, dtype=float).ravel()
    n_distinct = len(np.unique(pooled))
    if n_distinct < n_knots:
        raise KnotDegeneracyError(f"{n_distinct} distinct time values < L={n_knots}")
    probs = np.arange(1, n_knots + 1) / (n_knots + 1)
    knots = np.quantile(pooled, probs, method="linear")
    if np.any(np.diff(knots) <= 0):
        raise KnotDegeneracyError(f"quantile knots collapse: {knots.tolist()}")
    if knots[0] <= 0.0 or knots[-1] >= 1.0:
        raise KnotDegeneracyError(f"knots must lie in (0,1): {knots.tolist()}")
    return knots


def penalty_matrix(knots) -> np.ndarray:
    knots = np.asarray(knots, dtype=float)
    dim = len(knots) + 2
    omega = np.zeros((dim, dim))
    omega[2:, 2:] = (knots[:, None] - knots[None, :]) ** 2
    return omega


def _basis_rows(knots: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones_like(t), t, np.abs(t[:, None] - knots[None, :]) ** 3])


def trapezoid_weights(grid_size: int) -> np.ndarray:
    h = 1.0 / (grid_size - 1)
    w = np.full(grid_size, h)
    w[[0, -1]] = h / 2
    return w


def _psd_projection(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, 0.0, None)
    out = (vecs * vals) @ vecs.T
    return (out + out.T) / 2


@dataclass(frozen=True, eq=False)
class SplineBasis:
    knots: np.ndarray
    grid_size: int = 50
    grid: np.ndarray = field(init=False, repr=False)
    basis_on_grid: np.ndarray = field(init=False, repr=False)
    gram: np.ndarray = field(init=False, repr=False)
    penalty: np.ndarray = field(init=False, repr=False)
    prior_penalty: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        knots = np.array(self.knots, dtype=float)
        if knots.ndim != 1 or len(knots) < 1:
            raise KnotDegeneracyError("knots must be a non-empty vector")
        if np.any(np.diff(knots) <= 0) or knots[0] <= 0.0 or knots[-1] >= 1.0:
            raise KnotDegeneracyError(f"knots must be strictly increasing inside (0,1): {knots.tolist()}")
        if self.grid_size < 3:
            raise DomainError(f"grid_size must be >= 3, got {self.grid_size}")
        grid = np.linspace(0.0, 1.0, self.grid_size)
        b_grid = _basis_rows(knots, grid)
        w = trapezoid_weights(self.grid_size)
        gram = b_grid.T @ (w[:, None] * b_grid)
        penalty = penalty_matrix(knots)
        for name, arr in (("knots", knots), ("grid", grid), ("basis_on_grid", b_grid),
                          ("gram", (gram + gram.T) / 2), ("penalty", penalty),
                          ("prior_penalty", _psd_projection(penalty))):
            arr = np.asarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_times(cls, times, n_knots: int = 10, grid_size: int = 50) -> "SplineBasis":
        return cls(place_knots(times, n_knots), grid_size)

    @property
    def n_knots(self) -> int:
        return len(self.knots)

    @property
    def dim(self) -> int:
        return len(self.knots) + 2

    def evaluate(self, t) -> np.ndarray:
        """t 为标量时返回长度 L+2 的向量，为数组时返回 (len(t), L+2) 矩阵。"""
        arr = np.asarray(t, dtype=float)
        flat = np.atleast_1d(arr)
        if np.any(~np.isfinite(flat)) or np.any(flat < -_DOMAIN_TOL) or np.any(flat > 1 + _DOMAIN_TOL):
            raise DomainError("basis evaluation requires t in [0, 1]")
        rows = _basis_rows(self.knots, flat)
        return rows[0] if arr.ndim == 0 else rows

    def inner(self, f, g) -> float:
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)
        if f.shape != (self.dim,) or g.shape != (self.dim,):
            raise DimensionMismatchError(f"coefficient vectors must have length {self.dim}")
        return float(f @ self.gram @ g)

    def describe(self) -> dict:
        return {"n_knots": self.n_knots, "grid_size": self.grid_size, "knots": self.knots.tolist()}


def eval_basis(basis: SplineBasis, t) -> np.ndarray:
    return basis.evaluate(t)


def grid_integrals(basis: SplineBasis, f, g) -> float:
    """∫_0^1 (b(t)'f)(b(t)'g) dt 的梯形求积近似，即 f' gram g。"""
    return basis.inner(f, g)


__all__ = [
    "SplineBasis",
    "place_knots",
    "penalty_matrix",
    "eval_basis",
    "grid_integrals",
    "trapezoid_weights",
]
