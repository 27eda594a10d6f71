"""采样原语：带 jitter 升级的 Cholesky、线性约束下的高斯抽样、截断 Gamma。"""

from __future__ import annotations

import numpy as np
from loguru import logger
from scipy import linalg, stats

from core.errors import NumericalFailureError

JITTER_LEVELS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


def cholesky_with_jitter(Q: np.ndarray, levels=JITTER_LEVELS) -> np.ndarray:
    """返回下三角 L 使 L L' = Q + jitter·mean(diag)·I；jitter 依次升级直至成功。"""
    Q = np.asarray(Q, dtype=float)
    Q = (Q + Q.T) / 2
    if Q.size and not np.all(np.isfinite(Q)):
        raise NumericalFailureError("precision matrix has non-finite entries", [])
    scale = float(np.mean(np.abs(np.diag(Q)))) if Q.size else 1.0
    scale = scale if scale > 0 else 1.0
    tried: list[float] = []
    for jitter in levels:
        tried.append(jitter)
        try:
            mat = Q + (jitter * scale) * np.eye(len(Q)) if jitter else Q
            chol = linalg.cholesky(mat, lower=True, check_finite=False)
            if jitter:
                logger.debug(f"Cholesky 需要 jitter={jitter:g}")
            return chol
        except linalg.LinAlgError:
            continue
    raise NumericalFailureError("matrix not positive definite", tried)


def gaussian_from_precision(Q: np.ndarray, l: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """从 N(Q^{-1} l, Q^{-1}) 抽样。"""
    chol = cholesky_with_jitter(Q)
    mean = linalg.cho_solve((chol, True), np.asarray(l, dtype=float), check_finite=False)
    z = rng.standard_normal(len(mean))
    return mean + linalg.solve_triangular(chol.T, z, lower=False, check_finite=False)


def constrained_gaussian_draw(
    Q: np.ndarray,
    l: np.ndarray,
    C: np.ndarray | None,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    从 N(Q^{-1} l, Q^{-1}) 在 Cx = 0 条件下抽样（conditioning by kriging）：
    x* = x - Q^{-1} C' (C Q^{-1} C')^{-1} C x。
    """
    Q = np.asarray(Q, dtype=float)
    l = np.asarray(l, dtype=float)
    chol = cholesky_with_jitter(Q)
    mean = linalg.cho_solve((chol, True), l, check_finite=False)
    z = rng.standard_normal(len(mean))
    x = mean + linalg.solve_triangular(chol.T, z, lower=False, check_finite=False)
    if C is None:
        return x
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.size == 0:
        return x
    v = linalg.cho_solve((chol, True), C.T, check_finite=False)
    w = C @ v
    try:
        correction = v @ linalg.solve(w, C @ x, assume_a="pos", check_finite=False)
    except linalg.LinAlgError as e:
        raise NumericalFailureError(f"constraint system singular: {e}", []) from e
    x = x - correction
    # 清理舍入残差：在约束行空间上做一次正交投影
    resid = C @ x
    if np.max(np.abs(resid)) > 0:
        x = x - C.T @ linalg.lstsq(C @ C.T, resid, check_finite=False)[0]
    return x


def truncated_gamma(
    shape: float,
    rate: float,
    lower: float,
    upper: float,
    rng: np.random.Generator,
    max_tries: int = 1000,
) -> float:
    """
    从 Ga(shape, rate) 截断到 [lower, upper] 抽样。
    下界在分布左半时对 CDF 逆变换，位于右尾时对 SF 逆变换；仍失败则用平移指数提议做拒绝抽样，
    三者都不可用时抛出 NumericalFailureError。
    """
    lower = max(float(lower), 0.0)
    upper = float(upper)
    if upper <= lower:
        return lower
    dist = stats.gamma(a=shape, scale=1.0 / rate)
    lo_cdf = float(dist.cdf(lower))
    if lo_cdf < 0.5:
        hi_cdf = float(dist.cdf(upper))
        if hi_cdf > lo_cdf:
            x = float(dist.ppf(rng.uniform(lo_cdf, hi_cdf)))
            if np.isfinite(x):
                return min(max(x, lower), upper)
    else:
        # 右尾：用 SF 避免 1 - cdf 的相消
        lo_sf, hi_sf = float(dist.sf(lower)), float(dist.sf(upper))
        if lo_sf > hi_sf:
            x = float(dist.isf(rng.uniform(hi_sf, lo_sf)))
            if np.isfinite(x):
                return min(max(x, lower), upper)
    mode = (shape - 1.0) / rate if shape > 1 else 0.0
    if lower > mode and lower > 0:
        # 平移指数提议，接受概率 (x/lower)^{k-1} exp(-(k-1)(x-lower)/lower)
        k1 = max(shape - 1.0, 0.0)
        prop_rate = rate - k1 / lower
        for _ in range(max_tries):
            x = lower + rng.exponential(1.0 / prop_rate)
            if x > upper:
                continue
            log_acc = k1 * (np.log(x / lower) - (x - lower) / lower)
            if np.log(rng.uniform()) < log_acc:
                return float(x)
    raise NumericalFailureError(
        f"truncated gamma has no usable mass: shape={shape:g}, rate={rate:g}, interval=[{lower:g}, {upper:g}]", []
    )


__all__ = [
    "JITTER_LEVELS",
    "cholesky_with_jitter",
    "gaussian_from_precision",
    "constrained_gaussian_draw",
    "truncated_gamma",
]
