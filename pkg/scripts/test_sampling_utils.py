"""
采样原语测试：jitter Cholesky、约束高斯（kriging 条件化）、截断 Gamma。
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

_ROOT = Path(__file__).resolve().parents[1]
if str(_ROOT) not in sys.path:
    sys.path.insert(0, str(_ROOT))

from core.errors import NumericalFailureError  # noqa: E402
from domain.sampling_utils import (  # noqa: E402
    JITTER_LEVELS,
    cholesky_with_jitter,
    constrained_gaussian_draw,
    gaussian_from_precision,
    truncated_gamma,
)


def _spd(dim: int, seed: int) -> np.ndarray:
    a = np.random.default_rng(seed).normal(size=(dim, dim))
    return a @ a.T + dim * np.eye(dim)


def test_cholesky_and_failure() -> None:
    Q = _spd(4, 0)
    L = cholesky_with_jitter(Q)
    np.testing.assert_allclose(L @ L.T, Q, atol=1e-12)
    cholesky_with_jitter(np.ones((2, 2)))
    with pytest.raises(NumericalFailureError) as info:
        cholesky_with_jitter(np.diag([1.0, -1.0]))
    assert info.value.jitter_levels == list(JITTER_LEVELS)


def test_gaussian_from_precision_moments() -> None:
    rng = np.random.default_rng(1)
    Q = _spd(3, 2)
    lin = np.array([1.0, -2.0, 0.5])
    draws = np.array([gaussian_from_precision(Q, lin, rng) for _ in range(20000)])
    cov = np.linalg.inv(Q)
    np.testing.assert_allclose(draws.mean(axis=0), cov @ lin, atol=0.02)
    np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.02)


def test_constrained_draw_satisfies_constraint() -> None:
    rng = np.random.default_rng(3)
    for k in range(50):
        Q = _spd(6, 100 + k)
        C = rng.normal(size=(2, 6))
        x = constrained_gaussian_draw(Q, rng.normal(size=6), C, rng)
        assert np.max(np.abs(C @ x)) <= 1e-8
    x = constrained_gaussian_draw(np.eye(3), np.zeros(3), None, rng)
    assert x.shape == (3,)


def test_constrained_draw_conditional_mean() -> None:
    rng = np.random.default_rng(4)
    Q = _spd(3, 9)
    lin = np.array([2.0, 0.0, -1.0])
    C = np.array([[1.0, 1.0, 1.0]])
    sigma = np.linalg.inv(Q)
    mu = sigma @ lin
    expected = mu - sigma @ C.T @ np.linalg.solve(C @ sigma @ C.T, C @ mu)
    draws = np.array([constrained_gaussian_draw(Q, lin, C, rng) for _ in range(20000)])
    np.testing.assert_allclose(draws.mean(axis=0), expected, atol=0.02)


def test_truncated_gamma_bounds_and_law() -> None:
    rng = np.random.default_rng(5)
    shape, rate, lo, hi = 3.0, 2.0, 0.5, 2.0
    xs = np.array([truncated_gamma(shape, rate, lo, hi, rng) for _ in range(3000)])
    assert xs.min() >= lo and xs.max() <= hi
    dist = stats.gamma(a=shape, scale=1 / rate)
    a, b = dist.cdf(lo), dist.cdf(hi)
    p = stats.kstest(xs, lambda x: (dist.cdf(x) - a) / (b - a)).pvalue
    assert p > 1e-3, p


def test_truncated_gamma_far_tail() -> None:
    rng = np.random.default_rng(6)
    xs = [truncated_gamma(2.0, 1.0, 50.0, np.inf, rng) for _ in range(200)]
    assert min(xs) >= 50.0
    assert np.isfinite(xs).all()
    assert truncated_gamma(2.0, 1.0, 3.0, 3.0, rng) == 3.0


def test_truncated_gamma_without_mass_raises() -> None:
    # 区间位于左尾深处，CDF 两端都下溢为 0
    with pytest.raises(NumericalFailureError):
        truncated_gamma(200.0, 1.0, 1e-3, 2e-3, np.random.default_rng(7))


def main() -> int:
    test_cholesky_and_failure()
    test_gaussian_from_precision_moments()
    test_constrained_draw_satisfies_constraint()
    test_constrained_draw_conditional_mean()
    test_truncated_gamma_bounds_and_law()
    test_truncated_gamma_far_tail()
    test_truncated_gamma_without_mass_raises()
    print("sampling_utils: OK")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
