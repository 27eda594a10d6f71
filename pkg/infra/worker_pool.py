from __future__ import annotations

from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

from loguru import logger

T = TypeVar("T")
R = TypeVar("R")


def run_ordered(fn: Callable[[T], R], items: Sequence[T], parallelism: int = 1) -> list[R]:
    """
    逐项执行 fn，结果按输入顺序返回。
    parallelism 为 1 时在当前进程内串行执行，否则使用进程池；fn 与 items 必须可 pickle。
    """
    items = list(items)
    if parallelism <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    workers = min(parallelism, len(items))
    logger.info(f"进程池并行执行 {len(items)} 个任务 (workers={workers})")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


__all__ = ["run_ordered"]
