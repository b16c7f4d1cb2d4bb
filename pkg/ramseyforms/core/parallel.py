from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """
    Apply fn to every item and return the results in input order.

    workers <= 1 runs inline; otherwise the items run on a thread pool. numpy and scipy.fft
    release the GIL inside their kernels, which is where the time goes.
    """
    work = list(items)
    if workers <= 1 or len(work) <= 1:
        return [fn(x) for x in work]
    with ThreadPoolExecutor(max_workers=min(workers, len(work))) as pool:
        return list(pool.map(fn, work))
