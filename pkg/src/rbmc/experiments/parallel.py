"""Order-preserving task map over a process pool.

Results come back in task order whatever the completion order, and each
task carries its own stream indices, so output never depends on ``jobs``.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], tasks: Sequence[T], jobs: int = 1) -> List[R]:
    """``[fn(t) for t in tasks]``, spread over ``jobs`` worker processes.

    ``fn`` and the tasks must be picklable when ``jobs > 1``.
    """
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    if jobs == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def chunk_ranges(total: int, size: int):
    """Split ``range(total)`` into consecutive ``(start, stop)`` pairs of at most ``size``."""
    return [(s, min(s + size, total)) for s in range(0, total, size)]
