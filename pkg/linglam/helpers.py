import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_threads() -> int:
    return os.cpu_count() or 1


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: Optional[int] = 1) -> List[R]:
    """Like map(), but fans calls out to a thread pool.

    Results come back in input order whatever the schedule, so callers can
    reduce them deterministically."""
    items = list(items)
    threads = default_threads() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as executor:
        return list(executor.map(func, items))


def parse_csv_list(text: str) -> List[str]:
    """Split a comma-separated CLI value, dropping blanks."""
    return [part.strip() for part in text.split(",") if part.strip()]
