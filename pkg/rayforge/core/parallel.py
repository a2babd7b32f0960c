"""
Deterministic chunked fan-out over rays.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Tuple, TypeVar

T = TypeVar("T")


def chunk_bounds(n_items: int, chunk_size: int) -> List[Tuple[int, int]]:
    """Split ``range(n_items)`` into consecutive ``[start, stop)`` chunks."""
    chunk_size = max(1, int(chunk_size))
    return [(start, min(start + chunk_size, n_items)) for start in range(0, n_items, chunk_size)]


def map_chunks(fn: Callable[[int, int], T], n_items: int, chunk_size: int,
               threads: int = 1) -> List[T]:
    """Apply ``fn(start, stop)`` to every chunk, results in chunk order.

    Chunk boundaries depend only on ``chunk_size`` so the per-chunk results,
    and anything assembled from them in order, do not depend on ``threads``.
    """
    bounds = chunk_bounds(n_items, chunk_size)
    results: List[T] = [None] * len(bounds)  # type: ignore[list-item]

    if threads <= 1 or len(bounds) <= 1:
        for slot, (start, stop) in enumerate(bounds):
            results[slot] = fn(start, stop)
        return results

    with ThreadPoolExecutor(max_workers=threads) as executor:
        futures = {slot: executor.submit(fn, start, stop) for slot, (start, stop) in enumerate(bounds)}
        for slot, future in futures.items():
            results[slot] = future.result()
    return results
