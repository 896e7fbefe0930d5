"""Deterministic sample fan-out.

Workers receive disjoint index ranges; every sample's randomness is keyed
by its absolute index, so results are identical for any worker count and
partials are merged in range order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def fan_out(collect, n_samples: int, workers: int, /, *args) -> list:
    """Run collect(start, stop, *args) over a partition of range(n_samples).

    Returns the partial results in ascending range order.
    """
    if n_samples < 0:
        raise ValueError("n_samples must be >= 0")
    workers = max(1, int(workers))
    if workers == 1 or n_samples <= 1:
        return [collect(0, n_samples, *args)]
    workers = min(workers, n_samples)
    step = -(-n_samples // workers)
    bounds = [(i, min(i + step, n_samples)) for i in range(0, n_samples, step)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(collect, lo, hi, *args) for lo, hi in bounds]
        return [f.result() for f in futures]
