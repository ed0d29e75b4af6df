"""Trial-level parallelism with deterministic collection order.

Each Monte Carlo trial owns seed-derived streams, so results are identical
whatever the execution order; this helper just runs the trial closure over
an optional thread pool (BLAS-heavy work releases the GIL) and returns
results indexed by trial.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count(requested: int | None = None) -> int:
    """Resolve the worker count: CKLAB_THREADS env var overrides everything."""
    env = os.environ.get("CKLAB_THREADS")
    if env is not None:
        return max(1, int(env))
    if requested is not None:
        return max(1, int(requested))
    return 1


def run_trials(fn, trials: int, workers: int | None = None) -> list:
    """Evaluate fn(trial) for trial = 0..trials-1; results in trial order."""
    w = worker_count(workers)
    if w <= 1 or trials <= 1:
        return [fn(t) for t in range(trials)]
    out = [None] * trials
    with ThreadPoolExecutor(max_workers=min(w, trials)) as pool:
        futures = {pool.submit(fn, t): t for t in range(trials)}
        for fut in futures:
            out[futures[fut]] = fut.result()
    return out
