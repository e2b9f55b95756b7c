from typing import Callable, List, Optional

import numpy as np
import psutil
from joblib import Parallel, delayed

from config import Config


def resolve_workers(threads: Optional[int] = None) -> int:
    threads = Config.THREADS if threads is None else int(threads)
    if threads <= 0:
        threads = psutil.cpu_count(logical=True) or 1
    return threads


def stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, key); independent of scheduling."""
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))


def run_indexed(task: Callable[[int], object], count: int, threads: Optional[int] = None) -> List:
    """Evaluates ``task(0..count-1)``; results come back in index order."""
    workers = min(resolve_workers(threads), max(count, 1))
    if workers == 1:
        return [task(index) for index in range(count)]
    return Parallel(n_jobs=workers)(delayed(task)(index) for index in range(count))
