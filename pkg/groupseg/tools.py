"""Auxiliary functions: process-parallel map and finite-difference gradients."""

from typing import Callable, Iterable, Optional
import logging
import multiprocessing as mp
import os
from time import perf_counter
import numpy as np


__title__ = "groupseg"
__version__ = "1.0"
__author__ = "groupseg developers"
__copyright__ = """
Copyright 2026 groupseg developers

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
"""
__license__ = "Apache 2.0"


logger = logging.getLogger(__name__)


def default_threads() -> int:
    """Available parallelism of the machine.

    Returns:
        int: Number of usable CPU cores (at least 1)
    """
    if hasattr(os, "sched_getaffinity"): return max(1, len(os.sched_getaffinity(0)))
    return max(1, os.cpu_count() or 1)


def run_parallel(func: Callable, items: Iterable, threads: Optional[int] = None) -> list:
    """Applies a function to all items in worker processes and collects the results in input order.

    Args:
        func (Callable): Picklable function of one argument (module level function or functools.partial)
        items (Iterable): Arguments
        threads (Optional[int], optional): Number of worker processes; None means available parallelism, 1 or less runs serially. Defaults to None.

    Returns:
        list: Results in the order of the items
    """
    items = list(items)
    if threads is None: threads = default_threads()
    if threads <= 1 or len(items) < 2: return [func(item) for item in items]

    start: float = perf_counter()
    processes: int = min(threads, len(items))
    logger.debug("%d parallel processes started.", processes)
    with mp.Pool(processes) as pool:
        results: list = pool.map(func, items, chunksize=max(1, len(items) // (4 * processes)))
    logger.debug("All processes terminated, runtime: %.1f seconds.", perf_counter() - start)
    return results


def numerical_gradient(f: Callable[[], float], x: np.ndarray, indices: Optional[Iterable] = None, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function with respect to entries of an array.

    The array is perturbed in place and restored afterwards.

    Args:
        f (Callable[[], float]): Function evaluating the objective for the current content of x
        x (np.ndarray): Array to perturb
        indices (Optional[Iterable], optional): Flat indices to differentiate; None means all. Defaults to None.
        eps (float, optional): Step width. Defaults to 1e-6.

    Returns:
        np.ndarray: Finite-difference derivatives at the given indices
    """
    flat: np.ndarray = x.reshape(-1)
    assert np.shares_memory(flat, x)
    if indices is None: indices = range(flat.size)
    result: list = []
    for index in indices:
        old = flat[index]
        flat[index] = old + eps
        plus: float = f()
        flat[index] = old - eps
        minus: float = f()
        flat[index] = old
        result.append((plus - minus) / (2 * eps))
    return np.array(result)


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Elementwise relative difference |a - b| / max(|a|, |b|, floor).

    Args:
        a (np.ndarray): First values
        b (np.ndarray): Second values
        floor (float, optional): Lower bound of the denominator. Defaults to 1e-8.

    Returns:
        np.ndarray: Relative differences
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
