"""Counter-based Gaussian noise.

Every draw is a pure function of (seed, path, step, component): the Philox4x32
block cipher is applied to the counter (step, component pair, path) under the
key ``seed``.  Any partition of the path range into chunks, in any order or on
any number of threads, therefore reproduces the same numbers.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import kernels


def standard_normals(seed: int, n_paths: int, n_steps: int, dim: int, path_start: int = 0,
                     threads: int = 1, chunk: int = 4096) -> np.ndarray:
    """N(0, 1) draws of shape (n_paths, n_steps, dim)."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    if threads <= 1 or n_paths <= chunk:
        return kernels.normal_block(seed, path_start, n_paths, n_steps, dim)
    starts = list(range(0, n_paths, chunk))
    out = np.empty((n_paths, n_steps, dim))

    def work(s):
        m = min(chunk, n_paths - s)
        out[s:s + m] = kernels.normal_block(seed, path_start + s, m, n_steps, dim)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(work, starts))
    return out


def brownian_increments(seed: int, n_paths: int, n_steps: int, dim: int, dt: float,
                        path_start: int = 0, threads: int = 1) -> np.ndarray:
    """Increments of a standard d-dimensional Brownian motion, each N(0, dt)."""
    return standard_normals(seed, n_paths, n_steps, dim, path_start, threads) * np.sqrt(dt)
