"""Counter-derived random substreams.

Every stochastic routine takes a ``seed`` (an int or a SeedSequence) and
derives one independent generator per unit of work (simulation block,
bank, grid cell) from the seed plus an integer key path. Results then
depend only on the seed and the work decomposition, never on how many
threads ran the work.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar, Union

import numpy as np

Seed = Union[int, np.random.SeedSequence]
T = TypeVar("T")


def as_seed_sequence(seed: Seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (bool, np.bool_)) or seed is None:
        raise TypeError("an explicit integer seed is required")
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    return np.random.SeedSequence(seed)


def substream(seed: Seed, *key: int) -> np.random.SeedSequence:
    """Child sequence addressed by ``key`` below ``seed``."""
    ss = as_seed_sequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(int(k) for k in key))


def generator(seed: Seed, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(substream(seed, *key)))


def default_threads() -> int:
    """Worker cap from the OPCAP_THREADS environment variable (default 1)."""
    raw = os.environ.get("OPCAP_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"OPCAP_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError("OPCAP_THREADS must be a positive integer")
    return n


def ordered_map(func: Callable[[T], object], items: Iterable[T], threads: int | None = None) -> list:
    """Map ``func`` over ``items`` preserving order; threads only change speed."""
    items: Sequence[T] = list(items)
    threads = default_threads() if threads is None else int(threads)
    if threads <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
