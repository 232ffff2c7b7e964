"""Replica farms: per-replica seeds and an order-preserving parallel map."""
from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List

import numpy as np

from ..process import SimConfig
from ..rng import CounterStream

_TAG_REPLICA = 0x5EED


def replica_seed(base_seed: int, index: int) -> int:
    """64-bit seed of replica ``index``; a pure function of both arguments."""
    key = CounterStream(base_seed).key64(np.uint64(index), 0, _TAG_REPLICA)
    return int(np.asarray(key).reshape(-1)[0])


def replica_configs(sim: SimConfig, indices: Iterable[int]) -> List[SimConfig]:
    return [dataclasses.replace(sim, seed=replica_seed(sim.seed, i)) for i in indices]


def farm_map(fn: Callable, items: list, threads: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally across worker processes.

    Results come back in input order whatever the scheduling, so any
    reduction applied to them afterwards is deterministic.
    """
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))
