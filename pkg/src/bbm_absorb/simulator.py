"""Event-driven exact simulation of BBM under a linear barrier.

Branching times are exponential clocks sampled exactly.  Positions are only
materialized at knots (branching events and observation times); between two
knots the path is a Brownian bridge, and whether it touched the barrier is
decided by one Bernoulli draw with the closed-form bridge crossing
probability.  All randomness comes from a counter-based stream keyed by the
replica seed and each particle's genealogical key, so a run is a pure
function of its :class:`~bbm_absorb.process.SimConfig`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtri

from .analytic import SegmentDraw, bridge_crossing_prob
from .process import (
    BarrierMode,
    BarrierSpec,
    ParticleCapExceeded,
    Population,
    SimConfig,
    _TAG_CHILD,
    _TAG_LIFE,
    _TAG_MOVE,
    _TAG_OFFSPRING,
)

__all__ = [
    "ReplicaOutcome",
    "SegmentDraw",
    "advance",
    "crossing_decision",
    "run_replica",
]


def crossing_decision(seg: SegmentDraw, barrier_slope: float, rng) -> bool:
    """Bernoulli draw of whether the bridge over ``seg`` touched the line.

    ``rng`` is a :class:`numpy.random.Generator` (or anything with a
    ``random()`` method).  Endpoints on or below the line are a certain
    crossing and consume no randomness.
    """
    p = bridge_crossing_prob(seg, barrier_slope)
    if p >= 1.0:
        return True
    return bool(rng.random() < p)


@dataclass
class ReplicaOutcome:
    extinct: bool
    extinction_time: Optional[float]
    final_population: Population
    capped: bool


def _move(pop: Population, idx: np.ndarray, t_end, barrier: BarrierSpec):
    """Extend the paths of slots ``idx`` to ``t_end`` and test crossings.

    Returns a boolean array (aligned with ``idx``) of fresh crossings.
    """
    t0 = pop.last_t[idx]
    dt = t_end - t0
    live = dt > 0
    z, u = pop.stream.uniform_pair(pop.keys[idx], pop.seg[idx], _TAG_MOVE)
    x0 = pop.pos[idx]
    x1 = x0 + np.sqrt(np.where(live, dt, 0.0)) * ndtri(z)
    fresh = np.zeros(len(idx), dtype=bool)
    if barrier.mode is not BarrierMode.NONE:
        test = live & np.isnan(pop.hit_a[idx])
        if test.any():
            rho = barrier.slope
            d0 = x0[test] - rho * t0[test]
            d1 = x1[test] - rho * t_end[test]
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                p = np.exp(-2.0 * d0 * d1 / dt[test])
            p = np.where((d0 > 0) & (d1 > 0), p, 1.0)
            fresh[test] = u[test] < p
    pop.pos[idx] = x1
    pop.last_t[idx] = np.where(live, t_end, t0)
    pop.seg[idx] += live.astype(np.int64)
    hist = pop.history
    if fresh.any():
        j = idx[fresh]
        pop.hit_a[j] = t0[fresh]
        pop.hit_b[j] = t_end[fresh]
    if hist is not None and live.any():
        hist.knots(pop.keys[idx[live]], t_end[live], x1[live])
        for k, a, b in zip(pop.keys[idx[fresh]], pop.hit_a[idx[fresh]], pop.hit_b[idx[fresh]]):
            hist.hit(k, a, b)
    return fresh


def _kill(pop: Population, keep: np.ndarray, when, absorbed):
    """Remove slots where ``keep`` is False; ``when``/``absorbed`` are per
    removed slot (for the history log)."""
    gone = ~keep
    n = int(np.count_nonzero(gone))
    if n == 0:
        return
    if pop.history is not None:
        for k, w, a in zip(pop.keys[gone], when, absorbed):
            pop.history.died(k, w, a)
    pop.dead_count += n
    pop.last_death = max(pop.last_death, float(np.max(when)))
    pop._take(keep)


def advance(pop: Population, to: float, barrier: Optional[BarrierSpec] = None) -> Population:
    """Run ``pop`` forward to time ``to`` (in place; also returned).

    Every alive particle ends with a knot at ``to``.  Raises
    :class:`ParticleCapExceeded` when more than ``particle_cap`` particles
    have been created.
    """
    cfg = pop.cfg
    barrier = cfg.barrier if barrier is None else barrier
    if to < pop.time:
        raise ValueError(f"cannot advance backwards from {pop.time} to {to}")
    if to == pop.time:
        return pop
    full = barrier.mode is BarrierMode.FULL
    law = cfg.offspring
    stream = pop.stream

    birth_keys, birth_parent, birth_time, birth_rank = [], [], [], []
    n_born = 0

    while True:
        ev = np.flatnonzero(pop.branch_at < to)
        if len(ev) == 0:
            break
        t_ev = pop.branch_at[ev]
        crossed = _move(pop, ev, t_ev, barrier)
        branching = ev
        if full and crossed.any():
            branching = ev[~crossed]
        # offspring of every branching slot
        k = law.sample(stream.uniform(pop.keys[branching], 0, _TAG_OFFSPRING))
        parents = np.repeat(branching, k)
        rank = np.concatenate([np.arange(n) for n in k]) if len(k) else np.zeros(0, np.int64)
        child_keys = stream.key64(pop.keys[parents], rank, _TAG_CHILD)
        child_birth = pop.branch_at[parents]
        n_new = len(parents)
        n_born += n_new
        if pop.next_id + n_born > cfg.particle_cap:
            raise ParticleCapExceeded(pop.next_id + n_born, cfg.particle_cap)
        if cfg.branching:
            lifetimes = stream.exponential(child_keys, 0, _TAG_LIFE)
        else:
            lifetimes = np.full(n_new, np.inf)
        if pop.history is not None:
            for ck, pk, b, ha, hb in zip(child_keys, pop.keys[parents], child_birth,
                                         pop.hit_a[parents], pop.hit_b[parents]):
                pop.history.born(ck, int(pk), b)
                if not math.isnan(ha):
                    pop.history.hit(ck, ha, hb)
        birth_keys.append(child_keys)
        birth_parent.append(pop.keys[parents])
        birth_time.append(child_birth)
        birth_rank.append(rank)
        children = dict(
            ids=np.full(n_new, -1, dtype=np.int64),
            keys=child_keys,
            parent_ids=pop.ids[parents],
            birth=child_birth,
            pos=pop.pos[parents],
            last_t=child_birth,
            seg=np.zeros(n_new, dtype=np.int64),
            branch_at=child_birth + lifetimes,
            hit_a=pop.hit_a[parents],
            hit_b=pop.hit_b[parents],
        )
        # the branching parents and (in FULL mode) the absorbed ones leave
        keep = np.ones(pop.size, dtype=bool)
        keep[ev] = False
        when = pop.branch_at[~keep]
        absorbed = np.zeros(len(ev), dtype=bool)
        if full:
            absorbed = crossed
        # _kill iterates removed slots in index order, ev is sorted
        _kill(pop, keep, when, absorbed)
        if pop.history is not None:
            # knot at birth for each child
            pop.history.knots(child_keys, child_birth, children["pos"])
        pop._append(**children)

    # bring everyone to `to`
    if pop.size:
        idx = np.arange(pop.size)
        crossed = _move(pop, idx, np.full(pop.size, float(to)), barrier)
        if full and crossed.any():
            _kill(pop, ~crossed, np.full(int(crossed.sum()), float(to)),
                  np.ones(int(crossed.sum()), dtype=bool))

    if birth_keys:
        _assign_ids(pop, birth_keys, birth_parent, birth_time, birth_rank)
    pop.time = float(to)
    return pop


def _assign_ids(pop, birth_keys, birth_parent, birth_time, birth_rank):
    """Give this interval's births consecutive ids in order of birth time."""
    keys = np.concatenate(birth_keys)
    parents = np.concatenate(birth_parent)
    times = np.concatenate(birth_time)
    ranks = np.concatenate(birth_rank)
    order = np.lexsort((ranks, parents, times))
    new_ids = np.empty(len(keys), dtype=np.int64)
    new_ids[order] = pop.next_id + np.arange(len(keys))
    pop.next_id += len(keys)

    sorter = np.argsort(keys)
    sorted_keys = keys[sorter]

    def lookup(k):
        pos = np.searchsorted(sorted_keys, k)
        pos = np.minimum(pos, len(sorted_keys) - 1)
        found = sorted_keys[pos] == k
        return np.where(found, new_ids[sorter[pos]], -1), found

    pending = pop.ids < 0
    if pending.any():
        pop.ids[pending], _ = lookup(pop.keys[pending])
    # parents born inside this interval were still unnamed when their
    # children were created
    orphan = pop.parent_ids < 0
    orphan &= pop.birth > 0
    if orphan.any():
        parent_keys_of = dict(zip(keys.tolist(), parents.tolist()))
        pk = np.array([parent_keys_of.get(int(k), 0) for k in pop.keys[orphan]], dtype=np.uint64)
        pid, found = lookup(pk)
        pop.parent_ids[np.flatnonzero(orphan)[found]] = pid[found]
    if pop.history is not None:
        for k, i in zip(keys.tolist(), new_ids.tolist()):
            pop.history.key_to_id[k] = i


def run_replica(cfg: SimConfig, observer: Optional[Callable[[Population], None]] = None) -> ReplicaOutcome:
    """Simulate one replica up to ``cfg.horizon``.

    ``observer(pop)`` is called at every observation time (multiples of
    ``obs_grid_step``, the truncation time and the horizon) while the
    population is non-empty.  A replica that exceeds ``particle_cap`` comes
    back with ``capped=True`` and its population as of the last completed
    observation time.
    """
    pop = Population(cfg)
    barrier = cfg.barrier
    extinction_time = None
    for t in cfg.observation_times():
        snapshot_time = pop.time
        try:
            advance(pop, float(t), barrier)
        except ParticleCapExceeded:
            pop.time = snapshot_time
            return ReplicaOutcome(False, None, pop, True)
        if pop.size == 0:
            extinction_time = _extinction_time(pop, float(t))
            break
        if observer is not None:
            observer(pop)
    return ReplicaOutcome(pop.size == 0, extinction_time, pop, False)


def _extinction_time(pop: Population, t: float) -> float:
    # segment resolution: end of the segment in which the last particle was absorbed
    return min(float(t), pop.last_death)
