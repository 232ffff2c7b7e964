"""Domain types for branching Brownian motion with a linear absorbing barrier.

The population is stored as parallel numpy arrays (one slot per alive
particle) because the interesting horizons carry 10^5 - 10^6 particles.
Individual :class:`ParticleRecord` objects are built on demand.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .rng import CounterStream

SQRT2 = math.sqrt(2.0)


class ModelError(ValueError):
    """Base class for invalid model inputs."""


class NotAProbability(ModelError):
    pass


class MeanNotTwo(ModelError):
    pass


class ZeroOffspringMass(ModelError):
    pass


class TruncationAfterNow(ModelError):
    pass


class ParticleCapExceeded(RuntimeError):
    """Raised when a replica creates more particles than ``particle_cap``."""

    def __init__(self, created: int, cap: int):
        super().__init__(f"created {created} particles, cap is {cap}")
        self.created = created
        self.cap = cap


@dataclass(frozen=True)
class OffspringLaw:
    """Finite-support offspring distribution ``{k: p_k}`` with k >= 1."""

    probabilities: tuple = ((2, 1.0),)

    @classmethod
    def binary(cls) -> "OffspringLaw":
        return cls(((2, 1.0),))

    @classmethod
    def from_mapping(cls, probs) -> "OffspringLaw":
        items = probs.items() if hasattr(probs, "items") else probs
        return cls(tuple(sorted((int(k), float(p)) for k, p in items)))

    @property
    def mean(self) -> float:
        return math.fsum(k * p for k, p in self.probabilities)

    @property
    def factorial_moment2(self) -> float:
        return math.fsum(k * (k - 1) * p for k, p in self.probabilities)

    def generating_function(self, s):
        """``sum_k p_k s**k``; works elementwise on arrays."""
        return sum(p * np.power(s, k) for k, p in self.probabilities)

    def generating_derivative(self, s):
        return sum(k * p * np.power(s, k - 1) for k, p in self.probabilities)

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms in (0, 1) to offspring counts by inversion."""
        ks = np.array([k for k, _ in self.probabilities], dtype=np.int64)
        if len(ks) == 1:
            return np.full(np.shape(u), ks[0], dtype=np.int64)
        cdf = np.cumsum([p for _, p in self.probabilities])
        idx = np.searchsorted(cdf, u, side="right")
        return ks[np.minimum(idx, len(ks) - 1)]


def validate_offspring(law: OffspringLaw) -> OffspringLaw:
    """Return ``law`` unchanged if it is a mean-2 law on {1, 2, ...}.

    Raises :class:`ZeroOffspringMass` if k = 0 carries mass,
    :class:`NotAProbability` if the masses are not a distribution and
    :class:`MeanNotTwo` if the mean differs from 2 by more than 1e-12.
    """
    probs = law.probabilities
    if len(probs) == 0:
        raise NotAProbability("empty offspring distribution")
    ks = [k for k, _ in probs]
    if len(set(ks)) != len(ks):
        raise NotAProbability(f"repeated offspring counts in {ks}")
    for k, p in probs:
        if k == 0 and p > 0:
            raise ZeroOffspringMass("offspring count 0 has positive mass")
        if k < 0 or int(k) != k:
            raise NotAProbability(f"offspring count {k} is not a positive integer")
        if not (0.0 <= p <= 1.0) or not math.isfinite(p):
            raise NotAProbability(f"p_{k} = {p} is not a probability")
    total = math.fsum(p for _, p in probs)
    if abs(total - 1.0) > 1e-12:
        raise NotAProbability(f"masses sum to {total!r}")
    if abs(law.mean - 2.0) > 1e-12:
        raise MeanNotTwo(f"mean offspring {law.mean!r} != 2")
    return law


class BarrierMode(enum.Enum):
    NONE = "none"
    FULL = "full"
    TRUNCATED = "truncated"


@dataclass(frozen=True)
class BarrierSpec:
    """The line ``y = slope * t`` and how the simulator treats it.

    ``FULL`` kills a particle in the segment where it crosses.  ``TRUNCATED``
    never kills; every lineage is tested on every segment and the first
    crossing segment is recorded, so one run carries N_t, the surviving set
    and every truncated set at once.  ``truncation`` is forced onto the
    knot grid.
    """

    slope: float = 0.0
    mode: BarrierMode = BarrierMode.FULL
    truncation: Optional[float] = None

    def __post_init__(self):
        if self.mode is BarrierMode.TRUNCATED:
            if self.truncation is None or self.truncation < 0:
                raise ModelError("TRUNCATED barrier needs a truncation time s >= 0")
        elif self.truncation is not None:
            raise ModelError("truncation time only applies to the TRUNCATED mode")

    @classmethod
    def none(cls) -> "BarrierSpec":
        return cls(0.0, BarrierMode.NONE)

    @classmethod
    def full(cls, slope: float) -> "BarrierSpec":
        return cls(float(slope), BarrierMode.FULL)

    @classmethod
    def truncated_at(cls, slope: float, s: float) -> "BarrierSpec":
        return cls(float(slope), BarrierMode.TRUNCATED, float(s))


class Phase(enum.Enum):
    SUPERCRITICAL = "supercritical"
    CRITICAL = "critical"
    SUBCRITICAL = "subcritical"


def classify_phase(barrier: Union[BarrierSpec, float]) -> Phase:
    slope = barrier.slope if isinstance(barrier, BarrierSpec) else float(barrier)
    if abs(slope - SQRT2) <= 1e-12:
        return Phase.CRITICAL
    return Phase.SUPERCRITICAL if slope < SQRT2 else Phase.SUBCRITICAL


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines one replica.

    ``particle_cap`` bounds the number of particles ever created in the
    replica.  ``branching=False`` switches off the branching clock, which
    leaves a single Brownian lineage (a test mode used for first-passage
    checks).  ``record_knots`` keeps the full path and genealogy log needed
    by :meth:`Population.record`; leave it off for large runs.
    """

    initial_position: float = 1.0
    horizon: float = 1.0
    obs_grid_step: float = 0.05
    particle_cap: int = 20_000_000
    seed: int = 0
    offspring: OffspringLaw = field(default_factory=OffspringLaw.binary)
    barrier: BarrierSpec = field(default_factory=lambda: BarrierSpec.full(0.0))
    branching: bool = True
    record_knots: bool = False

    def __post_init__(self):
        if not self.initial_position > 0:
            raise ModelError("initial_position must be > 0")
        if not self.obs_grid_step > 0:
            raise ModelError("obs_grid_step must be > 0")
        if self.horizon < 0:
            raise ModelError("horizon must be >= 0")
        if self.particle_cap < 1:
            raise ModelError("particle_cap must be >= 1")
        validate_offspring(self.offspring)

    def observation_times(self) -> np.ndarray:
        """Grid multiples of ``obs_grid_step`` up to the horizon, plus the
        horizon and the truncation time."""
        n = int(math.floor(self.horizon / self.obs_grid_step + 1e-9))
        times = np.arange(1, n + 1) * self.obs_grid_step
        extra = [self.horizon]
        s = self.barrier.truncation
        if s is not None and 0 < s < self.horizon:
            extra.append(s)
        times = np.concatenate([times, extra])
        times = times[(times > 0) & (times <= self.horizon)]
        # merge near-duplicates produced by float grid arithmetic
        times = np.unique(np.round(times, 12))
        return times


@dataclass
class ParticleRecord:
    id: int
    parent_id: Optional[int]
    birth_time: float
    death_time: Optional[float]
    knots: np.ndarray  # shape (n, 2): (time, position) from birth on
    hit_segment: Optional[tuple]
    absorbed: bool
    lineage: Optional[np.ndarray] = None  # ancestral path incl. own knots

    @property
    def path(self) -> np.ndarray:
        return self.knots if self.lineage is None else self.lineage


class History:
    """Append-only event log kept when ``record_knots`` is on."""

    def __init__(self):
        self.knot_keys = []
        self.knot_t = []
        self.knot_x = []
        self.info = {}  # key -> dict(parent_key, birth, death, absorbed, hit)
        self.key_to_id = {}

    def knots(self, keys, t, x):
        self.knot_keys.append(np.array(keys, dtype=np.uint64))
        self.knot_t.append(np.broadcast_to(np.asarray(t, dtype=float), np.shape(keys)).copy())
        self.knot_x.append(np.array(x, dtype=float))

    def born(self, key, parent_key, birth):
        self.info[int(key)] = dict(parent_key=parent_key, birth=float(birth),
                                   death=None, absorbed=False, hit=None)

    def died(self, key, time, absorbed):
        rec = self.info[int(key)]
        rec["death"] = float(time)
        rec["absorbed"] = bool(absorbed)

    def hit(self, key, a, b):
        rec = self.info[int(key)]
        if rec["hit"] is None:
            rec["hit"] = (float(a), float(b))

    def _knot_table(self):
        if len(self.knot_keys) > 1:
            self.knot_keys = [np.concatenate(self.knot_keys)]
            self.knot_t = [np.concatenate(self.knot_t)]
            self.knot_x = [np.concatenate(self.knot_x)]
        return self.knot_keys[0], self.knot_t[0], self.knot_x[0]

    def own_knots(self, key) -> np.ndarray:
        keys, t, x = self._knot_table()
        sel = keys == np.uint64(key)
        order = np.argsort(t[sel], kind="stable")
        return np.column_stack([t[sel][order], x[sel][order]])


class Population:
    """Alive set of one replica at time ``time``.

    Per-particle arrays are aligned: ``ids``, ``keys`` (64-bit genealogical
    keys that seed each particle's random stream), ``parent_ids``,
    ``birth``, ``pos`` (position at ``last_t``), ``last_t``, ``seg``
    (segment counter), ``branch_at`` (scheduled branching time) and
    ``hit_a``/``hit_b`` (first crossing segment, NaN when none).
    """

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.stream = CounterStream(cfg.seed)
        self.time = 0.0
        self.dead_count = 0
        self.last_death = 0.0
        self.next_id = 1
        root_key = self.stream.key64(np.uint64(0), 0, 0xFFFF)
        root_key = np.atleast_1d(root_key).astype(np.uint64)
        self.ids = np.zeros(1, dtype=np.int64)
        self.keys = root_key
        self.parent_ids = np.full(1, -1, dtype=np.int64)
        self.birth = np.zeros(1)
        self.pos = np.array([float(cfg.initial_position)])
        self.last_t = np.zeros(1)
        self.seg = np.zeros(1, dtype=np.int64)
        if cfg.branching:
            self.branch_at = self.stream.exponential(root_key, 0, _TAG_LIFE)
        else:
            self.branch_at = np.full(1, np.inf)
        self.hit_a = np.full(1, np.nan)
        self.hit_b = np.full(1, np.nan)
        self.history = History() if cfg.record_knots else None
        if self.history is not None:
            self.history.key_to_id[int(root_key[0])] = 0
            self.history.born(root_key[0], None, 0.0)
            self.history.knots(root_key, 0.0, self.pos)

    # derived quantities -------------------------------------------------

    @property
    def size(self) -> int:
        return len(self.ids)

    @property
    def created(self) -> int:
        return self.next_id

    @property
    def positions(self) -> np.ndarray:
        """Positions at ``self.time`` (all particles sit on ``time`` after
        :func:`~bbm_absorb.simulator.advance`)."""
        return self.pos

    @property
    def crossed(self) -> np.ndarray:
        return ~np.isnan(self.hit_a)

    _FIELDS = ("ids", "keys", "parent_ids", "birth", "pos", "last_t", "seg",
               "branch_at", "hit_a", "hit_b")

    def _take(self, keep):
        for name in self._FIELDS:
            setattr(self, name, getattr(self, name)[keep])

    def _append(self, **cols):
        for name in self._FIELDS:
            setattr(self, name, np.concatenate([getattr(self, name), cols[name]]))

    def copy(self) -> "Population":
        other = Population.__new__(Population)
        other.__dict__.update(self.__dict__)
        for name in self._FIELDS:
            setattr(other, name, getattr(self, name).copy())
        return other

    # records --------------------------------------------------------------

    def record(self, pid: int, lineage: bool = True) -> ParticleRecord:
        """Full :class:`ParticleRecord` for particle ``pid`` (alive or dead);
        needs ``record_knots``."""
        h = self.history
        if h is None:
            raise RuntimeError("population was simulated without record_knots")
        id_to_key = {v: k for k, v in h.key_to_id.items()}
        key = id_to_key[int(pid)]
        info = h.info[key]
        parent = info["parent_key"]
        own = h.own_knots(key)
        path = None
        if lineage:
            pieces = [own]
            pk = parent
            while pk is not None:
                pknots = h.own_knots(pk)
                pieces.append(pknots[:-1] if len(pknots) > 1 else pknots[:0])
                pk = h.info[pk]["parent_key"]
            path = np.concatenate(pieces[::-1])
        return ParticleRecord(
            id=int(pid),
            parent_id=None if parent is None else h.key_to_id[parent],
            birth_time=info["birth"],
            death_time=info["death"],
            knots=own,
            hit_segment=info["hit"],
            absorbed=info["absorbed"],
            lineage=path,
        )

    def alive_record(self, i: int) -> ParticleRecord:
        """Record for the ``i``-th alive slot without history (single knot)."""
        hit = None if math.isnan(self.hit_a[i]) else (float(self.hit_a[i]), float(self.hit_b[i]))
        return ParticleRecord(
            id=int(self.ids[i]),
            parent_id=None if self.parent_ids[i] < 0 else int(self.parent_ids[i]),
            birth_time=float(self.birth[i]),
            death_time=None,
            knots=np.array([[self.last_t[i], self.pos[i]]]),
            hit_segment=hit,
            absorbed=False,
        )


# stream tags
_TAG_LIFE = 1
_TAG_OFFSPRING = 2
_TAG_CHILD = 3
_TAG_MOVE = 4


# selectors ----------------------------------------------------------------

@dataclass(frozen=True)
class TruncatedAt:
    s: float


ALL = "all"
SURVIVING = "surviving"
Selector = Union[str, TruncatedAt]


@dataclass
class ParticleView:
    """A filtered view of a population: boolean ``mask`` over alive slots."""

    pop: Population
    mask: np.ndarray

    @property
    def ids(self) -> np.ndarray:
        return self.pop.ids[self.mask]

    @property
    def positions(self) -> np.ndarray:
        return self.pop.pos[self.mask]

    def id_set(self) -> set:
        return set(self.ids.tolist())

    def __len__(self) -> int:
        return int(np.count_nonzero(self.mask))

    def __iter__(self) -> Iterator[ParticleRecord]:
        for i in np.flatnonzero(self.mask):
            yield self.pop.alive_record(int(i))

    def max_position(self) -> Optional[float]:
        if not self.mask.any():
            return None
        return float(self.pop.pos[self.mask].max())


def selector_mask(pop: Population, selector: Selector) -> np.ndarray:
    if isinstance(selector, TruncatedAt):
        if selector.s > pop.time + 1e-12:
            raise TruncationAfterNow(f"s = {selector.s} > t = {pop.time}")
        # NaN compares False, so never-crossed lineages are kept
        return ~(pop.hit_a < selector.s)
    if selector == ALL:
        return np.ones(pop.size, dtype=bool)
    if selector == SURVIVING:
        return np.isnan(pop.hit_a)
    raise ValueError(f"unknown selector {selector!r}")


def view(pop: Population, selector: Selector = ALL) -> ParticleView:
    """N_t (``ALL``), the never-crossed set (``SURVIVING``) or the set whose
    lineage avoided the barrier before ``s`` (``TruncatedAt(s)``).

    Crossing times are known at segment resolution; a lineage counts as
    crossed before ``s`` when its first crossing segment starts before ``s``.
    """
    return ParticleView(pop, selector_mask(pop, selector))
