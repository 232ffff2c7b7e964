"""Functionals of a simulated population.

Centered maxima over the different particle sets, the derivative-martingale
sum, window sets of lineages by first-crossing time, localization tubes and
the running time-average of ``1{M~_t <= z}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .analytic import SQRT2, BadArgs, centering
from .process import ALL, SURVIVING, ParticleRecord, ParticleView, Population, TruncatedAt, view

__all__ = [
    "BadWindow",
    "ErgodicAccumulator",
    "ExtremeRecord",
    "InsufficientPath",
    "OutOfWindow",
    "TubeSpec",
    "accumulate",
    "centering",
    "derivative_sum",
    "derivative_terms_sum",
    "extremes",
    "localized",
    "tube_envelopes",
    "window_mask",
    "window_set",
]


class BadWindow(ValueError):
    pass


class InsufficientPath(ValueError):
    pass


class OutOfWindow(ValueError):
    pass


def derivative_terms_sum(positions, t: float) -> float:
    """``sum (sqrt(2) t - x) exp(sqrt(2) (x - sqrt(2) t))`` over ``positions``.

    Terms are formed from their logarithmic weights and added with
    :func:`math.fsum`; weights far below the front underflow to 0.
    """
    x = np.asarray(positions, dtype=float)
    if x.size == 0:
        return 0.0
    gap = SQRT2 * t - x
    log_w = -SQRT2 * gap
    terms = gap * np.exp(log_w)
    return math.fsum(terms.tolist())


def derivative_sum(pop: Population, selector=ALL) -> float:
    """Z_t over ``view(pop, selector)`` at ``pop.time`` (Z~_t for SURVIVING)."""
    sel = selector if isinstance(selector, ParticleView) else view(pop, selector)
    return derivative_terms_sum(sel.positions, pop.time)


# window sets ------------------------------------------------------------

def window_mask(pop: Population, s: float, s2: float) -> np.ndarray:
    if not (0.0 <= s <= s2 <= pop.time + 1e-12):
        raise BadWindow(f"need 0 <= s <= s2 <= t, got s={s}, s2={s2}, t={pop.time}")
    a = pop.hit_a
    with np.errstate(invalid="ignore"):
        inside = (a >= s) & (a < s2)
    if s2 >= pop.time - 1e-12:
        inside |= (a >= s) & (a <= s2)
    return inside


def window_set(pop: Population, s: float, s2: float) -> ParticleView:
    """Particles whose lineage first crossed the barrier in ``[s, s2)``.

    The first crossing is known up to its knot segment; membership is
    decided by where that segment starts.  With ``s2 = t`` this is the set
    ``TruncatedAt(s)`` minus ``SURVIVING``.
    """
    return ParticleView(pop, window_mask(pop, s, s2))


# extremes ---------------------------------------------------------------

@dataclass
class ExtremeRecord:
    """Centered maxima at time ``t``; ``None`` marks an empty set."""

    t: float
    max_all: Optional[float]
    max_surviving: Optional[float] = None
    max_truncated: Optional[float] = None
    max_window: Optional[float] = None
    z_tilde: Optional[float] = None


def _centered_max(x: np.ndarray, m: float) -> Optional[float]:
    return float(x.max()) - m if x.size else None


def extremes(pop: Population, s: Optional[float] = None, with_z: bool = True) -> ExtremeRecord:
    """Centered maxima of N_t, the surviving set, and (if ``s`` is given)
    the truncated set and the window set ``[s, t]``."""
    t = pop.time
    m = centering(t)
    pos = pop.pos
    surv = np.isnan(pop.hit_a)
    rec = ExtremeRecord(t=t, max_all=_centered_max(pos, m),
                        max_surviving=_centered_max(pos[surv], m))
    if s is not None:
        rec.max_truncated = _centered_max(pos[view(pop, TruncatedAt(s)).mask], m)
        rec.max_window = _centered_max(pos[window_mask(pop, s, t)], m)
    if with_z:
        rec.z_tilde = derivative_terms_sum(pos[surv], t)
    return rec


# localization -----------------------------------------------------------

@dataclass(frozen=True)
class TubeSpec:
    """Tube ``F_beta(s) <= X(s) <= F_alpha(s)`` checked on ``(r, t - r)``.

    ``F_gamma(s) = x + (s/t) m_t - min(s, t - s)**gamma``.
    """

    alpha: float
    beta: float
    r: float
    t: float
    x: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 0.5 < self.beta < 1.0):
            raise BadArgs("need 0 < alpha < 1/2 < beta < 1")
        if not (self.r > 0 and self.t > 0):
            raise BadArgs("need r > 0 and t > 0")

    @property
    def in_regime(self) -> bool:
        return self.t > 3 * self.r


def tube_envelopes(tube: TubeSpec, s):
    """Lower (beta) and upper (alpha) envelopes at times ``s``."""
    s = np.asarray(s, dtype=float)
    base = tube.x + s / tube.t * centering(tube.t)
    gap = np.minimum(s, tube.t - s)
    gap = np.maximum(gap, 0.0)
    return base - gap**tube.beta, base - gap**tube.alpha


def localized(rec: ParticleRecord, tube: TubeSpec) -> bool:
    """True iff every lineage knot with time in ``(r, t - r)`` lies in the tube.

    Only knots are checked; the path between knots is not.
    """
    lo_t, hi_t = tube.r, tube.t - tube.r
    if hi_t <= lo_t:
        return True
    path = rec.path
    if path.size == 0 or path[0, 0] > lo_t or path[-1, 0] < hi_t:
        raise InsufficientPath(f"path does not cover ({lo_t}, {hi_t})")
    times, xs = path[:, 0], path[:, 1]
    inside = (times > lo_t) & (times < hi_t)
    lower, upper = tube_envelopes(tube, times[inside])
    return bool(np.all((lower <= xs[inside]) & (xs[inside] <= upper)))


# ergodic accumulator ----------------------------------------------------

@dataclass
class ErgodicAccumulator:
    """Time spent with the surviving centered maximum at or below each z.

    ``occupancy[i]`` accumulates ``dt * 1{M~_t <= z_grid[i]}`` by
    left-endpoint Riemann sums over ``window``.  An empty surviving set
    contributes 0 for every z.  Accumulators over disjoint windows merge by
    addition.
    """

    z_grid: np.ndarray
    window: tuple
    occupancy: np.ndarray = None
    elapsed: float = 0.0
    z_tilde_trace: list = field(default_factory=list)

    def __post_init__(self):
        self.z_grid = np.asarray(self.z_grid, dtype=float)
        if np.any(np.diff(self.z_grid) <= 0):
            raise ValueError("z_grid must be strictly increasing")
        if self.occupancy is None:
            self.occupancy = np.zeros(len(self.z_grid))

    @property
    def span(self) -> float:
        return self.window[1] - self.window[0]

    def cdf(self) -> np.ndarray:
        """Occupancy normalized by the window length."""
        return self.occupancy / self.span

    def merge(self, other: "ErgodicAccumulator") -> "ErgodicAccumulator":
        if not np.array_equal(self.z_grid, other.z_grid):
            raise ValueError("cannot merge accumulators on different z grids")
        lo = min(self.window[0], other.window[0])
        hi = max(self.window[1], other.window[1])
        trace = sorted(self.z_tilde_trace + other.z_tilde_trace)
        return ErgodicAccumulator(self.z_grid, (lo, hi), self.occupancy + other.occupancy,
                                  self.elapsed + other.elapsed, trace)

    @classmethod
    def empty(cls, z_grid, window=(0.0, 0.0)):
        return cls(np.asarray(z_grid, dtype=float), window)


def accumulate(acc: ErgodicAccumulator, rec: ExtremeRecord, dt: float) -> ErgodicAccumulator:
    """Add one left-endpoint slice ``[rec.t, rec.t + dt)`` (in place)."""
    lo, hi = acc.window
    if rec.t < lo - 1e-9 or rec.t + dt > hi + 1e-9:
        raise OutOfWindow(f"slice [{rec.t}, {rec.t + dt}) outside window {acc.window}")
    if rec.max_surviving is not None:
        acc.occupancy += dt * (rec.max_surviving <= acc.z_grid)
    acc.elapsed += dt
    if rec.z_tilde is not None:
        acc.z_tilde_trace.append((rec.t, rec.z_tilde))
    return acc
