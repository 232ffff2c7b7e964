"""Fine-grid Monte Carlo check of the bridge crossing probability.

A trial draws a Brownian bridge on the uniform grid of spacing ``step`` and
records whether it went non-positive relative to the line at a grid point.
The distance to a line is itself a Brownian bridge, so only the two endpoint
distances and the duration matter.

The grid path is built in two levels.  Nodes every ``block`` fine steps are
drawn first; the fine points inside a block are then a Brownian bridge
between its two nodes and are only drawn when the block comes near the line.
A block is skipped when both nodes are more than ``8.5 sd`` above the line,
``sd = sqrt(block * step / 4)`` being the largest standard deviation of an
interior point; by a union bound over its interior points the chance that a
skipped block hides a grid crossing is below 1e-15.  This bound uses only
Gaussian tails, not the crossing formula under test.

Discrete monitoring misses excursions between grid points, so the grid
frequency is biased down by a term proportional to ``sqrt(step)``.  The same
paths are also monitored on the 4x coarser subgrid and the frequencies are
combined as ``2 p_fine - p_coarse``, which cancels that term.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from ..analytic import SegmentDraw, bridge_crossing_prob

# (t0, t1, x0, x1, rho); the first entry is the reference case e^-2
PARAMETER_SETS = (
    (0.0, 1.0, 1.0, 1.0, 0.0),
    (0.0, 0.25, 0.5, 0.5, 0.0),
    (0.0, 0.25, 0.3, 0.4, 0.0),
    (0.0, 0.5, 0.6, 0.9, 0.5),
    (1.0, 1.25, -0.1, -0.3, -0.5),
    (0.0, 0.2, 0.3, 0.3, 0.0),
    (0.0, 0.5, 0.5, 1.0, 1.0),
    (0.0, 0.3, 0.8, 0.3, 0.3),
    (0.0, 0.25, 0.25, 0.5, -1.0),
    (0.0, 0.1, 0.1, 0.1, 0.0),
)

_SKIP_SDS = 8.5
_BLOCK = 32
_SUB = 4


@numba.njit(cache=True)
def _paths(z, trials, n_steps, h, d0, d1, block, sub, skip):
    """Run up to ``trials`` paths consuming normals from ``z``.

    Stops early if ``z`` might run out inside the next path.  Returns
    ``(paths done, fine hits, subgrid hits, normals used)``.
    """
    n_nodes = (n_steps + block - 1) // block
    duration = n_steps * h
    nodes = np.empty(n_nodes + 1)
    idx = np.empty(n_nodes + 1, dtype=np.int64)
    worst = n_nodes + n_steps
    p = 0
    done = 0
    fine = 0
    coarse = 0
    fine_walk = np.empty(block + 1)
    sdh = math.sqrt(h)
    while done < trials and p + worst <= z.shape[0]:
        # nodes of the walk, then pin to a bridge
        nodes[0] = 0.0
        idx[0] = 0
        for j in range(1, n_nodes + 1):
            k = min(j * block, n_steps)
            idx[j] = k
            nodes[j] = nodes[j - 1] + math.sqrt((k - idx[j - 1]) * h) * z[p]
            p += 1
        end = nodes[n_nodes]
        for j in range(n_nodes + 1):
            nodes[j] = d0 + nodes[j] - (idx[j] * h / duration) * (end - (d1 - d0))
        hit_f = False
        hit_c = False
        for j in range(n_nodes + 1):
            if nodes[j] <= 0.0:
                hit_f = True
                if idx[j] % sub == 0:
                    hit_c = True
                    break
        if not hit_c:
            for j in range(n_nodes):
                a = nodes[j]
                b = nodes[j + 1]
                length = idx[j + 1] - idx[j]
                if min(a, b) > skip:
                    continue
                fine_walk[0] = 0.0
                for k in range(1, length + 1):
                    fine_walk[k] = fine_walk[k - 1] + sdh * z[p]
                    p += 1
                tail = fine_walk[length] - (b - a)
                for k in range(1, length):
                    v = a + fine_walk[k] - (k / length) * tail
                    if v <= 0.0:
                        hit_f = True
                        if (idx[j] + k) % sub == 0:
                            hit_c = True
                            break
                if hit_c:
                    break
        if hit_f:
            fine += 1
        if hit_c:
            coarse += 1
        done += 1
    return done, fine, coarse, p


def grid_hit_counts(d0, d1, duration, trials, seed, step=1e-4, block=_BLOCK, sub=_SUB,
                    chunk=1 << 22):
    """Counts of paths touching the line on the fine grid and on every
    ``sub``-th grid point, for a bridge with endpoint distances ``d0, d1``."""
    if block % sub:
        raise ValueError("block must be a multiple of sub")
    n_steps = int(round(duration / step))
    h = duration / n_steps
    skip = _SKIP_SDS * math.sqrt(block * h / 4.0)
    rng = np.random.default_rng(seed)
    chunk = max(chunk, 2 * (n_steps + n_steps // block + 2))
    left, fine, coarse = int(trials), 0, 0
    while left:
        z = rng.standard_normal(chunk)
        done, f, c, _ = _paths(z, left, n_steps, h, float(d0), float(d1), block, sub, skip)
        left -= done
        fine += f
        coarse += c
    return fine, coarse, h


@dataclass
class BridgeCheckRow:
    t0: float
    t1: float
    x0: float
    x1: float
    rho: float
    analytic: float
    raw_freq: float
    coarse_freq: float
    extrapolated: float
    se: float
    z_score: float
    trials: int
    step: float

    @property
    def passed(self) -> bool:
        return abs(self.z_score) <= 3.0

    @property
    def raw_z_score(self) -> float:
        return (self.raw_freq - self.analytic) / self.se


def bridge_check_one(t0, t1, x0, x1, rho, trials, seed, step=1e-4) -> BridgeCheckRow:
    seg = SegmentDraw(t0, t1, x0, x1)
    exact = bridge_crossing_prob(seg, rho)
    d0, d1 = x0 - rho * t0, x1 - rho * t1
    if d0 <= 0 or d1 <= 0:
        fine = coarse = int(trials)
        h = step
    else:
        fine, coarse, h = grid_hit_counts(d0, d1, t1 - t0, trials, seed, step)
    pf, pc = fine / trials, coarse / trials
    est = 2.0 * pf - pc
    # per trial 2*1{fine} - 1{sub}: 1 if both, 2 if fine only, else 0
    m2 = pc + 4.0 * (pf - pc)
    var = max(m2 - est * est, exact * (1.0 - exact), 1.0 / trials)
    se = math.sqrt(var / trials)
    return BridgeCheckRow(t0, t1, x0, x1, rho, exact, pf, pc, est, se,
                          (est - exact) / se, int(trials), h)


def bridge_check(trials=100_000, seed=2024, step=1e-4, sets=PARAMETER_SETS):
    return [bridge_check_one(*p, trials=trials, seed=[seed, i], step=step)
            for i, p in enumerate(sets)]
