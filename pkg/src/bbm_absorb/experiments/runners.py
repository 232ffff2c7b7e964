"""The desk-scale experiments.

Every runner takes an :class:`ExperimentConfig` and returns a report whose
``tables()`` and ``summary()`` feed :func:`~bbm_absorb.experiments.emit.emit`.
Replicas are independent jobs keyed by their index; results are reduced in
index order, so a report does not depend on ``threads``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..analytic import SQRT2, centering, line_hit_by
from ..observables import ErgodicAccumulator, accumulate, derivative_terms_sum, extremes
from ..process import BarrierMode, BarrierSpec, Phase, SimConfig, classify_phase
from ..simulator import run_replica
from ..wave import shoot_slope, solve_free_wave, solve_oneside_wave
from .bridge import bridge_check
from .config import ConfigError, ExperimentConfig
from .estimators import AllExtinct, DegenerateFit, fit_gumbel_slope, mean_and_se, wilson_interval
from .farm import farm_map, replica_seed

__all__ = [
    "BridgeReport",
    "ErgodicReport",
    "ExtinctionReport",
    "MartingaleReport",
    "WaveReport",
    "WindowTailReport",
    "run",
    "run_bridge_check",
    "run_ergodic",
    "run_martingale",
    "run_phase",
    "run_survival",
    "run_wave",
    "run_window_tail",
]


def _check_name(cfg: ExperimentConfig, *names):
    if cfg.name not in names:
        raise ConfigError(f"runner for {names} got a {cfg.name!r} config")


def _on_grid(t: float, step: float) -> bool:
    k = round(t / step)
    return abs(t - k * step) < 1e-9


def _slices(sim: SimConfig):
    """Left-endpoint slice length for each observation time."""
    times = sim.observation_times()
    return dict(zip(times[:-1].tolist(), np.diff(times).tolist()))


# ergodic ----------------------------------------------------------------

@dataclass
class ErgodicReplica:
    index: int
    seed: int
    extinct: bool
    capped: bool
    extinction_time: Optional[float]
    occupancy: np.ndarray
    z_tilde_final: Optional[float]
    trace: list  # (t, observable, value)


def _ergodic_replica(job) -> ErgodicReplica:
    cfg, index = job
    sim = dataclasses.replace(cfg.sim, seed=replica_seed(cfg.sim.seed, index))
    T = sim.horizon
    lo = cfg.burn_in_fraction * T
    acc = ErgodicAccumulator(cfg.z_grid, (lo, T))
    slices = _slices(sim)
    trace = []

    def observe(pop):
        t = pop.time
        traced = _on_grid(t, cfg.trace_step)
        rec = extremes(pop, with_z=traced)
        if traced:
            trace.append((t, "z_tilde", rec.z_tilde))
            trace.append((t, "max_surviving", rec.max_surviving))
        if lo - 1e-9 <= t < T - 1e-9:
            accumulate(acc, rec, slices[t])

    out = run_replica(sim, observe)
    z_final = None
    if not out.extinct and not out.capped:
        z_final = next((v for t, name, v in reversed(trace)
                        if name == "z_tilde" and abs(t - T) < 1e-9), None)
    return ErgodicReplica(index, sim.seed, out.extinct, out.capped, out.extinction_time,
                          acc.occupancy.copy(), z_final, trace)


@dataclass
class ErgodicReport:
    config: ExperimentConfig
    z_grid: np.ndarray
    cdf_conditioned: np.ndarray
    cdf_unconditioned: np.ndarray
    slope: float
    slope_ci: tuple
    intercept: float
    intercept_spread: float
    pooled_slope: Optional[float]
    z_tilde_final: Optional[float]
    extinct_count: int
    capped_count: int
    surviving_count: int
    replicas: List[ErgodicReplica] = field(repr=False, default_factory=list)
    replica_intercepts: dict = field(default_factory=dict)
    replica_cdfs: Optional[np.ndarray] = field(repr=False, default=None)

    def tables(self):
        cdf_rows = [(float(z), float(c), float(u)) for z, c, u in
                    zip(self.z_grid, self.cdf_conditioned, self.cdf_unconditioned)]
        rep_rows = [(r.index, r.seed, int(r.extinct), int(r.capped), r.extinction_time,
                     r.z_tilde_final, self.replica_intercepts.get(r.index))
                    for r in self.replicas]
        trace_rows = [(r.index, t, name, v) for r in self.replicas for t, name, v in r.trace]
        return {
            "cdf": (("z", "F_conditioned", "F_unconditioned"), cdf_rows),
            "replicas": (("replica", "seed", "extinct", "capped", "extinction_time",
                          "z_tilde_final", "intercept"), rep_rows),
            "trace": (("replica", "t", "observable", "value"), trace_rows),
        }

    def summary(self):
        return {
            "slope": self.slope,
            "slope_ci": list(self.slope_ci),
            "expected_slope": -SQRT2,
            "intercept": self.intercept,
            "intercept_spread": self.intercept_spread,
            "pooled_slope": self.pooled_slope,
            "z_tilde_final": self.z_tilde_final,
            "extinct_count": self.extinct_count,
            "capped_count": self.capped_count,
            "surviving_count": self.surviving_count,
        }


def ergodic_fit(z_grid, replica_cdfs, config=None, replicas=(), extinct=0, capped=0,
                unconditioned=None, z_tilde_final=None) -> ErgodicReport:
    """Fit the common slope across surviving replicas' occupancy CDFs."""
    F = np.atleast_2d(np.asarray(replica_cdfs, dtype=float))
    if F.shape[0] == 0 or F.size == 0:
        raise AllExtinct("no surviving replica")
    fit = fit_gumbel_slope(z_grid, F)
    pooled = F.mean(axis=0)
    try:
        pooled_slope = fit_gumbel_slope(z_grid, pooled).slope
    except DegenerateFit:
        pooled_slope = None
    a = fit.intercepts
    intercepts = {}
    if replicas:
        intercepts = {replicas[i].index: float(v) for i, v in zip(fit.curve_index, a)}
    return ErgodicReport(
        config=config, z_grid=np.asarray(z_grid, dtype=float), cdf_conditioned=pooled,
        cdf_unconditioned=pooled if unconditioned is None else unconditioned,
        slope=fit.slope, slope_ci=fit.slope_ci, intercept=float(a.mean()),
        intercept_spread=float(a.std(ddof=1)) if a.size > 1 else 0.0,
        pooled_slope=pooled_slope, z_tilde_final=z_tilde_final,
        extinct_count=extinct, capped_count=capped, surviving_count=F.shape[0],
        replicas=list(replicas), replica_intercepts=intercepts, replica_cdfs=F)


def run_ergodic(cfg: ExperimentConfig, max_rounds: int = 4) -> ErgodicReport:
    """Occupancy CDF of the surviving centered maximum over ``[eps T, T]``.

    Replicas are run in rounds of ``cfg.replicas`` until at least
    ``cfg.min_surviving`` have survived (at most ``max_rounds`` rounds).
    """
    _check_name(cfg, "ergodic")
    if len(cfg.z_grid) < 3:
        raise ConfigError("ergodic needs a z_grid")
    results: List[ErgodicReplica] = []
    for r in range(max_rounds):
        jobs = [(cfg, i) for i in range(r * cfg.replicas, (r + 1) * cfg.replicas)]
        results += farm_map(_ergodic_replica, jobs, cfg.threads)
        alive = [x for x in results if not x.extinct and not x.capped]
        if len(alive) >= cfg.min_surviving:
            break
    alive = [x for x in results if not x.extinct and not x.capped]
    if not alive:
        raise AllExtinct(f"all {len(results)} replicas died out or were capped")
    span = cfg.sim.horizon * (1.0 - cfg.burn_in_fraction)
    cdfs = np.array([x.occupancy / span for x in alive])
    uncapped = [x for x in results if not x.capped]
    uncond = np.mean([x.occupancy / span for x in uncapped], axis=0)
    z_fin = [x.z_tilde_final for x in alive if x.z_tilde_final is not None]
    return ergodic_fit(cfg.z_grid, cdfs, cfg, alive,
                       extinct=sum(x.extinct for x in results),
                       capped=sum(x.capped for x in results),
                       unconditioned=uncond,
                       z_tilde_final=float(np.mean(z_fin)) if z_fin else None)


# window tail ------------------------------------------------------------

@dataclass
class WindowReplica:
    index: int
    occupancy: np.ndarray  # per sweep value
    violations: int
    checks: int


def _window_replica(job) -> WindowReplica:
    cfg, index, sweep = job
    sim = dataclasses.replace(cfg.sim, seed=replica_seed(cfg.sim.seed, index))
    T = sim.horizon
    lo = cfg.burn_in_fraction * T
    slices = _slices(sim)
    occ = np.zeros(len(sweep))
    counts = [0, 0]

    def observe(pop):
        t = pop.time
        m = centering(t)
        a = pop.hit_a
        surv = np.isnan(a)
        with np.errstate(invalid="ignore"):
            masks = [(~(a < s), (a >= s)) if s <= t + 1e-12 else (None, None) for s in sweep]
        bad = 0
        prev = None
        for s, (trunc, win) in zip(sweep, masks):
            if trunc is None:
                continue
            # surviving <= trunc(s') <= trunc(s) <= all, trunc(s) \ surviving = window
            bad += int(np.any(surv & ~trunc))
            if prev is not None:
                bad += int(np.any(trunc & ~prev))
            bad += int(not np.array_equal(trunc & ~surv, win))
            mt = pop.pos[trunc].max() if trunc.any() else -np.inf
            ms = pop.pos[surv].max() if surv.any() else -np.inf
            mw = pop.pos[win].max() if win.any() else -np.inf
            bad += int(mt != max(ms, mw))
            prev = trunc
        counts[0] += bad
        counts[1] += 1
        if lo - 1e-9 <= t < T - 1e-9:
            dt = slices[t]
            for k, (s, (_, win)) in enumerate(zip(sweep, masks)):
                if win is not None and win.any() and pop.pos[win].max() - m > cfg.z_threshold:
                    occ[k] += dt

    run_replica(sim, observe)
    return WindowReplica(index, occ, counts[0], counts[1])


@dataclass
class WindowTailReport:
    config: ExperimentConfig
    sweep: tuple
    occupancy: np.ndarray  # pooled fraction of [eps T, T] per sweep value
    per_replica: np.ndarray
    identity_violations: int
    identity_checks: int

    def occupancy_at(self, s: float) -> float:
        return float(self.occupancy[list(self.sweep).index(s)])

    def tables(self):
        rows = [(float(s), float(o), float(self.per_replica[:, k].std(ddof=1))
                 if self.per_replica.shape[0] > 1 else 0.0)
                for k, (s, o) in enumerate(zip(self.sweep, self.occupancy))]
        rep = [(i, float(s), float(self.per_replica[i, k]))
               for i in range(self.per_replica.shape[0]) for k, s in enumerate(self.sweep)]
        return {
            "window_tail": (("s", "occupancy", "replica_sd"), rows),
            "replicas": (("replica", "s", "occupancy"), rep),
        }

    def summary(self):
        return {
            "sweep": list(self.sweep),
            "occupancy": self.occupancy.tolist(),
            "truncation_time": self.config.truncation_time,
            "truncation_exponent_note": "truncation_time defaults to T**0.4; the exponent is a choice",
            "identity_violations": self.identity_violations,
            "identity_checks": self.identity_checks,
        }


def run_window_tail(cfg: ExperimentConfig) -> WindowTailReport:
    """Time fraction with the window-set maximum above ``m_t + z``, for each
    window start ``s`` in the sweep (plus ``truncation_time``)."""
    _check_name(cfg, "window-tail")
    if cfg.truncation_time is None:
        raise ConfigError("window-tail needs truncation_time")
    if cfg.sim.barrier.mode is not BarrierMode.TRUNCATED:
        raise ConfigError("window-tail needs a truncated barrier")
    sweep = tuple(sorted(set(cfg.s_sweep) | {float(cfg.truncation_time)}))
    jobs = [(cfg, i, sweep) for i in range(cfg.replicas)]
    reps = farm_map(_window_replica, jobs, cfg.threads)
    span = cfg.sim.horizon * (1.0 - cfg.burn_in_fraction)
    per = np.array([r.occupancy / span for r in reps])
    return WindowTailReport(cfg, sweep, per.mean(axis=0), per,
                            sum(r.violations for r in reps), sum(r.checks for r in reps))


# survival / phase --------------------------------------------------------

def _extinction_replica(job):
    sim, index = job
    out = run_replica(dataclasses.replace(sim, seed=replica_seed(sim.seed, index)))
    return index, out.extinct, out.capped, out.extinction_time


def _lineage_replica(job):
    sim, index = job
    out = run_replica(dataclasses.replace(sim, seed=replica_seed(sim.seed, index)))
    return out.extinct


def lineage_hit_frequency(x: float, slope: float, horizon: float, trials: int, seed: int,
                          threads: int = 1) -> float:
    """Fraction of single non-branching lineages from ``x`` that touch the
    line of ``slope`` by ``horizon`` (simulator in its no-branching mode)."""
    sim = SimConfig(initial_position=x, horizon=horizon, obs_grid_step=horizon, seed=seed,
                    barrier=BarrierSpec.full(slope), branching=False)
    hits = farm_map(_lineage_replica, [(sim, i) for i in range(trials)], threads)
    return sum(hits) / trials


@dataclass
class ExtinctionReport:
    config: ExperimentConfig
    phase: Phase
    replicas: int
    extinct: int
    capped: int
    extinction_ci: tuple
    g_x: Optional[float]  # ODE extinction probability (supercritical only)
    rows: list = field(repr=False, default_factory=list)
    lineage: dict = field(default_factory=dict)

    @property
    def extinction_frequency(self) -> float:
        return self.extinct / self.replicas

    @property
    def survival_frequency(self) -> float:
        return 1.0 - self.extinction_frequency

    @property
    def survival_se(self) -> float:
        p = self.survival_frequency
        return math.sqrt(max(p * (1 - p), 1e-12) / self.replicas)

    def tables(self):
        return {
            "replicas": (("replica", "extinct", "capped", "extinction_time"), self.rows),
        }

    def summary(self):
        return {
            "phase": self.phase.value,
            "replicas": self.replicas,
            "extinct": self.extinct,
            "capped": self.capped,
            "capped_counted_as_surviving": True,
            "extinction_frequency": self.extinction_frequency,
            "extinction_ci": list(self.extinction_ci),
            "survival_frequency": self.survival_frequency,
            "survival_se": self.survival_se,
            "g_x": self.g_x,
            "survival_probability_ode": None if self.g_x is None else 1.0 - self.g_x,
            "lineage": self.lineage,
        }


def _extinction_study(cfg: ExperimentConfig) -> ExtinctionReport:
    sim = cfg.sim
    if sim.barrier.mode is not BarrierMode.FULL:
        raise ConfigError(f"{cfg.name} needs a full barrier")
    rows = farm_map(_extinction_replica, [(sim, i) for i in range(cfg.replicas)], cfg.threads)
    extinct = sum(r[1] for r in rows)
    capped = sum(r[2] for r in rows)
    phase = classify_phase(sim.barrier)
    g_x = None
    if phase is Phase.SUPERCRITICAL:
        g_x = float(solve_oneside_wave(sim.barrier.slope, law=sim.offspring)(sim.initial_position))
    return ExtinctionReport(cfg, phase, cfg.replicas, extinct, capped,
                            wilson_interval(extinct, cfg.replicas), g_x,
                            rows=[(i, int(e), int(c), t) for i, e, c, t in rows])


def run_survival(cfg: ExperimentConfig) -> ExtinctionReport:
    """Extinction frequency by the horizon against ``g(x)``; with
    ``cfg.trials > 0`` also the single-lineage first-passage check."""
    _check_name(cfg, "survival")
    rep = _extinction_study(cfg)
    if cfg.trials > 0:
        x, rho = cfg.sim.initial_position, cfg.sim.barrier.slope
        horizon = cfg.sim.horizon
        freq = lineage_hit_frequency(x, rho, horizon, cfg.trials, cfg.sim.seed, cfg.threads)
        rep.lineage = {
            "trials": cfg.trials,
            "horizon": horizon,
            "hit_frequency": freq,
            "hit_se": math.sqrt(max(freq * (1 - freq), 1e-12) / cfg.trials),
            # a plain lineage's distance to the line drifts at -rho
            "exact_finite_horizon": line_hit_by(x, -rho, horizon),
            "exp_minus_2_c_x": math.exp(-2.0 * (SQRT2 - rho) * x),
        }
    return rep


def run_phase(cfg: ExperimentConfig) -> ExtinctionReport:
    """Extinction frequency by the horizon at the configured slope."""
    _check_name(cfg, "phase")
    return _extinction_study(cfg)


# martingale ---------------------------------------------------------------

def _martingale_replica(job):
    sim, index = job
    values = []

    def observe(pop):
        values.append((pop.time, derivative_terms_sum(pop.pos, pop.time)))

    out = run_replica(dataclasses.replace(sim, seed=replica_seed(sim.seed, index)), observe)
    return values, out.capped


@dataclass
class MartingaleReport:
    config: ExperimentConfig
    z0: float
    times: np.ndarray
    means: np.ndarray
    ses: np.ndarray
    values: np.ndarray = field(repr=False, default=None)  # replicas x times

    @property
    def z_scores(self) -> np.ndarray:
        return (self.means - self.z0) / self.ses

    def tables(self):
        rows = [(float(t), float(m), float(s), float(z))
                for t, m, s, z in zip(self.times, self.means, self.ses, self.z_scores)]
        trace = [(i, float(t), "z", float(self.values[i, k]))
                 for i in range(self.values.shape[0]) for k, t in enumerate(self.times)]
        return {
            "martingale": (("t", "mean", "se", "z_score"), rows),
            "trace": (("replica", "t", "observable", "value"), trace),
        }

    def summary(self):
        return {"z0": self.z0, "times": self.times.tolist(), "means": self.means.tolist(),
                "ses": self.ses.tolist(), "z_scores": self.z_scores.tolist()}


def run_martingale(cfg: ExperimentConfig) -> MartingaleReport:
    """Sample mean of Z_t at the observation times against Z_0."""
    _check_name(cfg, "martingale")
    sim = cfg.sim
    if sim.barrier.mode is not BarrierMode.NONE:
        raise ConfigError("martingale needs barrier mode none")
    times = sim.observation_times()
    out = farm_map(_martingale_replica, [(sim, i) for i in range(cfg.replicas)], cfg.threads)
    if any(c for _, c in out):
        raise RuntimeError("a martingale replica hit the particle cap")
    vals = np.array([[v for _, v in values] for values, _ in out])
    stats = [mean_and_se(vals[:, k]) for k in range(len(times))]
    z0 = derivative_terms_sum([sim.initial_position], 0.0)
    return MartingaleReport(cfg, z0, times, np.array([m for m, _ in stats]),
                            np.array([s for _, s in stats]), vals)


# bridge check ---------------------------------------------------------------

@dataclass
class BridgeReport:
    config: ExperimentConfig
    rows: list

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def tables(self):
        cols = ("t0", "t1", "x0", "x1", "rho", "analytic", "raw_freq", "coarse_freq",
                "extrapolated", "se", "z_score", "trials", "step")
        return {"bridge": (cols, [tuple(getattr(r, c) for c in cols) for r in self.rows])}

    def summary(self):
        return {"all_within_3se": self.all_passed,
                "max_abs_z": max((abs(r.z_score) for r in self.rows), default=0.0),
                "max_abs_raw_z": max((abs(r.raw_z_score) for r in self.rows), default=0.0)}


def run_bridge_check(cfg: ExperimentConfig) -> BridgeReport:
    _check_name(cfg, "bridge-check")
    trials = cfg.trials or 100_000
    return BridgeReport(cfg, bridge_check(trials=trials, seed=cfg.sim.seed))


# wave ---------------------------------------------------------------------

@dataclass
class WaveReport:
    config: ExperimentConfig
    rho: float
    g_prime_0: float
    g_prime_0_shooting: float
    residual: float
    g_at_x_max: float
    refinement_diff: float
    grid: np.ndarray = field(repr=False, default=None)
    values: np.ndarray = field(repr=False, default=None)
    free_grid: np.ndarray = field(repr=False, default=None)
    free_values: np.ndarray = field(repr=False, default=None)
    free_slope_0: float = float("nan")
    free_residual: float = float("nan")

    def tables(self):
        return {
            "oneside_wave": (("x", "g"), list(zip(self.grid.tolist(), self.values.tolist()))),
            "free_wave": (("z", "w"), list(zip(self.free_grid.tolist(),
                                                 self.free_values.tolist()))),
        }

    def summary(self):
        x = self.config.sim.initial_position
        g = float(np.interp(x, self.grid, self.values))
        return {
            "rho": self.rho, "g_prime_0": self.g_prime_0,
            "g_prime_0_shooting": self.g_prime_0_shooting, "residual": self.residual,
            "g_at_x_max": self.g_at_x_max, "refinement_diff": self.refinement_diff,
            "x": x, "g_x": g, "survival_x": 1.0 - g,
            "exp_minus_2_c_x": math.exp(-2.0 * (SQRT2 - self.rho) * x),
            "free_wave_slope_0": self.free_slope_0, "free_wave_residual": self.free_residual,
        }


def run_wave(cfg: ExperimentConfig) -> WaveReport:
    """One-sided wave at the configured slope plus the free critical wave."""
    _check_name(cfg, "wave")
    rho = cfg.sim.barrier.slope
    law = cfg.sim.offspring
    sol = solve_oneside_wave(rho, law=law)
    fine = solve_oneside_wave(rho, law=law, n_grid=2 * len(sol.grid) - 1)
    diff = float(np.max(np.abs(fine.values[::2] - sol.values)))
    try:
        shot = shoot_slope(rho, law)
    except Exception:  # the shooter is only a cross-check
        shot = float("nan")
    free = solve_free_wave(law=law)
    return WaveReport(cfg, rho, sol.derivative_at_zero, shot, sol.residual_norm,
                      float(sol.values[-1]), diff, sol.grid, sol.values,
                      free.grid, free.values, free.derivative_at_zero, free.residual_norm)


RUNNERS = {
    "ergodic": run_ergodic,
    "window-tail": run_window_tail,
    "survival": run_survival,
    "phase": run_phase,
    "martingale": run_martingale,
    "bridge-check": run_bridge_check,
    "wave": run_wave,
}


def run(cfg: ExperimentConfig):
    return RUNNERS[cfg.name](cfg)
