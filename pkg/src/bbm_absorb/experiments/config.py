"""Experiment configuration and its TOML / dict forms."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from ..process import BarrierMode, BarrierSpec, OffspringLaw, SimConfig

EXPERIMENTS = ("ergodic", "survival", "phase", "martingale", "window-tail", "bridge-check", "wave")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    sim: SimConfig
    replicas: int = 64
    z_grid: tuple = ()
    truncation_time: Optional[float] = None
    burn_in_fraction: float = 0.2
    output_dir: str = "out"
    threads: int = 1
    min_surviving: int = 0
    s_sweep: tuple = ()
    z_threshold: float = 0.0
    trace_step: float = 0.5
    trials: int = 0

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.name!r}")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if len(self.z_grid) and np.any(np.diff(self.z_grid) <= 0):
            raise ConfigError("z_grid must be strictly increasing")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ConfigError("burn_in_fraction must lie in [0, 1)")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def replace_sim(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, sim=dataclasses.replace(self.sim, **changes))

    # dict / TOML ------------------------------------------------------

    def to_dict(self) -> dict:
        sim = self.sim
        b = sim.barrier
        return {
            "sim": {
                "initial_position": sim.initial_position,
                "horizon": sim.horizon,
                "obs_grid_step": sim.obs_grid_step,
                "particle_cap": sim.particle_cap,
                "seed": sim.seed,
                "offspring": {str(k): p for k, p in sim.offspring.probabilities},
                "branching": sim.branching,
            },
            "barrier": {
                "slope": b.slope,
                "mode": b.mode.value,
                **({"truncation": b.truncation} if b.truncation is not None else {}),
            },
            "experiment": {
                "name": self.name,
                "replicas": self.replicas,
                "z_grid": list(self.z_grid),
                **({"truncation_time": self.truncation_time}
                   if self.truncation_time is not None else {}),
                "burn_in_fraction": self.burn_in_fraction,
                "output_dir": self.output_dir,
                "threads": self.threads,
                "min_surviving": self.min_surviving,
                "s_sweep": list(self.s_sweep),
                "z_threshold": self.z_threshold,
                "trace_step": self.trace_step,
                "trials": self.trials,
            },
        }

    @classmethod
    def from_dict(cls, data: dict, base: "ExperimentConfig" = None) -> "ExperimentConfig":
        """Build a config from the three-section dict; keys missing from
        ``data`` fall back to ``base`` (or to the defaults)."""
        allowed = {"sim", "barrier", "experiment"}
        extra = set(data) - allowed
        if extra:
            raise ConfigError(f"unknown sections {sorted(extra)}")
        merged = base.to_dict() if base is not None else ExperimentConfig(
            "ergodic", SimConfig()).to_dict()
        for section in allowed:
            given = data.get(section, {})
            unknown = set(given) - _KEYS[section]
            if unknown:
                raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
            merged[section].update(given)
        if merged["barrier"]["mode"] != BarrierMode.TRUNCATED.value:
            merged["barrier"].pop("truncation", None)
        s, b, e = merged["sim"], merged["barrier"], merged["experiment"]
        mode = BarrierMode(b["mode"])
        barrier = BarrierSpec(float(b["slope"]), mode,
                              float(b["truncation"]) if mode is BarrierMode.TRUNCATED else None)
        sim = SimConfig(
            initial_position=float(s["initial_position"]),
            horizon=float(s["horizon"]),
            obs_grid_step=float(s["obs_grid_step"]),
            particle_cap=int(s["particle_cap"]),
            seed=int(s["seed"]),
            offspring=OffspringLaw.from_mapping(s["offspring"]),
            barrier=barrier,
            branching=bool(s["branching"]),
        )
        tt = e.get("truncation_time")
        return cls(
            name=e["name"],
            sim=sim,
            replicas=int(e["replicas"]),
            z_grid=tuple(float(z) for z in e["z_grid"]),
            truncation_time=None if tt is None else float(tt),
            burn_in_fraction=float(e["burn_in_fraction"]),
            output_dir=str(e["output_dir"]),
            threads=int(e["threads"]),
            min_surviving=int(e["min_surviving"]),
            s_sweep=tuple(float(v) for v in e["s_sweep"]),
            z_threshold=float(e["z_threshold"]),
            trace_step=float(e["trace_step"]),
            trials=int(e["trials"]),
        )

    @classmethod
    def from_toml(cls, path, base: "ExperimentConfig" = None) -> "ExperimentConfig":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        return cls.from_dict(data, base)


_KEYS = {
    "sim": {"initial_position", "horizon", "obs_grid_step", "particle_cap", "seed",
            "offspring", "branching"},
    "barrier": {"slope", "mode", "truncation"},
    "experiment": {"name", "replicas", "z_grid", "truncation_time", "burn_in_fraction",
                   "output_dir", "threads", "min_surviving", "s_sweep", "z_threshold",
                   "trace_step", "trials"},
}


def default_truncation(horizon: float, exponent: float = 0.4) -> float:
    """R_T analogue ``T**exponent`` (exponent 0.4 by default)."""
    return horizon ** exponent


def z_range(lo: float, hi: float, step: float) -> tuple:
    n = int(math.floor((hi - lo) / step + 1e-9))
    return tuple(float(v) for v in np.round(lo + step * np.arange(n + 1), 10))


def preset(name: str) -> ExperimentConfig:
    """Desk-scale defaults for each experiment."""
    if name == "ergodic":
        return ExperimentConfig(
            name, SimConfig(initial_position=1.0, horizon=14.0, obs_grid_step=0.02, seed=2024,
                            barrier=BarrierSpec.full(0.0)),
            replicas=64, min_surviving=32, z_grid=z_range(-4.0, 6.0, 0.05),
            burn_in_fraction=0.2, trace_step=0.5)
    if name == "window-tail":
        T = 12.0
        return ExperimentConfig(
            name, SimConfig(initial_position=1.0, horizon=T, obs_grid_step=0.05, seed=2024,
                            barrier=BarrierSpec.truncated_at(0.5, 2.0)),
            replicas=64, s_sweep=(0.0, 2.0, 4.0, 6.0), z_threshold=0.0,
            truncation_time=default_truncation(T), burn_in_fraction=0.2)
    if name == "survival":
        return ExperimentConfig(
            name, SimConfig(initial_position=1.0, horizon=30.0, obs_grid_step=0.5, seed=2024,
                            particle_cap=2000, barrier=BarrierSpec.full(0.5)),
            replicas=2000, trials=100_000)
    if name == "phase":
        return ExperimentConfig(
            name, SimConfig(initial_position=1.0, horizon=30.0, obs_grid_step=0.5, seed=2024,
                            particle_cap=20_000, barrier=BarrierSpec.full(1.6)),
            replicas=1000)
    if name == "martingale":
        return ExperimentConfig(
            name, SimConfig(initial_position=1.0, horizon=3.0, obs_grid_step=1.0, seed=2024,
                            barrier=BarrierSpec.none()),
            replicas=10_000)
    if name == "bridge-check":
        return ExperimentConfig(
            name, SimConfig(seed=2024), replicas=1, trials=100_000)
    if name == "wave":
        return ExperimentConfig(
            name, SimConfig(barrier=BarrierSpec.full(0.5)), replicas=1)
    raise ConfigError(f"unknown experiment {name!r}")
