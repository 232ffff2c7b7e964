"""Seeded replica farms, estimators and the desk-scale experiments."""
from .bridge import PARAMETER_SETS, BridgeCheckRow, bridge_check, bridge_check_one
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, default_truncation, preset, z_range
from .emit import EmptyReport, emit, load_summary, write_csv
from .estimators import AllExtinct, DegenerateFit, GumbelFit, fit_gumbel_slope, wilson_interval
from .farm import farm_map, replica_seed
from .runners import (
    ErgodicReport,
    ergodic_fit,
    lineage_hit_frequency,
    run,
    run_bridge_check,
    run_ergodic,
    run_martingale,
    run_phase,
    run_survival,
    run_wave,
    run_window_tail,
)
