import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bbm_absorb.analytic import GumbelMixtureParams, gumbel_mixture_cdf
from bbm_absorb.experiments import (
    AllExtinct,
    ConfigError,
    DegenerateFit,
    EmptyReport,
    ExperimentConfig,
    bridge_check_one,
    emit,
    ergodic_fit,
    farm_map,
    fit_gumbel_slope,
    load_summary,
    preset,
    replica_seed,
    run,
    wilson_interval,
    write_csv,
)
from bbm_absorb.experiments.cli import main
from bbm_absorb.process import BarrierSpec

SQRT2 = math.sqrt(2.0)


def test_estimator_self_test_on_exact_gumbel_cdf():
    z = np.linspace(-3, 4, 141)
    F = gumbel_mixture_cdf(GumbelMixtureParams(1.0, 1.0), z)
    fit = fit_gumbel_slope(z, F)
    assert fit.slope == pytest.approx(-SQRT2, abs=1e-6)
    assert fit.intercepts[0] == pytest.approx(0.0, abs=1e-6)


@given(st.lists(st.floats(0.2, 20.0), min_size=1, max_size=6))
def test_fixed_effects_fit_recovers_common_slope(cs):
    z = np.linspace(-4, 6, 201)
    F = [gumbel_mixture_cdf(GumbelMixtureParams(c, 1.0), z) for c in cs]
    rep = ergodic_fit(z, F)
    assert rep.slope == pytest.approx(-SQRT2, abs=1e-9)
    lo, hi = rep.slope_ci
    assert lo <= rep.slope <= hi
    assert rep.replica_cdfs.shape[0] == len(cs)


def test_fit_errors():
    z = np.linspace(-1, 1, 21)
    with pytest.raises(DegenerateFit):
        fit_gumbel_slope(z, np.ones_like(z))
    with pytest.raises(AllExtinct):
        ergodic_fit(z, np.empty((0, z.size)))


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and hi - lo == pytest.approx(0.1918, abs=1e-3)
    assert wilson_interval(0, 10)[0] == 0.0 and wilson_interval(10, 10)[1] == 1.0


def test_config_validation_and_round_trips(tmp_path):
    with pytest.raises(ConfigError):
        preset("ergodic").replace(z_grid=(0.0, -1.0))
    with pytest.raises(ConfigError):
        preset("ergodic").replace(replicas=0)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"sim": {"bogus": 1}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"extra": {}})
    for name in ("ergodic", "window-tail", "survival", "martingale", "wave"):
        cfg = preset(name)
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    toml = tmp_path / "c.toml"
    toml.write_text('[sim]\nhorizon = 2.5\nseed = 9\n[barrier]\nslope = 0.25\nmode = "full"\n'
                    '[experiment]\nname = "survival"\nreplicas = 7\n')
    cfg = ExperimentConfig.from_toml(toml, base=preset("survival"))
    assert (cfg.sim.horizon, cfg.sim.seed, cfg.sim.barrier.slope, cfg.replicas) == (2.5, 9, 0.25, 7)


def test_replica_seeds_and_ordered_farm():
    seeds = [replica_seed(1, i) for i in range(100)]
    assert len(set(seeds)) == 100
    assert replica_seed(1, 5) == replica_seed(1, 5) != replica_seed(2, 5)
    assert farm_map(abs, [-3, 2, -1], threads=2) == [3, 2, 1]


def test_emit_formats(tmp_path):
    cfg = preset("martingale")
    rep = EmptyReport(cfg, {"trace": ("replica", "t", "observable", "value")})
    emit(rep, tmp_path)
    assert (tmp_path / "trace.csv").read_bytes() == b"replica,t,observable,value\r\n"
    doc = load_summary(tmp_path / "summary.json")
    assert doc["results"]["rows"] == []
    assert ExperimentConfig.from_dict(doc["config"]) == cfg
    write_csv(tmp_path / "q.csv", ("a", "b"), [("x,y", 0.1), ('say "hi"', None)])
    assert (tmp_path / "q.csv").read_bytes() == b'a,b\r\n"x,y",0.1\r\n"say ""hi""",\r\n'


SMALL = {
    "martingale": lambda: preset("martingale").replace(replicas=40),
    "survival": lambda: preset("survival").replace(replicas=12, trials=30).replace_sim(horizon=6.0),
    "phase": lambda: preset("phase").replace(replicas=12),
    "ergodic": lambda: preset("ergodic").replace(replicas=3, min_surviving=1).replace_sim(
        horizon=5.0, obs_grid_step=0.05),
    "window-tail": lambda: preset("window-tail").replace(replicas=3).replace_sim(horizon=5.0),
    "bridge-check": lambda: preset("bridge-check").replace(trials=300),
}


@pytest.mark.parametrize("name", sorted(SMALL))
def test_csv_bytes_identical_across_reruns_and_threads(name, tmp_path):
    cfg = SMALL[name]()
    emit(run(cfg), tmp_path / "a")
    emit(run(cfg.replace(threads=2)), tmp_path / "b")
    files = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    assert files
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    a = load_summary(tmp_path / "a" / "summary.json")
    assert ExperimentConfig.from_dict(a["config"]) == cfg


def test_window_tail_edge_sweep_values():
    cfg = preset("window-tail").replace(replicas=2, s_sweep=(0.0, 5.0)).replace_sim(horizon=5.0)
    rep = run(cfg)
    occ = dict(zip(rep.sweep, rep.occupancy))
    assert occ[5.0] == 0.0
    assert occ[0.0] == max(rep.occupancy)
    assert rep.identity_violations == 0 and rep.identity_checks > 0


def test_bridge_check_row_for_reference_case():
    row = bridge_check_one(0.0, 1.0, 1.0, 1.0, 0.0, trials=4000, seed=3)
    assert row.analytic == pytest.approx(math.exp(-2.0))
    assert abs(row.z_score) < 4


def test_cli_runs_and_writes(tmp_path, capsys):
    assert main(["martingale", "--replicas", "25", "--seed", "5", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc["seed"] == 5 and doc["config"]["experiment"]["replicas"] == 25
    assert (tmp_path / "martingale.csv").exists()
    cfg_file = tmp_path / "w.toml"
    cfg_file.write_text('[barrier]\nslope = 0.25\nmode = "full"\n[experiment]\nname = "wave"\n')
    assert main(["wave", "--config", str(cfg_file), "--out", str(tmp_path / "w")]) == 0
    assert load_summary(tmp_path / "w" / "summary.json")["results"]["rho"] == 0.25
    with pytest.raises(SystemExit):
        main(["nonsense"])
