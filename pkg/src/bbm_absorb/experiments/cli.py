"""Command line entry point: ``bbm-absorb <experiment> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time

from .config import EXPERIMENTS, ConfigError, ExperimentConfig, preset
from .emit import emit
from .runners import run

log = logging.getLogger("bbm_absorb")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="base seed (replica seeds derive from it)")
    common.add_argument("--replicas", type=int, help="number of replicas")
    common.add_argument("--threads", type=int, help="worker processes")
    common.add_argument("--out", help="output directory")
    common.add_argument("--config", help="TOML file with [sim], [barrier], [experiment]")
    common.add_argument("--rho", type=float, help="barrier slope")
    common.add_argument("--horizon", type=float, help="simulation horizon T")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="bbm-absorb", description=__doc__, parents=[common])
    sub = p.add_subparsers(dest="experiment", required=True, metavar="experiment")
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
    return p


def resolve_config(args) -> ExperimentConfig:
    cfg = preset(args.experiment)
    if args.config:
        cfg = ExperimentConfig.from_toml(args.config, base=cfg)
        if cfg.name != args.experiment:
            raise ConfigError(f"config is for {cfg.name!r}, not {args.experiment!r}")
    if args.seed is not None:
        cfg = cfg.replace_sim(seed=args.seed)
    if args.replicas is not None:
        cfg = cfg.replace(replicas=args.replicas)
    if args.threads is not None:
        cfg = cfg.replace(threads=args.threads)
    if args.out is not None:
        cfg = cfg.replace(output_dir=args.out)
    if args.rho is not None:
        b = cfg.sim.barrier
        cfg = cfg.replace_sim(barrier=type(b)(args.rho, b.mode, b.truncation))
    if args.horizon is not None:
        cfg = cfg.replace_sim(horizon=args.horizon)
    return cfg


def main(argv=None) -> int:
    p = build_parser()
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except (ConfigError, ValueError, OSError) as e:
        p.error(str(e))
    log.info("running %s with %d replicas", cfg.name, cfg.replicas)
    t0 = time.perf_counter()
    report = run(cfg)
    paths = emit(report)
    log.info("done in %.1f s", time.perf_counter() - t0)
    print(json.dumps(report.summary(), indent=2, default=str))
    for path in paths:
        print(f"wrote {path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
