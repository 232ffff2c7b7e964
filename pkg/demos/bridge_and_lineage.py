"""Compare the bridge crossing formula with simulation and a single lineage
with its inverse-Gaussian law.
"""
import argparse

from bbm_absorb.analytic import line_hit_by
from bbm_absorb.experiments import bridge_check_one, lineage_hit_frequency


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    row = bridge_check_one(0.0, 1.0, 1.0, 1.0, 0.0, trials=args.trials, seed=args.seed)
    print(f"bridge (0,1)->(1,1), rho=0: formula {row.analytic:.5f}, "
          f"raw {row.raw_freq:.5f}, extrapolated {row.extrapolated:.5f} (z={row.z_score:+.2f})")

    x, rho, horizon = 1.0, 0.5, 10.0
    n = args.trials // 10
    freq = lineage_hit_frequency(x, rho, horizon, n, args.seed)
    se = (freq * (1 - freq) / n) ** 0.5
    print(f"lineage from x={x}, barrier slope {rho}, horizon {horizon}: "
          f"simulated {freq:.4f} +/- {se:.4f}, exact {line_hit_by(x, -rho, horizon):.4f}")


if __name__ == "__main__":
    main()
