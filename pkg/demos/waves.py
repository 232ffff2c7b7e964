"""Solve both travelling waves and print a few values.

The one-sided wave gives the extinction probability g(x) of the absorbed
process started at x; the free wave is the critical F-KPP front.
"""
import argparse
import math

import numpy as np

from bbm_absorb.wave import shoot_slope, solve_free_wave, solve_oneside_wave


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rho", type=float, nargs="*", default=[0.0, 0.5, 1.0, 1.3])
    args = ap.parse_args()

    print("rho     g'(0)        shooting     1-g(1)    residual")
    for rho in args.rho:
        sol = solve_oneside_wave(rho)
        g1 = float(sol(1.0))
        print(f"{rho:4.2f}  {sol.derivative_at_zero:+.9f}  {shoot_slope(rho):+.9f}"
              f"  {1 - g1:.6f}  {sol.residual_norm:.1e}")
    print(f"exact g'(0) at rho=0: {-math.sqrt(2 / 3):+.9f}")

    w = solve_free_wave()
    for z in (-10, -5, 0, 5, 10):
        print(f"w({z:+d}) = {float(np.interp(z, w.grid, w.values)):.6e}")


if __name__ == "__main__":
    main()
