"""Estimators: Gumbel log-log slope fits and binomial intervals."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm


class DegenerateFit(ValueError):
    pass


class AllExtinct(RuntimeError):
    pass


@dataclass
class GumbelFit:
    slope: float
    slope_ci: tuple
    intercepts: np.ndarray  # one per contributing curve
    curve_index: np.ndarray  # which input curves contributed
    n_points: int


def usable_points(cdf, lo=0.05, hi=0.95):
    cdf = np.asarray(cdf, dtype=float)
    return (cdf >= lo) & (cdf <= hi)


def fit_gumbel_slope(z_grid, cdfs, lo=0.05, hi=0.95, level=0.95) -> GumbelFit:
    """Common-slope fit of ``log(-log F_i(z)) = a_i + b z``.

    ``cdfs`` is one empirical CDF per row (a single 1-d array is one curve).
    Only points with ``lo <= F <= hi`` are used and a curve needs at least
    two of them to contribute.  Each curve keeps its own intercept, so the
    slope is not affected by curve-to-curve shifts.  The slope interval is a
    delete-one-curve jackknife when there are several curves and the OLS
    interval otherwise.
    """
    z = np.asarray(z_grid, dtype=float)
    F = np.atleast_2d(np.asarray(cdfs, dtype=float))
    curves = []
    for i, row in enumerate(F):
        m = usable_points(row, lo, hi)
        if m.sum() >= 2:
            curves.append((i, z[m], np.log(-np.log(row[m]))))
    n_points = sum(len(c[1]) for c in curves)
    if not curves or n_points < 3:
        raise DegenerateFit(f"only {n_points} usable (z, F) points")

    def slope_of(cs):
        sxy = math.fsum(float(np.dot(zz - zz.mean(), yy - yy.mean())) for _, zz, yy in cs)
        sxx = math.fsum(float(np.dot(zz - zz.mean(), zz - zz.mean())) for _, zz, _ in cs)
        return sxy / sxx, sxx

    b, sxx = slope_of(curves)
    intercepts = np.array([yy.mean() - b * zz.mean() for _, zz, yy in curves])
    q = float(norm.ppf(0.5 + level / 2))
    if len(curves) >= 3:
        loo = np.array([slope_of(curves[:k] + curves[k + 1:])[0] for k in range(len(curves))])
        n = len(curves)
        se = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    else:
        dof = n_points - len(curves) - 1
        if dof > 0:
            resid = np.concatenate([yy - a - b * zz for (_, zz, yy), a in zip(curves, intercepts)])
            se = math.sqrt(float(np.dot(resid, resid)) / dof / sxx)
        else:
            se = 0.0
    return GumbelFit(b, (b - q * se, b + q * se), intercepts,
                     np.array([c[0] for c in curves]), n_points)


def wilson_interval(successes: int, n: int, level: float = 0.95) -> tuple:
    if n == 0:
        return (0.0, 1.0)
    q = float(norm.ppf(0.5 + level / 2))
    p = successes / n
    denom = 1 + q * q / n
    centre = (p + q * q / (2 * n)) / denom
    half = q * math.sqrt(p * (1 - p) / n + q * q / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, float(centre - half))
    hi = 1.0 if successes == n else min(1.0, float(centre + half))
    return (lo, hi)


def mean_and_se(values) -> tuple:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()) if v.size else float("nan"), float("nan")
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def median_of_means(values, groups: int = 20) -> float:
    v = np.asarray(values, dtype=float)
    chunks = np.array_split(v, min(groups, max(1, v.size)))
    return float(np.median([c.mean() for c in chunks]))
