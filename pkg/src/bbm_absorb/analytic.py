"""Closed-form laws used as oracles.

Hitting times of lines by Brownian motion, the Brownian-bridge crossing
probability, the Bramson centering and the randomly shifted Gumbel law, plus
an adaptive Gauss-Kronrod quadrature for checking densities against their
closed-form masses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)


class AnalyticError(ValueError):
    pass


class BadArgs(AnalyticError):
    pass


class NegativeMass(AnalyticError):
    pass


class DegenerateSegment(AnalyticError):
    pass


class NoConvergence(ArithmeticError):
    pass


def centering(t):
    """Bramson centering ``sqrt(2) t - 3/(2 sqrt(2)) log t`` for t > 0."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise BadArgs("centering needs t > 0")
    out = SQRT2 * t_arr - 3.0 / (2.0 * SQRT2) * np.log(t_arr)
    return float(out) if out.ndim == 0 else out


# Brownian bridge --------------------------------------------------------

@dataclass(frozen=True)
class SegmentDraw:
    """Endpoints of a Brownian path on ``[t0, t1]``."""

    t0: float
    t1: float
    x0: float
    x1: float

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise DegenerateSegment(f"t1 = {self.t1} must exceed t0 = {self.t0}")


def bridge_crossing_prob(seg: SegmentDraw, rho: float) -> float:
    """P(a Brownian bridge from (t0, x0) to (t1, x1) touches y = rho t).

    Equals ``exp(-2 d0 d1 / (t1 - t0))`` with ``d0, d1`` the endpoint
    distances above the line, and 1 when either endpoint is on or below it.
    """
    d0 = seg.x0 - rho * seg.t0
    d1 = seg.x1 - rho * seg.t1
    if d0 <= 0 or d1 <= 0:
        return 1.0
    return math.exp(-2.0 * d0 * d1 / (seg.t1 - seg.t0))


def bridge_crossing_prob_array(t0, t1, x0, x1, rho):
    """Vectorized :func:`bridge_crossing_prob` (no degenerate-segment check)."""
    d0 = np.asarray(x0) - rho * np.asarray(t0)
    d1 = np.asarray(x1) - rho * np.asarray(t1)
    dt = np.asarray(t1) - np.asarray(t0)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        p = np.exp(-2.0 * d0 * d1 / dt)
    return np.where((d0 > 0) & (d1 > 0), p, 1.0)


# first passage ----------------------------------------------------------

def hitting_time_density(x, slope, r):
    """Density in ``r`` of the first time a standard BM from ``x > 0`` is at
    or below the line ``y = slope * r``.

    Its total mass is 1 for ``slope >= 0`` and ``exp(2 slope x)`` otherwise.
    """
    r = np.asarray(r, dtype=float)
    if x <= 0:
        raise BadArgs("x must be > 0")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        val = x / np.sqrt(2.0 * math.pi * r**3) * np.exp(-((x - slope * r) ** 2) / (2.0 * r))
    val = np.where(r > 0, val, 0.0)
    return float(val) if val.ndim == 0 else val


def hitting_probability(x, slope) -> float:
    """Total mass of :func:`hitting_time_density`."""
    if x <= 0:
        raise BadArgs("x must be > 0")
    return 1.0 if slope >= 0 else math.exp(2.0 * slope * x)


def first_passage_density(x, rho, r):
    """Density of ``inf{s: B_s <= (sqrt(2) - rho) s}`` for BM started at x.

    This is the law that controls late first hits of the barrier in the
    tilted (front-following) frame.  For rho < sqrt(2) the line rises and the
    density has total mass 1.
    """
    if x <= 0:
        raise BadArgs("x must be > 0")
    if np.any(np.asarray(r) <= 0):
        raise BadArgs("r must be > 0")
    return hitting_time_density(x, SQRT2 - rho, r)


def spine_first_passage_density(x, rho, r):
    """Hitting-time density of y = rho t for a lineage with drift sqrt(2).

    The distance to the barrier is ``x + B_t + (sqrt(2) - rho) t``; its
    total mass is ``exp(-2 (sqrt(2) - rho) x)`` when rho < sqrt(2).
    """
    if x <= 0:
        raise BadArgs("x must be > 0")
    if np.any(np.asarray(r) <= 0):
        raise BadArgs("r must be > 0")
    return hitting_time_density(x, rho - SQRT2, r)


def line_survival_probability(x, drift) -> float:
    """P(x + B_t + drift t stays > 0 for all t)."""
    return 1.0 - hitting_probability(x, -drift)


def line_hit_by(x, drift, horizon) -> float:
    """P(x + B_t + drift t hits 0 before ``horizon``) (inverse-Gaussian CDF)."""
    from scipy.special import ndtr

    if horizon <= 0:
        return 0.0
    s = math.sqrt(horizon)
    a = ndtr((-x - drift * horizon) / s)
    # exp(-2 drift x) * ndtr(...) computed in log space to avoid overflow
    b_arg = (-x + drift * horizon) / s
    b = math.exp(-2.0 * drift * x + math.log(max(ndtr(b_arg), 1e-300))) if ndtr(b_arg) > 0 else 0.0
    return float(a + b)


# Gumbel mixture ---------------------------------------------------------

@dataclass(frozen=True)
class GumbelMixtureParams:
    c_star: float
    z_value: float

    def __post_init__(self):
        if not self.c_star > 0:
            raise BadArgs("c_star must be positive")


def gumbel_mixture_cdf(params: GumbelMixtureParams, z):
    """``exp(-c_star * z_value * exp(-sqrt(2) z))``."""
    if params.z_value < 0:
        raise NegativeMass(f"z_value = {params.z_value} < 0")
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        out = np.exp(-params.c_star * params.z_value * np.exp(-SQRT2 * z))
    return float(out) if out.ndim == 0 else out


def gumbel_loglog(params: GumbelMixtureParams, z):
    """``log(-log F(z))``, evaluated without forming F."""
    if params.z_value <= 0:
        raise NegativeMass("log-log transform needs z_value > 0")
    return math.log(params.c_star * params.z_value) - SQRT2 * np.asarray(z, dtype=float)


# quadrature -------------------------------------------------------------

# 15-point Kronrod nodes and weights with the embedded 7-point Gauss rule
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_WEIGHTS_K = np.concatenate([_WK[:-1], _WK[::-1]])
# Gauss nodes are the odd-indexed Kronrod nodes (1, 3, 5, 7 from each end)
_WEIGHTS_G = np.zeros(15)
_WEIGHTS_G[[1, 3, 5]] = _WG[:3]
_WEIGHTS_G[7] = _WG[3]
_WEIGHTS_G[[13, 11, 9]] = _WG[:3]


def _gk15(f, a, b):
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    fx = np.asarray(f(c + h * _NODES), dtype=float)
    k = h * float(np.dot(_WEIGHTS_K, fx))
    g = h * float(np.dot(_WEIGHTS_G, fx))
    return k, abs(k - g)


def _adaptive(f, a, b, tol, max_intervals):
    intervals = [(a, b) + _gk15(f, a, b)]
    for _ in range(max_intervals):
        total_err = math.fsum(iv[3] for iv in intervals)
        if total_err <= tol:
            return math.fsum(iv[2] for iv in intervals), total_err
        # halve the interval with the largest error estimate
        worst = max(range(len(intervals)), key=lambda i: intervals[i][3])
        lo, hi, _, _ = intervals.pop(worst)
        mid = 0.5 * (lo + hi)
        intervals.append((lo, mid) + _gk15(f, lo, mid))
        intervals.append((mid, hi) + _gk15(f, mid, hi))
    total_err = math.fsum(iv[3] for iv in intervals)
    if total_err <= tol:
        return math.fsum(iv[2] for iv in intervals), total_err
    raise NoConvergence(f"error estimate {total_err:.3g} above tol {tol:.3g}")


def quadrature(f, a: float, b: float = math.inf, tol: float = 1e-10,
               max_intervals: int = 5000, full_output: bool = False):
    """Adaptive Gauss-Kronrod (7/15) integration of ``f`` over ``(a, b)``.

    ``f`` must accept numpy arrays.  Intervals are bisected where the
    Gauss/Kronrod discrepancy is largest until the summed estimate is below
    ``tol``.  For ``b = inf`` the range is cut at the first point ``R``
    (found by doubling) beyond which ``f`` stays below ``tol * 1e-3`` on a
    probe grid; the remaining tail is integrated after the map
    ``r = R / (1 - u)`` and its value is bounded by the error budget.
    """
    if not tol > 0:
        raise BadArgs("tol must be > 0")
    if math.isinf(b):
        cut = max(a + 1.0, 1.0)
        probe = np.linspace(0.0, 1.0, 33)
        for _ in range(200):
            vals = np.abs(np.asarray(f(cut + probe * cut)))
            if np.all(vals < tol * 1e-3):
                break
            cut *= 2.0
        else:
            raise NoConvergence("integrand does not decay")
        head, head_err = _adaptive(f, a, cut, 0.5 * tol, max_intervals)

        def tail(u):
            u = np.asarray(u)
            one_minus = 1.0 - u
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                vals = np.asarray(f(cut / one_minus)) * cut / one_minus**2
            return np.where(one_minus > 0, vals, 0.0)

        tail_val, tail_err = _adaptive(tail, 0.0, 1.0, 0.5 * tol, max_intervals)
        value, err = head + tail_val, head_err + tail_err
    else:
        value, err = _adaptive(f, a, b, tol, max_intervals)
    if full_output:
        return value, err
    return value
