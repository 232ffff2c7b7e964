"""Travelling waves of the F-KPP equation.

``solve_oneside_wave`` returns the extinction probability ``g`` of the
absorbed process, the solution of

    g''/2 - rho g' + f(g) - g = 0,   g(0+) = 1,   g(inf) = 0,

with ``f`` the offspring generating function (``f(s) = s**2`` for binary
branching).  ``solve_free_wave`` returns the critical wave ``w`` of
``w''/2 + sqrt(2) w' + f(w) - w = 0`` running from 0 at -inf to 1 at +inf.

Both equations are autonomous, so each wave is a translate of one
heteroclinic orbit.  The orbit is followed from the fixed point it leaves,
in the direction in which the unwanted linear mode decays (backwards from
the tail for ``g``, forwards for ``w``), then translated to the requested
normalization.  Forward shooting on ``g'(0)`` with bisection is kept as an
independent check of the slope (:func:`shoot_slope`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .process import OffspringLaw

SQRT2 = math.sqrt(2.0)

__all__ = [
    "Blowup",
    "NoBracket",
    "WaveSolution",
    "ode_residual",
    "shoot_slope",
    "solve_free_wave",
    "solve_oneside_wave",
]


class NoBracket(ArithmeticError):
    pass


class Blowup(ArithmeticError):
    pass


@dataclass
class WaveSolution:
    grid: np.ndarray
    values: np.ndarray
    derivative_at_zero: float
    residual_norm: float
    slopes: np.ndarray = None
    dense: object = None  # callable x -> (value, slope) on the grid's range

    def __call__(self, x):
        return self.dense(np.asarray(x, dtype=float))[0]


def _rhs(speed, law):
    # y = (u, u'); u'' = 2 (-speed u' - f(u) + u)
    def f(x, y):
        u, du = y
        return [du, 2.0 * (-speed * du - law.generating_function(u) + u)]
    return f


def ode_residual(dense, speed, law, x, h=1e-3):
    """Max residual of the first-order system along a dense solution.

    ``dense(x)`` returns ``(u, u')``.  Derivatives of the interpolant are
    taken with a five-point stencil; both the consistency residual
    ``d/dx u - u'`` and the equation residual are reported by their max.
    """
    x = np.asarray(x, dtype=float)

    def d(k):
        return (dense(x - 2 * h)[k] - 8 * dense(x - h)[k]
                + 8 * dense(x + h)[k] - dense(x + 2 * h)[k]) / (12 * h)

    u, du = dense(x)
    r1 = np.abs(d(0) - du)
    r2 = np.abs(0.5 * d(1) + speed * du + law.generating_function(u) - u)
    return float(max(r1.max(), r2.max()))


def _tail_rate(speed, law, sign):
    # roots of l**2/2 + speed l - (1 - p1) = 0
    p1 = dict(law.probabilities).get(1, 0.0)
    disc = speed**2 + 2.0 * (1.0 - p1)
    return -speed + sign * math.sqrt(disc)


def solve_oneside_wave(rho: float, x_max: float = None, tol: float = 1e-6,
                       n_grid: int = 2001, law: OffspringLaw = None,
                       rtol: float = 1e-13) -> WaveSolution:
    """Extinction probability ``g`` on ``[0, x_max]`` for barrier slope rho.

    ``x_max`` defaults to ``40 / (sqrt(2) - rho)``.  The integrator step is
    capped at four output grid spacings.  Raises :class:`Blowup` if the orbit
    fails to reach ``g = 1`` and :class:`NoBracket` if ``g(x_max) > tol``.
    """
    law = law or OffspringLaw.binary()
    if not rho < SQRT2:
        raise ValueError("one-sided wave needs rho < sqrt(2)")
    if x_max is None:
        x_max = 40.0 / (SQRT2 - rho)
    # in the equation's form u''/2 + c u' + ..., c = -rho
    speed = -rho
    lam = _tail_rate(speed, law, -1.0)  # decaying rate, < 0
    # start small enough that the translated start lies beyond x_max
    log_eps = -abs(lam) * (x_max + 10.0)
    if log_eps < -650:
        raise ValueError("x_max too large for a double-precision tail start")
    eps = math.exp(log_eps)
    x_start = 0.0
    max_step = 4.0 * x_max / (n_grid - 1)

    def reach_one(x, y):
        return y[0] - 1.0
    reach_one.terminal = True
    reach_one.direction = 1

    def escape(x, y):
        return y[0] + 1e-3
    escape.terminal = True

    y0 = [eps, lam * eps]
    sol = solve_ivp(_rhs(speed, law), (x_start, x_start - 4.0 * x_max - 100.0), y0,
                    method="DOP853", rtol=rtol, atol=1e-300, max_step=max_step,
                    events=(reach_one, escape), dense_output=True)
    if sol.status != 1 or len(sol.t_events[0]) == 0:
        raise Blowup("orbit from the tail never reached g = 1")
    x_star = float(sol.t_events[0][0])
    if x_start - x_star < x_max:
        raise Blowup("orbit too short to cover [0, x_max]")

    def dense(x):
        y = sol.sol(np.asarray(x) + x_star)
        return y[0], y[1]

    grid = np.linspace(0.0, x_max, n_grid)
    values, slopes = dense(grid)
    values = np.array(values)
    values[0] = 1.0
    if values[-1] > tol:
        raise NoBracket(f"g(x_max) = {values[-1]:.3g} exceeds tol {tol:.3g}; increase x_max")
    interior = grid[(grid > 0.01) & (grid < x_max - 0.01)]
    res = ode_residual(dense, speed, law, interior)
    return WaveSolution(grid, values, float(sol.y_events[0][0][1]), res,
                        slopes=np.asarray(slopes), dense=dense)


def shoot_slope(rho: float, law: OffspringLaw = None, x_probe: float = 8.0,
                bracket=(-20.0, 0.0), iters: int = 200) -> float:
    """Bisect ``g'(0)`` by forward shooting from ``g(0) = 1``.

    A slope is too steep if the trajectory drops below 0 and too shallow if
    it turns back up while positive.  ``x_probe`` bounds how far each trial
    is followed; forward integration amplifies slope errors by the growing
    mode, which limits the attainable accuracy to about 1e-9.
    """
    law = law or OffspringLaw.binary()
    speed = -rho

    def below(x, y):
        return y[0]
    below.terminal = True
    below.direction = -1

    def turns(x, y):
        return y[1]
    turns.terminal = True
    turns.direction = 1

    def classify(slope):
        sol = solve_ivp(_rhs(speed, law), (0.0, x_probe), [1.0, slope], method="DOP853",
                        rtol=1e-12, atol=1e-14, events=(below, turns))
        if len(sol.t_events[0]):
            return -1  # too steep
        if len(sol.t_events[1]):
            return 1  # too shallow
        return 0

    lo, hi = bracket
    if classify(lo) != -1 or classify(hi) != 1:
        raise NoBracket(f"slopes {bracket} do not bracket g'(0)")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        c = classify(mid)
        if c == 0:
            return mid
        if c < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    return 0.5 * (lo + hi)


def _upper_rhs(speed, law):
    """Right-hand side for ``v = 1 - u``; the nonlinearity is expanded in
    powers of ``v`` so nothing cancels as ``u -> 1``."""
    degree = max(k for k, _ in law.probabilities)
    # f(1 - v) - (1 - v) = -v + sum_{j>=2} c_j v**j
    coef = np.zeros(degree + 1)
    for k, p in law.probabilities:
        for j in range(2, k + 1):
            coef[j] += p * math.comb(k, j) * (-1) ** j

    def g(v):
        out = -v
        vj = v
        for j in range(2, degree + 1):
            vj = vj * v
            out = out + coef[j] * vj
        return out

    def f(x, y):
        v, dv = y
        return [dv, 2.0 * (-speed * dv + g(v))]
    return f, g


def solve_free_wave(z_min: float = -30.0, z_max: float = 20.0, tol: float = 1e-6,
                    n_grid: int = 2001, law: OffspringLaw = None,
                    rtol: float = 1e-13) -> WaveSolution:
    """Critical wave ``w`` with ``w(0) = 1/2``, increasing from 0 to 1.

    The lower half is integrated in ``w`` from the unstable direction at 0,
    the upper half in ``1 - w``.  ``derivative_at_zero`` is ``w'(0)``.
    ``tol`` bounds ``w(z_min)`` and ``1 - w(z_max)``; a window too narrow for
    it raises :class:`NoBracket`.
    """
    law = law or OffspringLaw.binary()
    if not z_min < z_max:
        raise ValueError("need z_min < z_max")
    speed = SQRT2
    lam = _tail_rate(speed, law, 1.0)  # growth rate out of 0, > 0
    eps = math.exp(-lam * (abs(z_min) + 10.0))
    max_step = 4.0 * (z_max - z_min) / (n_grid - 1)

    def half(z, y):
        return y[0] - 0.5
    half.terminal = True
    half.direction = 1

    def leave(z, y):
        return y[0] - 1.0
    leave.terminal = True

    lower = solve_ivp(_rhs(speed, law), (0.0, 10.0 * (abs(z_min) + 10.0)), [eps, lam * eps],
                      method="DOP853", rtol=rtol, atol=1e-300, max_step=max_step,
                      events=(half, leave), dense_output=True)
    if len(lower.t_events[1]) or not len(lower.t_events[0]):
        raise Blowup("lower half of the wave never reached 1/2")
    z_half = float(lower.t_events[0][0])
    if z_half + z_min < 0.0:
        raise Blowup("orbit does not cover z_min")
    slope_half = float(lower.y_events[0][0][1])

    upper_f, _ = _upper_rhs(speed, law)

    def below_zero(z, y):
        return y[0]
    below_zero.terminal = True

    upper = solve_ivp(upper_f, (0.0, z_max + 5.0), [0.5, -slope_half], method="DOP853",
                      rtol=rtol, atol=1e-300, max_step=max_step, events=(below_zero,),
                      dense_output=True)
    if upper.status != 0:
        raise Blowup("upper half of the wave left (0, 1)")

    def dense(z):
        z = np.asarray(z, dtype=float)
        w = np.empty_like(z)
        dw = np.empty_like(z)
        lo = z < 0
        if lo.any():
            y = lower.sol(z[lo] + z_half)
            w[lo], dw[lo] = y[0], y[1]
        if (~lo).any():
            y = upper.sol(z[~lo])
            w[~lo], dw[~lo] = 1.0 - y[0], -y[1]
        return w, dw

    grid = np.linspace(z_min, z_max, n_grid)
    values, slopes = dense(grid)
    if values[0] > tol or 1.0 - values[-1] > tol:
        raise NoBracket("window too narrow for the requested tail tolerance")
    interior = grid[(grid > z_min + 0.01) & (grid < z_max - 0.01)]
    res = ode_residual(dense, speed, law, interior)
    sol = WaveSolution(grid, values, slope_half, res, slopes=slopes, dense=dense)
    sol.upper_tail = lambda z: upper.sol(np.asarray(z, dtype=float))[0]
    return sol
