import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bbm_absorb.observables import (
    BadWindow,
    ErgodicAccumulator,
    ExtremeRecord,
    InsufficientPath,
    OutOfWindow,
    TubeSpec,
    accumulate,
    centering,
    derivative_sum,
    derivative_terms_sum,
    extremes,
    localized,
    tube_envelopes,
    window_set,
)
from bbm_absorb.analytic import BadArgs
from bbm_absorb.process import (
    ALL,
    SURVIVING,
    BarrierSpec,
    ParticleRecord,
    Population,
    SimConfig,
    TruncatedAt,
    view,
)
from bbm_absorb.simulator import run_replica

SQRT2 = math.sqrt(2.0)


def test_derivative_sum_examples():
    assert derivative_terms_sum([], 3.0) == 0.0
    assert derivative_terms_sum([1.0], 0.0) == pytest.approx(-4.113250, abs=1e-6)
    assert derivative_terms_sum([SQRT2 * 2.5], 2.5) == 0.0
    pop = Population(SimConfig(initial_position=1.0))
    assert derivative_sum(pop) == pytest.approx(-math.exp(SQRT2), rel=1e-15)
    # far-behind particles underflow quietly
    assert derivative_terms_sum([-1e6, 1.0], 0.0) == pytest.approx(-math.exp(SQRT2), rel=1e-15)


def _pop(seed, horizon=5.0, rho=0.4, s=1.0, record=False):
    cfg = SimConfig(initial_position=1.0, horizon=horizon, obs_grid_step=0.25, seed=seed,
                    barrier=BarrierSpec.truncated_at(rho, s), record_knots=record)
    return run_replica(cfg).final_population


@pytest.mark.parametrize("seed", range(8))
def test_decomposition_identities(seed):
    pop = _pop(seed)
    t = pop.time
    surv = view(pop, SURVIVING).id_set()
    for s in np.arange(0.0, t + 1e-9, 0.25):
        trunc = view(pop, TruncatedAt(s))
        win = window_set(pop, s, t)
        assert trunc.id_set() - surv == win.id_set()
        assert not (surv & win.id_set())
        ms, mw = view(pop, SURVIVING).max_position(), win.max_position()
        mt = trunc.max_position()
        cands = [v for v in (ms, mw) if v is not None]
        assert mt == (max(cands) if cands else None)
    every = view(pop, ALL).id_set()
    assert window_set(pop, 0.0, t).id_set() == every - surv
    assert len(window_set(pop, t, t)) == 0 or all(
        a >= t for a in pop.hit_a[window_set(pop, t, t).mask])


def test_window_bad_arguments():
    pop = _pop(1)
    with pytest.raises(BadWindow):
        window_set(pop, 1.0, pop.time + 1.0)
    with pytest.raises(BadWindow):
        window_set(pop, 2.0, 1.0)


@pytest.mark.parametrize("seed", range(6))
def test_extremes_record_consistency(seed):
    pop = _pop(seed)
    rec = extremes(pop, s=1.0)
    m = centering(pop.time)
    assert rec.max_all == pytest.approx(pop.pos.max() - m)
    parts = [v for v in (rec.max_surviving, rec.max_window) if v is not None]
    assert rec.max_truncated == (max(parts) if parts else None)
    if parts:
        assert rec.max_all >= rec.max_truncated
    assert rec.z_tilde == derivative_sum(pop, SURVIVING)


def test_tube_spec_validation_and_envelopes():
    with pytest.raises(BadArgs):
        TubeSpec(0.6, 0.7, 1.0, 10.0, 1.0)
    with pytest.raises(BadArgs):
        TubeSpec(0.3, 0.4, 1.0, 10.0, 1.0)
    tube = TubeSpec(0.3, 0.7, 1.0, 10.0, 1.0)
    lo, hi = tube_envelopes(tube, np.linspace(1, 9, 17))
    assert np.all(lo <= hi)


def _straight_record(tube, noise=0.0, seed=0):
    s = np.linspace(0.0, tube.t, 201)
    x = tube.x + s / tube.t * centering(tube.t)
    x = x - np.minimum(s, tube.t - s) ** 0.5  # between the two envelopes
    x = x + noise * np.random.default_rng(seed).standard_normal(s.size)
    knots = np.column_stack([s, x])
    return ParticleRecord(id=0, parent_id=None, birth_time=0.0, death_time=None, knots=knots,
                          hit_segment=None, absorbed=False, lineage=knots)


def test_localized_examples():
    tube = TubeSpec(0.3, 0.7, 1.0, 2.0, 1.0)
    assert not tube.in_regime
    assert localized(_straight_record(tube), tube)  # empty interval
    tube = TubeSpec(0.3, 0.7, 2.0, 20.0, 1.0)
    assert localized(_straight_record(tube, noise=0.01), tube)
    bad = _straight_record(tube)
    bad.knots[100, 1] += 50.0
    assert not localized(bad, tube)
    short = ParticleRecord(0, None, 5.0, None, np.array([[5.0, 1.0]]), None, False,
                           np.array([[5.0, 1.0]]))
    with pytest.raises(InsufficientPath):
        localized(short, tube)


@given(st.floats(0.05, 0.45), st.floats(0.55, 0.95), st.floats(0.0, 0.04),
       st.floats(0.0, 0.04))
def test_widening_tube_never_breaks_localization(alpha, beta, da, db):
    narrow = TubeSpec(alpha, beta, 2.0, 20.0, 1.0)
    wide = TubeSpec(alpha - da, min(beta + db, 0.99), 2.0, 20.0, 1.0)
    s = np.linspace(2.0, 18.0, 50)
    ln, hn = tube_envelopes(narrow, s)
    lw, hw = tube_envelopes(wide, s)
    assert np.all(lw <= ln + 1e-12) and np.all(hn <= hw + 1e-12)
    for seed in range(3):
        rec = _straight_record(narrow, noise=0.3, seed=seed)
        if localized(rec, narrow):
            assert localized(rec, wide)


def test_localized_on_simulated_lineages():
    pop = _pop(2, horizon=6.0, record=True)
    tube = TubeSpec(0.3, 0.7, 1.0, pop.time, 1.0)
    top = int(pop.ids[np.argmax(pop.pos)])
    assert isinstance(localized(pop.record(top), tube), bool)


def test_accumulate_examples():
    z = np.linspace(-2, 2, 5)
    acc = ErgodicAccumulator(z, (0.0, 1.0))
    accumulate(acc, ExtremeRecord(0.0, -10.0, max_surviving=-10.0), 0.5)
    assert np.all(acc.occupancy == 0.5)
    accumulate(acc, ExtremeRecord(0.5, 1.0, max_surviving=None), 0.5)
    assert np.all(acc.occupancy == 0.5) and acc.elapsed == 1.0
    with pytest.raises(OutOfWindow):
        accumulate(acc, ExtremeRecord(0.9, 0.0, max_surviving=0.0), 0.5)


@given(st.lists(st.one_of(st.none(), st.floats(-3, 3)), min_size=2, max_size=40),
       st.integers(1, 39))
def test_accumulator_merge_and_monotonicity(maxima, cut):
    cut = min(cut, len(maxima) - 1)
    z = np.linspace(-3, 3, 13)
    dt = 0.25
    n = len(maxima)
    whole = ErgodicAccumulator(z, (0.0, n * dt))
    left = ErgodicAccumulator(z, (0.0, cut * dt))
    right = ErgodicAccumulator(z, (cut * dt, n * dt))
    for i, m in enumerate(maxima):
        rec = ExtremeRecord(i * dt, m, max_surviving=m)
        accumulate(whole, rec, dt)
        accumulate(left if i < cut else right, rec, dt)
        assert np.all(np.diff(whole.occupancy) >= 0)
    merged = left.merge(right)
    assert np.array_equal(merged.occupancy, whole.occupancy)
    assert merged.window == whole.window
    F = whole.cdf()
    assert np.all((F >= 0) & (F <= 1 + 1e-12))
    empty = ErgodicAccumulator.empty(z, (0.0, n * dt))
    assert np.array_equal(empty.merge(whole).occupancy, whole.occupancy)
