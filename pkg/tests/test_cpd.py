import math

import numpy as np
import pytest

from cramer_excursions.constants import eta_bar_cpd, levy_constants
from cramer_excursions.cpd import (
    Events, eta_tail_estimate, join_paths, reflect_exact, simulate_events, simulate_path,
)
from cramer_excursions.errors import InsufficientCounts, UnsupportedKind
from cramer_excursions.models import BrownianDrift, CompoundPoissonDrift
from cramer_excursions.rng import Stream

from oracles import lindley_reflect

MODEL = CompoundPoissonDrift(2, 1, 1)


def _events(times, sizes, horizon, t0=0.0):
    return Events(np.asarray(times, float), np.asarray(sizes, float), t0, horizon)


def test_hand_example():
    m = CompoundPoissonDrift(1, 1, 2)
    path = reflect_exact(_events([1.0, 1.5], [2.0, 1.0], 5.0), m)
    assert path.start.tolist() == [1.0]
    assert path.end.tolist() == [4.0]
    assert path.height.tolist() == [2.5]
    assert path.complete.tolist() == [True]
    assert path.local_time == pytest.approx(2.0)
    assert path.time_at_minimum == pytest.approx(2.0)


def test_open_excursion_at_horizon():
    m = CompoundPoissonDrift(1, 1, 2)
    path = reflect_exact(_events([1.0], [3.0], 2.0), m)
    assert path.n_incomplete == 1 and math.isnan(path.end[0])
    assert path.final.y == pytest.approx(2.0) and path.final.open_jump == 3.0
    assert path.complete_heights.size == 0


def test_no_jumps_local_time_is_linear():
    for c, t in [(2.0, 3.5), (0.7, 10.0)]:
        path = reflect_exact(_events([], [], t), CompoundPoissonDrift(c, 1, 2))
        assert path.local_time == pytest.approx(c * t)
        assert path.height.size == 0


def test_agrees_with_lindley_loop(stream):
    for i in range(20):
        m = CompoundPoissonDrift(1.5, 1.0, 0.9 + 0.05 * i)
        ev = simulate_events(m, 200.0, stream.child(i))
        path = reflect_exact(ev, m)
        ref, lt = lindley_reflect(ev.times, ev.sizes, m.c, ev.horizon)
        assert len(ref) == path.height.size
        np.testing.assert_allclose(path.start, [r[0] for r in ref], rtol=0, atol=1e-9)
        np.testing.assert_allclose(path.height, [r[2] for r in ref], rtol=0, atol=1e-9)
        np.testing.assert_allclose(path.end, [r[1] for r in ref], rtol=0, atol=1e-9)
        assert path.local_time == pytest.approx(lt, abs=1e-8)


def test_local_time_equals_c_times_time_at_minimum(stream):
    path = simulate_path(MODEL, 5000.0, stream)
    assert path.local_time == pytest.approx(MODEL.c * path.time_at_minimum, rel=1e-9)
    assert path.local_time >= -path.i_after.min() - 1e-9


def test_excursion_geometry(stream):
    path = simulate_path(MODEL, 5000.0, stream)
    ok = path.complete
    assert np.all(path.height >= path.open_jump - 1e-12)
    assert np.all(path.end[ok] > path.start[ok])
    assert np.all(path.start[1:] >= path.end[:-1][ok[:-1]])


@pytest.mark.parametrize("cut", [0.3, 0.5, 0.77])
def test_join_paths_matches_single_window(stream, cut):
    ev = simulate_events(MODEL, 400.0, stream)
    whole = reflect_exact(ev, MODEL)
    left, right = ev.split(cut * 400.0)
    a = reflect_exact(left, MODEL)
    b = reflect_exact(right, MODEL, a.final)
    j = join_paths(a, b)
    for name in ("start", "height", "open_jump"):
        np.testing.assert_allclose(getattr(j, name), getattr(whole, name), atol=1e-9)
    np.testing.assert_allclose(j.end, whole.end, atol=1e-9)
    assert j.local_time == pytest.approx(whole.local_time, abs=1e-8)
    assert j.time_at_minimum == pytest.approx(whole.time_at_minimum, abs=1e-8)


def test_join_is_associative(stream):
    ev = simulate_events(MODEL, 300.0, stream)
    l, rest = ev.split(100.0)
    mid, r = rest.split(200.0)
    a = reflect_exact(l, MODEL)
    b = reflect_exact(mid, MODEL, a.final)
    c = reflect_exact(r, MODEL, b.final)
    x, y = join_paths(join_paths(a, b), c), join_paths(a, join_paths(b, c))
    np.testing.assert_array_equal(x.height, y.height)
    np.testing.assert_array_equal(np.nan_to_num(x.end), np.nan_to_num(y.end))
    assert x.local_time == pytest.approx(y.local_time, abs=1e-9)


def test_jump_count_and_determinism():
    ev = simulate_events(MODEL, 10_000.0, Stream(5))
    assert abs(ev.times.size - 10_000) <= 400
    assert np.all(np.diff(ev.times) >= 0)
    again = simulate_events(MODEL, 10_000.0, Stream(5))
    assert np.array_equal(ev.times, again.times) and np.array_equal(ev.sizes, again.sizes)


def test_local_time_rate_matches_alpha_star(stream):
    path = simulate_path(MODEL, 2e5, stream)
    alpha = levy_constants(MODEL, 0.5).alpha_star
    assert path.local_time / 2e5 == pytest.approx(1 / alpha, abs=0.02)


def test_tail_estimate_against_exact_curve(stream):
    xs = np.array([0.0, 1.0, 2.0, 4.0, 6.0])
    est = eta_tail_estimate(MODEL, 0.5, xs, 2e5, 10, stream)
    exact = np.array([eta_bar_cpd(MODEL, 0.5, x) for x in xs])
    assert np.all(np.abs(est.eta_hat - exact) <= 4 * est.stderr)
    assert np.all(np.diff(est.counts) <= 0)
    assert est.local_time_rate == pytest.approx(1.0, abs=4 * est.local_time_rate_stderr + 1e-3)


def test_tail_estimate_gates(stream):
    with pytest.raises(InsufficientCounts):
        eta_tail_estimate(MODEL, 0.5, [0.0, 40.0], 1e4, 10, stream)
    with pytest.raises(ValueError):
        eta_tail_estimate(MODEL, 0.5, [0.0, 1.0], 1e4, 5, stream)
    with pytest.raises(UnsupportedKind):
        simulate_path(BrownianDrift(0.5, 1), 10.0, stream)
