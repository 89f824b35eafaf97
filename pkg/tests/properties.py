"""Structural invariants of the excursion decomposition and of cumulants.

Each ``check_*`` takes explicit inputs and raises ``AssertionError`` on a
violation. ``CASES`` pairs every check with a generator of random inputs so
the suite also runs without hypothesis::

    python3 tests/properties.py [cases] [seed]
"""

from __future__ import annotations

import math
import sys

import numpy as np

from cramer_excursions.models import CompoundPoissonDrift, GaussianWalk, TwoPointWalk, tilt
from cramer_excursions.walks import count_high_excursions, excursions, reflect_and_summarize


def check_decomposition_conservation(steps):
    ex = excursions(steps)
    inc = ex.incomplete.length if ex.incomplete else 0
    assert int(ex.length.sum()) + inc == len(steps)
    assert np.all(ex.length >= 1) and np.all(ex.ladder_increment > 0) and np.all(ex.height >= 0)


def check_supremum_decomposition(steps):
    ex = excursions(steps)
    s = reflect_and_summarize(steps).partial_sums
    ladder = np.concatenate(([0.0], np.cumsum(ex.ladder_increment)))
    # S at the start of excursion i is -H_{i-1}; exact to float rounding of the sums
    cands = list(ex.height - ladder[:-1])
    if ex.incomplete is not None:
        cands.append(ex.incomplete.running_height - ladder[-1])
    sup = max(cands) if cands else 0.0
    assert math.isclose(max(float(s.max()), 0.0), max(sup, 0.0), rel_tol=0, abs_tol=1e-9 * (1 + np.abs(s).max()))


def check_max_segmental_score(steps):
    ex = excursions(steps)
    parts = list(ex.height)
    if ex.incomplete is not None:
        parts.append(ex.incomplete.running_height)
    assert reflect_and_summarize(steps).max_segmental_score == max(parts, default=0.0)


def check_count_monotone(steps, ys):
    ex = excursions(steps)
    counts = [count_high_excursions(ex, y) for y in sorted(ys)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))


def _models(params):
    kind, a, b = params
    if kind == "twopoint":
        p = 0.05 + 0.9 * a
        return TwoPointWalk(p, (0.1 + 0.8 * b) * (1 - p) / p, 1.0)
    if kind == "gaussian":
        return GaussianWalk(-0.1 - a, 0.3 + b)
    return CompoundPoissonDrift(1.0 + a, (0.1 + 0.8 * b) * (1.0 + a), 1.0)


def check_tilt_composition(params, g1, g2, thetas):
    m = _models(params)
    lim = m.theta_max
    if math.isfinite(lim):
        g1, g2 = g1 * lim / 3, g2 * lim / 3
        thetas = [t * lim / 3 for t in thetas]
    twice = tilt(tilt(m, g1, check_root=False), g2, check_root=False)
    once = tilt(m, g1 + g2, check_root=False)
    for t in thetas:
        a, b = twice.cumulant(t), once.cumulant(t)
        assert abs(a - b) <= 1e-12 * max(1.0, abs(a)), (t, a, b)


def check_convexity(params, thetas):
    m = _models(params)
    lim = m.theta_max
    t1, t2, t3 = sorted(thetas)
    if math.isfinite(lim):
        t1, t2, t3 = (t * lim * 0.99 / 3 for t in (t1, t2, t3))
    if not t1 < t2 < t3:
        return
    k1, k2, k3 = m.cumulant(t1), m.cumulant(t2), m.cumulant(t3)
    w = (t3 - t2) / (t3 - t1)
    chord = w * k1 + (1 - w) * k3
    assert k2 <= chord + 1e-12 * (1 + abs(k1) + abs(k3))


def _random_steps(rng):
    n = int(rng.integers(0, 200))
    if rng.random() < 0.5:
        up, down = rng.integers(1, 4, size=2)
        return np.where(rng.random(n) < rng.uniform(0.1, 0.6), up, -down).astype(float)
    return rng.normal(rng.uniform(-1, 0.3), rng.uniform(0.2, 2), n)


def _random_params(rng):
    return (["twopoint", "gaussian", "cpd"][int(rng.integers(3))], float(rng.random()), float(rng.random()))


CASES = {
    "decomposition_conservation": lambda rng: check_decomposition_conservation(_random_steps(rng)),
    "supremum_decomposition": lambda rng: check_supremum_decomposition(_random_steps(rng)),
    "max_segmental_score": lambda rng: check_max_segmental_score(_random_steps(rng)),
    "count_monotonicity": lambda rng: check_count_monotone(_random_steps(rng), rng.uniform(0, 6, 8)),
    "tilt_composition": lambda rng: check_tilt_composition(
        _random_params(rng), *rng.uniform(-0.9, 0.9, 2), rng.uniform(-0.9, 0.9, 5)),
    "convexity": lambda rng: check_convexity(_random_params(rng), rng.uniform(-1.5, 2.9, 3)),
}


def run_all(cases=1000, seed=0):
    """Run every property over ``cases`` random inputs; return failures per property."""
    failures = {}
    for i, (name, case) in enumerate(CASES.items()):
        rng = np.random.default_rng([seed, i])
        bad = 0
        for _ in range(cases):
            try:
                case(rng)
            except AssertionError:
                bad += 1
        failures[name] = bad
    return failures


if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    result = run_all(n, seed)
    for name, bad in result.items():
        print(f"{'PASS' if bad == 0 else 'FAIL'} {name}: {n} cases, {bad} failures")
    sys.exit(1 if any(result.values()) else 0)
