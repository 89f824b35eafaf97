import math
from fractions import Fraction

import numpy as np
import pytest

from cramer_excursions.constants import (
    eta_bar_bm, eta_bar_cpd, iglehart_identity_check, iglehart_terms, lattice_correction, levy_constants,
    poisson_rate, rescale_local_time, rw_constants, twopoint_height_tail, twopoint_sup_tail,
)
from cramer_excursions.errors import NonNegativeMean, NonPositiveInput, UnsupportedKind, UnsupportedModel
from cramer_excursions.models import BrownianDrift, CompoundPoissonDrift, GaussianWalk, TwoPointWalk
from cramer_excursions.roots import solve_gamma

from oracles import height_tail_bracket, sup_tail_bracket, tilted_ascending_dp

LN3 = math.log(3)


@pytest.mark.parametrize("j", [1, 2, 3, 5])
def test_twopoint_oracles_against_enumeration(j):
    # the balanced depth-20 brackets contain the formulas; deeper ones pin them
    lo, hi = height_tail_bracket(0.25, j, 20)
    assert lo <= twopoint_height_tail(0.25, j - 1) <= hi
    lo, hi = height_tail_bracket(0.25, j, 300)
    assert twopoint_height_tail(0.25, j - 1) == pytest.approx(lo, rel=1e-12)
    lo, hi = sup_tail_bracket(0.25, j, 20)
    assert lo <= twopoint_sup_tail(0.25, j - 1) <= hi
    lo, hi = sup_tail_bracket(0.4, j, 600)
    assert twopoint_sup_tail(0.4, j - 1) == pytest.approx(hi, rel=1e-9)


def test_twopoint_closed_constants():
    rc = rw_constants(TwoPointWalk(0.25), LN3)
    assert rc.C.value == pytest.approx(1 / 3, abs=1e-15)
    assert rc.K.value == pytest.approx(2 / 9, abs=1e-15)
    assert rc.alpha.value == 2.0
    assert rc.C.method == "closed_form" and rc.C.stderr == 0
    assert rc.lattice_corrected and rc.span == 1
    assert rc.K.value == pytest.approx(rc.C.value * (1 - rc.laplace_H1.value), abs=1e-16)


@pytest.mark.parametrize("p", [0.25, 0.4, 0.1])
def test_closed_form_matches_eq1_with_lattice_factor(p):
    q = 1 - p
    g = math.log(q / p)
    ew, eh, _ = tilted_ascending_dp(p, 800)
    c_nl = (1 - ew) / (g * eh)
    rc = rw_constants(TwoPointWalk(p), g)
    assert c_nl * lattice_correction(g, 1.0) == pytest.approx(rc.C.value, rel=1e-6)
    k = 60
    assert math.exp(g * k) * twopoint_height_tail(p, k) == pytest.approx(rc.K.value, rel=1e-9)


def test_lattice_correction():
    assert lattice_correction(LN3, 1.0) == pytest.approx(LN3 / 2, abs=1e-15)
    assert lattice_correction(1.0, 0.0) == 1.0
    assert lattice_correction(1.0, 1e-9) == pytest.approx(1.0, abs=1e-8)
    vals = [lattice_correction(0.7, d) for d in np.linspace(0.01, 10, 200)]
    assert all(0 < v <= 1 for v in vals) and all(np.diff(vals) < 0)


def test_rw_constants_monte_carlo_gaussian(stream):
    m = GaussianWalk(-0.5, 1)
    rc = rw_constants(m, 1.0, 40_000, stream)
    assert rc.C.method == "monte_carlo" and rc.C.stderr > 0
    assert rc.K.value == pytest.approx(rc.C.value * (1 - rc.laplace_H1.value), rel=1e-14)
    assert not rc.lattice_corrected
    assert rc.alpha.value > 1


def test_rw_constants_mc_lattice_nonsymmetric(stream):
    m = TwoPointWalk(0.3, 2.0, 1.0)
    g = solve_gamma(m).gamma
    rc = rw_constants(m, g, 40_000, stream)
    assert rc.lattice_corrected and rc.span == pytest.approx(1.0)
    assert abs(rc.alpha.value - 1 / abs(m.mean)) <= 4 * rc.alpha.stderr


def test_monte_carlo_route_agrees_with_closed_form(stream, monkeypatch):
    closed = rw_constants(TwoPointWalk(0.25), LN3)
    monkeypatch.setattr(TwoPointWalk, "symmetric_lattice", property(lambda self: False))
    mc = rw_constants(TwoPointWalk(0.25), LN3, 80_000, stream)
    assert mc.C.method == "monte_carlo" and mc.lattice_corrected
    for field in ("C", "K", "alpha", "ladder_finite_prob", "m", "laplace_H1"):
        est, ref = getattr(mc, field), getattr(closed, field).value
        assert abs(est.value - ref) <= 4 * est.stderr + 1e-12, field


def test_rw_constants_errors(stream):
    with pytest.raises(NonNegativeMean):
        rw_constants(GaussianWalk(0.2, 1), 1.0, 1000, stream)
    with pytest.raises(UnsupportedKind):
        rw_constants(BrownianDrift(0.5, 1), 1.0)


def test_iglehart_identity():
    lhs, rhs = iglehart_terms(0.25, 0)
    assert lhs == pytest.approx(1 / 3, abs=1e-16) and rhs == pytest.approx(1 / 3, abs=1e-16)
    p = Fraction(1, 4)
    q = 1 - p
    assert Fraction(2, 8) + Fraction(6, 8) * Fraction(1, 9) == p / q
    assert iglehart_identity_check(TwoPointWalk(0.25), 10) <= 1e-12
    assert iglehart_identity_check(TwoPointWalk(0.4), 10) <= 1e-12
    with pytest.raises(UnsupportedModel):
        iglehart_identity_check(TwoPointWalk(0.25, 2, 2), 3)


def test_levy_constants_closed_forms():
    bm = levy_constants(BrownianDrift(0.5, 1), 1.0)
    assert (bm.C_star, bm.phi_at_gamma, bm.K_star, bm.alpha_star) == (1.0, 1.0, 1.0, 2.0)
    m = CompoundPoissonDrift(2, 1, 1)
    cp = levy_constants(m, solve_gamma(m).gamma)
    assert cp.C_star == pytest.approx(0.5, abs=1e-12)
    assert cp.K_star == pytest.approx(0.25, abs=1e-12)
    assert cp.alpha_star == 1.0
    assert cp.C_star == cp.beta / (cp.gamma * cp.m)
    assert cp.K_star == cp.phi_at_gamma * cp.C_star
    with pytest.raises(UnsupportedKind):
        levy_constants(TwoPointWalk(0.25), LN3)


def test_local_time_rescaling_leaves_rate_invariant():
    cp = levy_constants(CompoundPoissonDrift(2, 1, 1), 0.5)
    for f in (0.1, 3.0, 17.0):
        sc = rescale_local_time(cp, f)
        assert sc.K_star == pytest.approx(cp.K_star / f)
        assert sc.alpha_star == pytest.approx(cp.alpha_star / f)
        assert sc.C_star == cp.C_star
        assert poisson_rate(sc, 1e4, 12.0) == pytest.approx(poisson_rate(cp, 1e4, 12.0), rel=1e-14)


def test_eta_bar_bm_examples():
    assert eta_bar_bm(1.0, math.log(2)) == pytest.approx(1.0, abs=1e-15)
    for x in (1e-4, 1e-6, 1e-8):
        assert eta_bar_bm(1.0, x) * x == pytest.approx(1.0, abs=2 * x)
    assert abs(math.exp(20) * eta_bar_bm(1.0, 20) - 1) < 3e-9
    with pytest.raises(NonPositiveInput):
        eta_bar_bm(1.0, 0.0)
    with pytest.raises(NonPositiveInput):
        eta_bar_bm(-1.0, 1.0)


@pytest.mark.parametrize("gamma,x", [(1.0, 0.5), (1.0, 3.0), (2.5, 1.2), (0.4, 7.0)])
def test_eta_bar_bm_two_sided_exit(gamma, x):
    # P(hit x before -eps) / eps with scale function e^{gamma y}, Richardson in eps
    def ratio(eps):
        return -math.expm1(-gamma * eps) / (math.exp(gamma * x) - math.exp(-gamma * eps)) / eps
    e = 1e-4
    limit = 2 * ratio(e / 2) - ratio(e)
    assert eta_bar_bm(gamma, x) == pytest.approx(limit, rel=1e-6)


def test_eta_bar_bm_decreases_to_k_star():
    xs = np.linspace(0.05, 30, 400)
    vals = [math.exp(x) * eta_bar_bm(1.0, x) for x in xs]
    assert all(np.diff(vals) < 0)
    assert vals[-1] == pytest.approx(1.0, abs=1e-12)


def test_eta_bar_cpd_limits():
    m = CompoundPoissonDrift(2, 1, 1)
    assert eta_bar_cpd(m, 0.5, 0.0) == pytest.approx(0.5)
    assert math.exp(0.5 * 40) * eta_bar_cpd(m, 0.5, 40.0) == pytest.approx(0.25, rel=1e-7)
    vals = [eta_bar_cpd(m, 0.5, x) for x in np.linspace(0, 20, 50)]
    assert all(np.diff(vals) < 0)


@pytest.mark.parametrize("dt", [0.04, 0.01])
def test_discretized_brownian_walk_approaches_c_star(stream, dt):
    # overshoot correction for Gaussian steps: C ~ C* exp(-0.5826 gamma sigma sqrt(dt))
    m = GaussianWalk(-0.5 * dt, math.sqrt(dt))
    rc = rw_constants(m, 1.0, 200_000, stream)
    c_star = levy_constants(BrownianDrift(0.5, 1.0), 1.0).C_star
    target = c_star * math.exp(-0.5826 * math.sqrt(dt))
    assert abs(rc.C.value - target) <= 4 * rc.C.stderr + 0.2 * dt
