"""Limit constants of the exponential tail estimates.

Random walks (:func:`rw_constants`)::

    P(M_inf > x)  ~ C e^{-gamma x},   C = P(H+ = inf) / (gamma m)
    P(h_1 > x)    ~ K e^{-gamma x},   K = C (1 - E e^{-gamma H_1})
    alpha = E T_1

where ``m = E[H+ e^{gamma H+}; H+ < inf]`` and ``H+`` is the first weak
ascending ladder height. On a lattice of span ``d`` the limits hold along
``x in dZ`` with ``C`` multiplied by :func:`lattice_correction`.

Lévy models (:func:`levy_constants`) use the local time ``L = -I``. Both
supported mechanisms creep downward, so the descending ladder height process
is ``H_t = t`` and ``phi(theta) = theta``; then ``K* = phi(gamma) C*`` and
``alpha* = E L^{-1}_1 = 1 / |E X_1|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NonPositiveInput, NotARoot, UnsupportedKind, UnsupportedModel
from .models import ROOT_TOL, BrownianDrift, CompoundPoissonDrift, Model, TwoPointWalk
from .rng import Stream
from .walks import DEFAULT_STEP_CAP, Mapper, mean_and_stderr, sample_first_ladder, sample_weak_ascending_tilted

CLOSED_FORM = "closed_form"
MONTE_CARLO = "monte_carlo"
MIN_BUDGET = 1000


@dataclass(frozen=True)
class EstimateWithCI:
    value: float
    stderr: float = 0.0
    n: int = 0
    method: str = CLOSED_FORM

    @classmethod
    def exact(cls, value: float) -> "EstimateWithCI":
        return cls(float(value))

    def as_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "n": self.n, "method": self.method}


@dataclass(frozen=True)
class RwConstants:
    gamma: float
    C: EstimateWithCI
    K: EstimateWithCI
    alpha: EstimateWithCI
    span: float
    lattice_corrected: bool
    ladder_finite_prob: EstimateWithCI
    m: EstimateWithCI
    laplace_H1: EstimateWithCI
    censored: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LevyConstants:
    gamma: float
    beta: float
    m: float
    phi_at_gamma: float
    alpha_star: float
    normalization: str = "L=-I"
    ascending_normalization: str = ""

    @property
    def C_star(self) -> float:
        return self.beta / (self.gamma * self.m)

    @property
    def K_star(self) -> float:
        return self.phi_at_gamma * self.C_star


def lattice_correction(gamma: float, d: float) -> float:
    """Factor turning the nonlattice Cramér constant into the lattice one.

    ``gamma d e^{-gamma d} / (1 - e^{-gamma d})``, equal to 1 at ``d = 0``.
    """
    if d == 0:
        return 1.0
    x = gamma * d
    return x / math.expm1(x)


# Exact laws for TwoPointWalk(p, +-1), r = q/p > 1.

def twopoint_sup_tail(p: float, k: int) -> float:
    """``P(M_inf > k) = (p/q)^(k+1)``."""
    return (p / (1.0 - p)) ** (k + 1)


def twopoint_height_tail(p: float, k: int) -> float:
    """``P(h_1 > k) = p (r^2 - 1) / (r^(k+2) - 1)`` (gambler's ruin)."""
    if k < 0:
        return 1.0
    r = (1.0 - p) / p
    return p * (r * r - 1.0) / (r ** (k + 2) - 1.0)


def _check_root(model: Model, gamma: float) -> None:
    residual = model.cumulant(gamma)
    if abs(residual) > ROOT_TOL:
        raise NotARoot(f"kappa({gamma!r}) = {residual!r}")


def _twopoint_closed(model: TwoPointWalk, gamma: float) -> RwConstants:
    p, q, a = model.p, model.q, model.a_up
    ratio = p / q
    C = ratio
    return RwConstants(
        gamma=gamma,
        C=EstimateWithCI.exact(C),
        K=EstimateWithCI.exact(C * (1.0 - ratio)),
        alpha=EstimateWithCI.exact(1.0 / (q - p)),
        span=a,
        lattice_corrected=True,
        ladder_finite_prob=EstimateWithCI.exact(2.0 * p),
        m=EstimateWithCI.exact(q * a),
        laplace_H1=EstimateWithCI.exact(ratio),
    )


def rw_constants(model: Model, gamma: float, budget: int = 10**6, stream: Stream | None = None,
                 mapper: Mapper = map, step_cap: int = DEFAULT_STEP_CAP) -> RwConstants:
    """Cramér constants ``(C, K, alpha)`` of a random walk.

    Symmetric two-point walks use closed forms. Otherwise the budget is split
    50/25/25 between tilted ascending ladder heights (for ``C``), first
    descending ladder heights (for ``E e^{-gamma H_1}``) and first ladder
    epochs (for ``alpha``); standard errors come from the delta method.
    """
    if not model.is_walk:
        raise UnsupportedKind(f"{model.kind} is not a random walk; use levy_constants")
    _check_root(model, gamma)
    if isinstance(model, TwoPointWalk) and model.symmetric_lattice:
        return _twopoint_closed(model, gamma)
    if budget < MIN_BUDGET:
        raise ValueError(f"budget must be at least {MIN_BUDGET}")
    if stream is None:
        raise ValueError("Monte Carlo constants need a stream")

    n_c, n_k = budget // 2, budget // 4
    n_a = budget - n_c - n_k
    asc = sample_weak_ascending_tilted(model, gamma, stream.child("C"), n_c, step_cap, mapper)
    w, hp = asc.weight, asc.H
    G, G_se = mean_and_stderr(w)
    m, m_se = mean_and_stderr(hp)
    cov = float(np.cov(w, hp)[0, 1]) / len(w)
    C_nl = (1.0 - G) / (gamma * m)
    dG, dm = -1.0 / (gamma * m), -C_nl / m
    C_nl_se = math.sqrt(max(dG**2 * G_se**2 + dm**2 * m_se**2 + 2 * dG * dm * cov, 0.0))
    d = model.span
    factor = lattice_correction(gamma, d)
    C, C_se = C_nl * factor, C_nl_se * factor

    first = sample_first_ladder(model, stream.child("K"), n_k, step_cap, mapper)
    E, E_se = mean_and_stderr(np.exp(-gamma * first.H))
    K = C * (1.0 - E)
    K_se = math.sqrt((1.0 - E) ** 2 * C_se**2 + C**2 * E_se**2)

    epochs = sample_first_ladder(model, stream.child("alpha"), n_a, step_cap, mapper)
    alpha, alpha_se = mean_and_stderr(epochs.T.astype(float))

    mc = lambda v, se, n: EstimateWithCI(float(v), float(se), int(n), MONTE_CARLO)  # noqa: E731
    return RwConstants(
        gamma=gamma,
        C=mc(C, C_se, asc.n),
        K=mc(K, K_se, first.n),
        alpha=mc(alpha, alpha_se, epochs.n),
        span=d,
        lattice_corrected=d > 0,
        ladder_finite_prob=mc(G, G_se, asc.n),
        m=mc(m, m_se, asc.n),
        laplace_H1=mc(E, E_se, first.n),
        censored={"ascending_tilted": asc.censored_fraction, "first_ladder": first.censored_fraction,
                  "alpha": epochs.censored_fraction},
    )


def levy_constants(model: Model, gamma: float) -> LevyConstants:
    """Closed-form ``(beta, m, phi(gamma), C*, K*, alpha*)`` under ``L = -I``.

    ``beta`` and ``m`` depend on how the ascending ladder local time is
    normalized; only ``C* = beta / (gamma m)`` does not. The pair reported is
    the canonical one for each kind, named in ``ascending_normalization``:

    * Brownian: ``H+_t = t`` killed at rate ``beta = gamma``, so ``m = 1``.
    * Compound Poisson: ladder jumps plus killing occur at unit total rate,
      so ``beta = 1 - rho/(c nu)`` and ``m = beta / (gamma C*)``.
    """
    if model.is_walk:
        raise UnsupportedKind(f"{model.kind} is a random walk; use rw_constants")
    _check_root(model, gamma)
    if isinstance(model, BrownianDrift):
        return LevyConstants(gamma=gamma, beta=gamma, m=1.0, phi_at_gamma=gamma,
                             alpha_star=1.0 / model.mu_abs, ascending_normalization="unit_drift")
    if isinstance(model, CompoundPoissonDrift):
        c_star = model.rho / (model.c * model.nu)
        beta = 1.0 - c_star
        return LevyConstants(gamma=gamma, beta=beta, m=beta / (gamma * c_star), phi_at_gamma=gamma,
                             alpha_star=1.0 / (model.c - model.rho / model.nu),
                             ascending_normalization="unit_event_rate")
    raise UnsupportedKind(type(model).__name__)


def rescale_local_time(consts: LevyConstants, factor: float) -> LevyConstants:
    """Constants under the local time ``factor * L``.

    The excursion measure and ``phi`` scale by ``1/factor`` and ``alpha*`` by
    ``1/factor``; ``C*`` and the Poisson rate ``t K* e^{-gamma y} / alpha*``
    are unchanged.
    """
    if not factor > 0:
        raise NonPositiveInput("factor must be positive")
    return replace(consts, phi_at_gamma=consts.phi_at_gamma / factor,
                   alpha_star=consts.alpha_star / factor,
                   normalization=f"{factor!r}*({consts.normalization})")


def poisson_rate(consts: LevyConstants, t: float, y: float) -> float:
    return t * consts.K_star * math.exp(-consts.gamma * y) / consts.alpha_star


def eta_bar_bm(gamma: float, x: float) -> float:
    """Rate of excursions higher than ``x`` for Brownian motion with drift.

    Per unit of ``L = -I``: ``gamma / (e^{gamma x} - 1)``.
    """
    if not (gamma > 0 and x > 0):
        raise NonPositiveInput(f"gamma and x must be positive (gamma={gamma!r}, x={x!r})")
    return gamma / math.expm1(gamma * x)


def eta_bar_cpd(model: CompoundPoissonDrift, gamma: float, x: float) -> float:
    """Exact excursion-height tail for drift plus exponential jumps, per unit of ``L = -I``.

    Excursions start at rate ``rho/c`` with an Exp(nu) jump ``J``. From level
    ``y`` the path overshoots ``x`` (by an Exp(nu) amount) before creeping to
    0 with probability ``(e^{gamma y} - 1) / (e^{gamma x} nu/(nu-gamma) - 1)``,
    by optional stopping of ``e^{gamma X}``; integrate over ``J <= x``.
    """
    if x < 0:
        raise NonPositiveInput("x must be nonnegative")
    nu, g = model.nu, gamma
    below = nu * -math.expm1(-(nu - g) * x) / (nu - g) + math.expm1(-nu * x)
    denom = math.exp(g * x) * nu / (nu - g) - 1.0
    return model.rho / model.c * (math.exp(-nu * x) + below / denom)


def iglehart_terms(p: float, k: int) -> tuple[float, float]:
    """Both sides of the first-excursion decomposition of ``P(M_inf > k)``.

    With unit steps ``H_1 = 1``, so the integral over the ladder height
    collapses to ``P(h_1 <= k) P(M_inf > k + 1)``.
    """
    lhs = twopoint_sup_tail(p, k)
    rhs = twopoint_height_tail(p, k) + (1.0 - twopoint_height_tail(p, k)) * twopoint_sup_tail(p, k + 1)
    return lhs, rhs


def iglehart_identity_check(model: Model, k_max: int) -> float:
    if not (isinstance(model, TwoPointWalk) and model.a_up == 1 and model.a_down == 1):
        raise UnsupportedModel("identity check needs TwoPointWalk with unit steps")
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    return max(abs(lhs - rhs) for lhs, rhs in (iglehart_terms(model.p, k) for k in range(k_max + 1)))
