"""Catalog of step laws and Lévy mechanisms.

Four kinds are supported, each with a closed-form cumulant
``kappa(theta) = log E exp(theta * X_1)`` (per step for walks, per unit time
for the Lévy kinds) and its derivative:

* :class:`TwoPointWalk` -- steps ``+a_up`` w.p. ``p`` and ``-a_down`` otherwise.
* :class:`GaussianWalk` -- N(mu, sigma^2) steps.
* :class:`CompoundPoissonDrift` -- drift ``-c`` plus Poisson(rho) jumps that
  are exponential with rate ``nu``.
* :class:`BrownianDrift` -- drift ``-mu_abs`` plus ``sigma`` times a Brownian
  motion.

Every model is immutable. Constructing a model with nonnegative mean raises
:class:`~cramer_excursions.errors.NonNegativeMean`; only :func:`tilt` produces
positive-drift models, and those carry the tilt in ``tilted_by``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .errors import DomainBoundary, InvalidModel, NonNegativeMean, NotARoot, UnsupportedKind
from .rng import Stream

ROOT_TOL = 1e-9
MAX_LATTICE_DENOMINATOR = 10**6


class Model:
    kind: str = ""
    is_walk: bool = False
    tilted_by: float = 0.0

    @property
    def theta_max(self) -> float:
        return math.inf

    def _kappa(self, theta: float) -> float:
        raise NotImplementedError

    def _dkappa(self, theta: float) -> float:
        raise NotImplementedError

    def _check_domain(self, theta: float) -> None:
        if not theta < self.theta_max:
            raise DomainBoundary(
                f"theta={theta!r} outside cumulant domain [0, {self.theta_max!r}) of {self.kind}"
            )

    def cumulant(self, theta: float) -> float:
        self._check_domain(theta)
        if theta == 0:
            return 0.0
        return self._kappa(theta)

    def dcumulant(self, theta: float) -> float:
        self._check_domain(theta)
        return self._dkappa(theta)

    @property
    def mean(self) -> float:
        return self._dkappa(0.0)

    @property
    def span(self) -> float:
        return 0.0

    def _gate(self) -> None:
        if self.tilted_by == 0.0 and not self.mean < 0:
            raise NonNegativeMean(f"{self.kind} has mean {self.mean!r}; a negative drift is required")

    def params(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "tilted_by" and v is not None}
        if self.tilted_by:
            d["tilted_by"] = self.tilted_by
        return {"kind": self.kind, **d}


def _positive(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise InvalidModel(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class TwoPointWalk(Model):
    p: float
    a_up: float = 1.0
    a_down: float = 1.0
    tilted_by: float = 0.0
    # set by tilt(): 1 - p loses the small weight when p is close to 1
    q_tilted: float | None = field(default=None, repr=False)

    kind = "twopoint"
    is_walk = True

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise InvalidModel(f"p must lie in (0, 1), got {self.p!r}")
        _positive("a_up", self.a_up)
        _positive("a_down", self.a_down)
        if self.q_tilted is not None and not (0 < self.q_tilted < 1 and abs(self.p + self.q_tilted - 1) <= 1e-12):
            raise InvalidModel(f"weights {self.p!r}, {self.q_tilted!r} do not sum to 1")
        self._gate()

    @property
    def q(self) -> float:
        return 1.0 - self.p if self.q_tilted is None else self.q_tilted

    def _kappa(self, theta):
        return float(np.logaddexp(math.log(self.p) + theta * self.a_up,
                                  math.log(self.q) - theta * self.a_down))

    def _up_weight(self, theta):
        # P(up) under the law tilted by theta
        return math.exp(math.log(self.p) + theta * self.a_up - self._kappa(theta)) if theta else self.p

    def _down_weight(self, theta):
        return math.exp(math.log(self.q) - theta * self.a_down - self._kappa(theta)) if theta else self.q

    def _dkappa(self, theta):
        return self._up_weight(theta) * self.a_up - self._down_weight(theta) * self.a_down

    @property
    def span(self) -> float:
        ratio = self.a_up / self.a_down
        frac = Fraction(ratio).limit_denominator(MAX_LATTICE_DENOMINATOR)
        if abs(float(frac) - ratio) > 1e-12 * ratio:
            return 0.0
        # a_up = num * d, a_down = den * d with gcd(num, den) = 1
        return self.a_down / frac.denominator

    @property
    def symmetric_lattice(self) -> bool:
        return self.a_up == self.a_down


@dataclass(frozen=True)
class GaussianWalk(Model):
    mu: float
    sigma: float = 1.0
    tilted_by: float = 0.0

    kind = "gaussian"
    is_walk = True

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise InvalidModel("mu must be finite")
        _positive("sigma", self.sigma)
        self._gate()

    def _kappa(self, theta):
        return self.mu * theta + 0.5 * self.sigma**2 * theta**2

    def _dkappa(self, theta):
        return self.mu + self.sigma**2 * theta


@dataclass(frozen=True)
class CompoundPoissonDrift(Model):
    """Drift ``-c`` with upward exponential(``nu``) jumps at rate ``rho``.

    ``rho = 0`` is admitted (pure downward drift); it has no Cramér root.
    """

    c: float
    rho: float
    nu: float
    tilted_by: float = 0.0

    kind = "cpd"

    def __post_init__(self):
        _positive("c", self.c)
        _positive("nu", self.nu)
        if not (math.isfinite(self.rho) and self.rho >= 0):
            raise InvalidModel(f"rho must be nonnegative, got {self.rho!r}")
        self._gate()

    @property
    def theta_max(self) -> float:
        return self.nu

    def _kappa(self, theta):
        return -self.c * theta + self.rho * theta / (self.nu - theta)

    def _dkappa(self, theta):
        return -self.c + self.rho * self.nu / (self.nu - theta) ** 2


@dataclass(frozen=True)
class BrownianDrift(Model):
    mu_abs: float
    sigma: float = 1.0
    tilted_by: float = 0.0

    kind = "brownian"

    def __post_init__(self):
        if self.tilted_by == 0.0:
            if not self.mu_abs > 0:
                raise NonNegativeMean(f"brownian drift is {-self.mu_abs!r}; mu_abs must be positive")
        elif not math.isfinite(self.mu_abs):
            raise InvalidModel("mu_abs must be finite")
        _positive("sigma", self.sigma)

    def _kappa(self, theta):
        return -self.mu_abs * theta + 0.5 * self.sigma**2 * theta**2

    def _dkappa(self, theta):
        return -self.mu_abs + self.sigma**2 * theta


KINDS = {cls.kind: cls for cls in (TwoPointWalk, GaussianWalk, CompoundPoissonDrift, BrownianDrift)}


def cumulant(model: Model, theta: float) -> float:
    return model.cumulant(theta)


def mean_and_span(model: Model) -> tuple[float, float]:
    return model.mean, model.span


def tilt(model: Model, gamma: float, *, check_root: bool = True, tol: float = ROOT_TOL) -> Model:
    """Exponentially tilt ``model`` by ``gamma``.

    The result has cumulant ``kappa(theta + gamma) - kappa(gamma)``. With
    ``check_root`` (the default) ``gamma`` must be a positive Cramér root, so
    the tilted law is a proper probability law with positive drift; pass
    ``check_root=False`` to tilt by an arbitrary ``gamma`` in the domain.
    """
    model._check_domain(gamma)
    if check_root:
        if not gamma > 0:
            raise DomainBoundary(f"tilt requires gamma > 0, got {gamma!r}")
        residual = model.cumulant(gamma)
        if abs(residual) > tol:
            raise NotARoot(f"kappa({gamma!r}) = {residual!r} exceeds tolerance {tol!r}")
    total = model.tilted_by + gamma
    if isinstance(model, TwoPointWalk):
        return replace(model, p=model._up_weight(gamma), q_tilted=model._down_weight(gamma), tilted_by=total)
    if isinstance(model, GaussianWalk):
        return replace(model, mu=model.mu + gamma * model.sigma**2, tilted_by=total)
    if isinstance(model, BrownianDrift):
        return replace(model, mu_abs=model.mu_abs - gamma * model.sigma**2, tilted_by=total)
    if isinstance(model, CompoundPoissonDrift):
        nu = model.nu - gamma
        return replace(model, rho=model.rho * model.nu / nu, nu=nu, tilted_by=total)
    raise UnsupportedKind(type(model).__name__)


def draw(model: Model, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` steps of a walk model from an already-open generator."""
    if isinstance(model, TwoPointWalk):
        return np.where(rng.random(n) < model.p, model.a_up, -model.a_down)
    if isinstance(model, GaussianWalk):
        return rng.normal(model.mu, model.sigma, n)
    raise UnsupportedKind(f"{model.kind} is a Lévy model; simulate it with cramer_excursions.cpd")


def sample(model: Model, stream: Stream, n: int) -> np.ndarray:
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not model.is_walk:
        raise UnsupportedKind(f"{model.kind} is a Lévy model; simulate it with cramer_excursions.cpd")
    return draw(model, stream.generator(), n)


def build_model(kind: str, **params) -> Model:
    try:
        cls = KINDS[kind]
    except KeyError:
        raise InvalidModel(f"unknown model kind {kind!r}; expected one of {sorted(KINDS)}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise InvalidModel(f"bad parameters for {kind}: {exc}") from None
