"""Positive root of Cramér's condition ``kappa(gamma) = 0``."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NonNegativeMean, NoPositiveRoot, ToleranceNotReached
from .models import Model

DEFAULT_TOL = 1e-12
MAX_ITER = 200
BOUNDARY_SHRINK = 1e-9
MAX_DOUBLINGS = 64
COARSE_WIDTH = 1e-3


@dataclass(frozen=True)
class CramerRoot:
    gamma: float
    residual: float
    iterations: int
    bracket: tuple[float, float]
    method: str = "bisection+newton"


def _upper_bracket(model: Model) -> float:
    if math.isfinite(model.theta_max):
        hi = model.theta_max * (1.0 - BOUNDARY_SHRINK)
        if model.cumulant(hi) > 0:
            return hi
        raise NoPositiveRoot(f"kappa stays nonpositive on [0, {model.theta_max!r}) for {model.kind}")
    hi = 1.0
    for _ in range(MAX_DOUBLINGS):
        if model.cumulant(hi) > 0:
            return hi
        hi *= 2.0
    raise NoPositiveRoot(f"kappa({hi!r}) still nonpositive for {model.kind}")


def solve_gamma(model: Model, tol: float = DEFAULT_TOL, method: str = "bisection+newton",
                max_iter: int = MAX_ITER) -> CramerRoot:
    """Find the unique ``gamma > 0`` with ``|kappa(gamma)| <= tol``.

    The bracket ``(lo, hi)`` is grown until ``kappa(hi) > 0``, narrowed by
    bisection to a relative width of ``1e-3`` and then polished with Newton
    steps on the closed-form derivative. A Newton step that leaves the bracket
    is replaced by a bisection step. ``method="bisection"`` skips the polish.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not model.mean < 0:
        raise NonNegativeMean(f"{model.kind} mean {model.mean!r} is not negative")
    kappa = model.cumulant
    lo, hi = 0.0, _upper_bracket(model)
    newton = method == "bisection+newton"
    if not newton and method != "bisection":
        raise ValueError(f"unknown method {method!r}")

    it = 0
    # coarse bisection; also moves lo off 0 so that kappa(lo) < 0 strictly
    while it < max_iter and (lo == 0.0 or (newton and hi - lo > COARSE_WIDTH * hi)):
        mid = 0.5 * (lo + hi)
        it += 1
        if kappa(mid) < 0:
            lo = mid
        else:
            hi = mid
    bracket = (lo, hi)

    f_hi = kappa(hi)
    if abs(f_hi) <= tol:
        x, fx = hi, f_hi
    else:
        x = 0.5 * (lo + hi)
        fx = kappa(x)
    while abs(fx) > tol:
        if it >= max_iter or hi - lo <= 4 * math.ulp(hi):
            raise ToleranceNotReached(
                f"|kappa| = {abs(fx)!r} > {tol!r} after {it} iterations (bracket {lo!r}, {hi!r})")
        it += 1
        if fx < 0:
            lo = x
        else:
            hi = x
        step = None
        if newton:
            d = model.dcumulant(x)
            if d > 0:
                step = x - fx / d
        if step is None or not lo <= step <= hi:
            step = 0.5 * (lo + hi)
        x = step
        fx = kappa(x)
    return CramerRoot(gamma=x, residual=fx, iterations=it, bracket=bracket, method=method)
