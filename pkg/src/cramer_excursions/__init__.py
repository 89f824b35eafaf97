"""Cramér-type tail constants and high-excursion Poisson limits for reflected
random walks and Lévy processes."""

__version__ = "0.1.0"

from .models import (BrownianDrift, CompoundPoissonDrift, GaussianWalk, TwoPointWalk, cumulant,  # noqa: E402
                     mean_and_span, sample, tilt)
from .roots import solve_gamma  # noqa: E402
from .rng import Stream  # noqa: E402

__all__ = [
    "BrownianDrift", "CompoundPoissonDrift", "GaussianWalk", "TwoPointWalk", "Stream",
    "cumulant", "mean_and_span", "sample", "solve_gamma", "tilt",
]
