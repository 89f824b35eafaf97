"""Statistical checks: log-linear tail fits, Poisson goodness of fit, Wilson
intervals and the replicated high-excursion Poisson experiment."""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import special, stats

from .constants import levy_constants, rw_constants, twopoint_height_tail
from .cpd import simulate_path
from .errors import DegenerateBinning, InsufficientData, InsufficientRate, UnsupportedKind
from .models import CompoundPoissonDrift, Model, TwoPointWalk, draw
from .roots import solve_gamma
from .rng import Stream
from .walks import Mapper, excursions

MIN_EXPECTED = 5.0
MIN_GOF_TOTAL = 50
MIN_REPLICATIONS = 500
MIN_LAMBDA = 1e-4
P_THRESHOLD = 1e-3


@dataclass(frozen=True)
class TailFit:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    points_used: int
    dropped: int = 0


def tail_fit(x: Sequence[float], survival: Sequence[float], weights: Sequence[float],
             cov: np.ndarray | None = None) -> TailFit:
    """Weighted least squares of ``log(survival)`` on ``x``.

    ``weights`` are inverse variances of ``log(survival)``. Without ``cov``
    the standard errors assume independent points; with ``cov`` (the full
    covariance matrix of ``log(survival)``, e.g. from :func:`survival_curve`)
    they use the sandwich form. Points with zero survival are dropped.
    """
    x = np.asarray(x, dtype=float)
    s = np.asarray(survival, dtype=float)
    w = np.asarray(weights, dtype=float)
    if not (x.shape == s.shape == w.shape and x.ndim == 1):
        raise ValueError("x, survival and weights must be 1-d of equal length")
    if np.any(s < 0) or np.any(s > 1):
        raise ValueError("survival values must lie in [0, 1]")
    keep = s > 0
    dropped = int(np.count_nonzero(~keep))
    if dropped:
        warnings.warn(f"tail_fit: dropped {dropped} zero-survival points", RuntimeWarning, stacklevel=2)
    if np.count_nonzero(keep) < 3:
        raise InsufficientData(f"need at least 3 points with positive survival, have {np.count_nonzero(keep)}")
    x, s, w = x[keep], s[keep], w[keep]
    if np.any(~(w > 0)):
        raise ValueError("weights must be positive")
    X = np.column_stack([np.ones_like(x), x])
    sw = np.sqrt(w)
    beta, *_ = np.linalg.lstsq(X * sw[:, None], np.log(s) * sw, rcond=None)
    bread = np.linalg.inv(X.T @ (w[:, None] * X))
    if cov is None:
        vcov = bread
    else:
        cov = np.asarray(cov, dtype=float)[np.ix_(keep, keep)]
        A = bread @ (X.T * w)
        vcov = A @ cov @ A.T
    return TailFit(slope=float(beta[1]), intercept=float(beta[0]),
                   slope_stderr=float(math.sqrt(vcov[1, 1])),
                   intercept_stderr=float(math.sqrt(vcov[0, 0])),
                   points_used=int(x.size), dropped=dropped)


def survival_curve(samples: np.ndarray, x_grid: Sequence[float]):
    """Empirical ``P(X > x)`` on a grid with the delta-method covariance of its log.

    Returns ``(survival, weights, cov)`` ready for :func:`tail_fit`.
    """
    samples = np.sort(np.asarray(samples, dtype=float))
    x = np.asarray(x_grid, dtype=float)
    n = samples.size
    s = (n - np.searchsorted(samples, x, side="right")) / n
    with np.errstate(divide="ignore", invalid="ignore"):
        # Cov(S_i, S_j) = (S(max(x_i, x_j)) - S_i S_j) / n
        smin = np.minimum.outer(s, s)
        cov = (smin - np.outer(s, s)) / (n * np.outer(s, s))
        weights = 1.0 / np.diag(cov)
    return s, weights, cov


def exponential_tail_fit(samples: np.ndarray, x_grid: Sequence[float]) -> TailFit:
    s, w, cov = survival_curve(samples, x_grid)
    ok = s > 0
    return tail_fit(np.asarray(x_grid)[ok], s[ok], w[ok], cov[np.ix_(ok, ok)])


def _merge_cells(observed: np.ndarray, expected: np.ndarray) -> tuple[list[float], list[float]]:
    obs_cells, exp_cells = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= MIN_EXPECTED:
            obs_cells.append(acc_o)
            exp_cells.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if exp_cells:
            obs_cells[-1] += acc_o
            exp_cells[-1] += acc_e
        else:
            obs_cells.append(acc_o)
            exp_cells.append(acc_e)
    return obs_cells, exp_cells


def poisson_gof(counts: Mapping[int, float], lam: float) -> tuple[float, int, float, float]:
    """Chi-square test of a count histogram against Poisson(``lam``).

    ``counts`` maps each observed count value to its frequency. Cells are
    built from 0 upward, the last one collecting everything above the largest
    observed value; a cell is closed once its expected frequency reaches 5,
    and a short remainder joins the last closed cell. ``lam`` is given, not
    fitted, so ``dof = cells - 1``.

    Returns ``(chi_square, dof, p_value, tv_distance)``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if any(int(k) != k or k < 0 for k in counts):
        raise ValueError("histogram keys must be nonnegative integers")
    total = float(sum(counts.values()))
    if total < MIN_GOF_TOTAL:
        raise ValueError(f"need at least {MIN_GOF_TOTAL} replications, have {total}")
    top = int(max(counts)) if counts else 0
    ks = np.arange(top + 1)
    observed = np.array([float(counts.get(int(k), 0.0)) for k in ks] + [0.0])
    expected = total * np.append(stats.poisson.pmf(ks, lam), stats.poisson.sf(top, lam))
    obs, exp = _merge_cells(observed, expected)
    if len(obs) < 2:
        raise DegenerateBinning("fewer than 2 cells with expected frequency >= 5")
    obs, exp = np.array(obs), np.array(exp)
    chi2 = float(np.sum((obs - exp) ** 2 / exp))
    dof = len(obs) - 1
    p = float(special.gammaincc(dof / 2.0, chi2 / 2.0))
    tv = float(0.5 * np.abs(obs - exp).sum() / total)
    return chi2, dof, p, tv


def wilson_ci(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if not (0 <= k <= n and n >= 1 and 0 < confidence < 1):
        raise ValueError("need 0 <= k <= n, n >= 1 and confidence in (0, 1)")
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, center - half)
    hi = 1.0 if k == n else min(1.0, center + half)
    return float(lo), float(hi)


@dataclass(frozen=True)
class PoissonFitReport:
    model: dict
    lambda_target: float | None
    lambda_used: float
    lambda_method: str
    y_used: float
    horizon: float
    replications: int
    counts: np.ndarray
    mean_count: float
    mean_sigma: float
    histogram: dict
    chi_square: float
    dof: int
    p_value: float
    tv_distance: float
    constants: dict
    rate_check: dict
    gates: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.gates.values())


def _walk_replication(model, stream, n, y):
    ex = excursions(draw(model, stream.generator(), n))
    return int(np.count_nonzero(ex.height > y)), len(ex)


def _cpd_replication(model, stream, t, y):
    path = simulate_path(model, t, stream)
    return int(np.count_nonzero(path.complete_heights > y)), path.local_time


def poisson_experiment(model: Model, horizon: float, replications: int, stream: Stream, *,
                       lambda_target: float | None = None, y: float | None = None,
                       budget: int = 10**6, mapper: Mapper = map) -> PoissonFitReport:
    """Replicate ``N(y, horizon)``, the number of complete excursions above ``y``,
    and test it against its Poisson limit.

    Give either ``lambda_target`` (``y`` follows from the scaling
    ``horizon * K e^{-gamma y} / alpha = lambda``) or ``y`` directly. On a
    lattice ``y`` is rounded to the lattice. The Poisson parameter tested is
    the exact ``(n / alpha) P(h_1 > y)`` for unit two-point walks and the
    asymptotic one otherwise; ``lambda_method`` says which.
    """
    if (lambda_target is None) == (y is None):
        raise ValueError("give exactly one of lambda_target and y")
    if lambda_target is not None and lambda_target < MIN_LAMBDA:
        raise ValueError(f"lambda_target must be at least {MIN_LAMBDA}")
    if replications < MIN_REPLICATIONS:
        raise ValueError(f"need at least {MIN_REPLICATIONS} replications")
    gamma = solve_gamma(model).gamma

    if model.is_walk:
        n = int(horizon)
        if n != horizon or n < 1:
            raise ValueError("walk horizon must be a positive step count")
        rc = rw_constants(model, gamma, budget, stream.child("constants"), mapper)
        K, alpha = rc.K.value, rc.alpha.value
        consts = {"gamma": gamma, "K": rc.K.as_dict(), "alpha": rc.alpha.as_dict(), "span": rc.span}
    elif isinstance(model, CompoundPoissonDrift):
        lc = levy_constants(model, gamma)
        K, alpha = lc.K_star, lc.alpha_star
        consts = {"gamma": gamma, "K_star": K, "alpha_star": alpha, "normalization": lc.normalization}
    else:
        raise UnsupportedKind(f"{model.kind} paths are not simulated")

    if y is None:
        y = math.log(horizon * K / (alpha * lambda_target)) / gamma
        if model.span > 0:
            y = model.span * round(y / model.span)
    if y < 0:
        raise ValueError(f"threshold y = {y!r} is negative; lower lambda or raise the horizon")
    if isinstance(model, TwoPointWalk) and model.a_up == model.a_down == 1:
        lam = horizon / alpha * twopoint_height_tail(model.p, math.floor(y))
        method = "oracle_exact"
    elif lambda_target is not None and model.span == 0:
        lam = lambda_target
        method = "asymptotic"
    else:
        lam = horizon * K * math.exp(-gamma * y) / alpha
        method = "asymptotic"
    if lam < MIN_LAMBDA:
        raise InsufficientRate(f"Poisson parameter {lam!r} below {MIN_LAMBDA}")

    rep_fn = _walk_replication if model.is_walk else _cpd_replication
    span = int(horizon) if model.is_walk else float(horizon)
    streams = [stream.child("poisson", r) for r in range(replications)]
    out = list(mapper(rep_fn, [model] * replications, streams, [span] * replications, [y] * replications))
    counts = np.array([o[0] for o in out], dtype=np.int64)
    side = np.array([o[1] for o in out], dtype=float)
    hist = dict(sorted(Counter(counts.tolist()).items()))
    chi2, dof, p, tv = poisson_gof(hist, lam)
    mean = float(counts.mean())
    sigma = math.sqrt(lam / replications)

    # the strong law side check: excursions per step -> 1/alpha, or L_t/t -> 1/alpha*
    per_unit = side / horizon
    rate_mean = float(per_unit.mean())
    rate_se = float(per_unit.std(ddof=1) / math.sqrt(replications))
    rate_z = (rate_mean - 1.0 / alpha) / rate_se if rate_se > 0 else 0.0
    rate_check = {"quantity": "excursions_per_step" if model.is_walk else "local_time_per_time",
                  "value": rate_mean, "stderr": rate_se, "expected": 1.0 / alpha, "z": rate_z}
    gates = {"mean_within_3sigma": abs(mean - lam) <= 3 * sigma,
             "gof_p_at_least_0.001": p >= P_THRESHOLD,
             "rate_within_4sigma": abs(rate_z) <= 4.0}
    return PoissonFitReport(
        model=model.params(), lambda_target=lambda_target, lambda_used=lam, lambda_method=method,
        y_used=float(y), horizon=float(horizon), replications=replications, counts=counts,
        mean_count=mean, mean_sigma=sigma, histogram=hist, chi_square=chi2, dof=dof, p_value=p,
        tv_distance=tv, constants=consts, rate_check=rate_check, gates=gates,
    )
