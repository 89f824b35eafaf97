"""Exact event-driven simulation of drift-plus-exponential-jump Lévy paths.

Between jumps ``X`` falls linearly at rate ``c``, so the infimum is attained
just before a jump or at the horizon, the reflected path ``Y = X - I`` peaks
right after a jump, and an excursion ends exactly ``Y/c`` time units after its
last jump. Everything below is evaluated at jump epochs; there is no time
grid. Local time is ``L = -I``, which accrues at rate ``c`` while ``Y = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientCounts, UnsupportedKind
from .models import CompoundPoissonDrift, Model
from .rng import Stream
from .walks import Mapper

MIN_BATCHES = 10
MIN_EXCEEDANCES = 10


@dataclass(frozen=True)
class Events:
    times: np.ndarray
    sizes: np.ndarray
    t0: float
    horizon: float

    def split(self, t: float) -> tuple["Events", "Events"]:
        k = int(np.searchsorted(self.times, t, side="right"))
        return (Events(self.times[:k], self.sizes[:k], self.t0, t),
                Events(self.times[k:], self.sizes[k:], t, self.horizon))


@dataclass(frozen=True)
class ReflectState:
    """Reflected level at the start of a window and the open excursion, if any."""

    y: float = 0.0
    open_start: float = math.nan
    open_height: float = 0.0
    open_jump: float = math.nan


@dataclass(frozen=True)
class EventPath:
    """Reflected path on ``[t0, horizon]``.

    Excursion arrays are ordered in time; the last excursion may be
    incomplete (still open at the horizon, ``end = nan``). ``open_jump`` is
    the jump that opened each excursion (``nan`` when it opened before
    ``t0`` and is unknown).
    """

    t0: float
    horizon: float
    c: float
    times: np.ndarray
    sizes: np.ndarray
    x_after: np.ndarray
    i_after: np.ndarray
    start: np.ndarray
    end: np.ndarray
    height: np.ndarray
    complete: np.ndarray
    open_jump: np.ndarray
    local_time: float
    time_at_minimum: float
    final: ReflectState

    @property
    def complete_heights(self) -> np.ndarray:
        return self.height[self.complete]

    @property
    def n_incomplete(self) -> int:
        return int(np.count_nonzero(~self.complete))


def _require_cpd(model: Model) -> CompoundPoissonDrift:
    if not isinstance(model, CompoundPoissonDrift):
        raise UnsupportedKind(f"exact path simulation supports only cpd, not {model.kind}")
    return model


def simulate_events(model: Model, horizon: float, stream: Stream, t0: float = 0.0) -> Events:
    model = _require_cpd(model)
    if not horizon > t0:
        raise ValueError("horizon must exceed t0")
    rng = stream.generator()
    n = rng.poisson(model.rho * (horizon - t0))
    times = t0 + np.sort(rng.random(n)) * (horizon - t0)
    sizes = rng.exponential(1.0 / model.nu, n)
    return Events(times, sizes, t0, horizon)


def reflect_exact(events: Events, model: Model, state: ReflectState | None = None) -> EventPath:
    """Reflect the path at its infimum and cut it into excursions.

    ``state`` carries the reflected level and any open excursion in from a
    preceding window, so reflecting ``[a, b]`` then ``[b, c]`` equals
    reflecting ``[a, c]`` (see :func:`join_paths`).
    """
    c = _require_cpd(model).c
    state = state or ReflectState()
    t0, t1 = events.t0, events.horizon
    times, sizes = events.times, events.sizes
    n = times.size

    # X relative to the window start, X(t0) = y
    cum = np.cumsum(sizes)
    before = np.concatenate(([0.0], cum[:-1]))
    x_pre = state.y - c * (times - t0) + before
    x_post = x_pre + sizes
    # running infimum just before each jump (I starts at 0, Y(t0) = y >= 0)
    m_pre = np.minimum.accumulate(np.minimum(x_pre, 0.0)) if n else x_pre
    m_prev = np.concatenate(([0.0], m_pre[:-1]))
    opens = x_pre <= m_prev
    if state.y == 0.0 and n:
        opens[0] = True
    y_post = x_post - m_pre
    y_post[opens] = sizes[opens]

    exc_id = np.cumsum(opens) - 1  # -1 marks the carried excursion
    carried = state.y > 0.0
    first_open = np.flatnonzero(opens)
    n_exc = first_open.size + (1 if carried else 0)
    shift = 1 if carried else 0
    ids = exc_id + shift

    height = np.zeros(n_exc)
    if n:
        np.maximum.at(height, ids, y_post)
    last_jump = np.full(n_exc, -1)
    if n:
        last_jump[ids] = np.arange(n)  # fancy assignment keeps the last index per id
    start = np.empty(n_exc)
    open_jump = np.empty(n_exc)
    start[shift:] = times[first_open]
    open_jump[shift:] = sizes[first_open]
    end = np.empty(n_exc)
    if carried:
        start[0] = state.open_start
        open_jump[0] = state.open_jump
        height[0] = max(height[0], state.open_height, state.y)
    for_end = last_jump >= 0
    end[for_end] = times[last_jump[for_end]] + y_post[last_jump[for_end]] / c
    if carried and last_jump[0] < 0:
        end[0] = t0 + state.y / c
    # rounding must not let an excursion run past the next opening
    if n_exc > 1:
        np.minimum(end[:-1], start[1:], out=end[:-1])
    complete = end <= t1
    end[~complete] = math.nan

    final_x = state.y - c * (t1 - t0) + (cum[-1] if n else 0.0)
    inf_x = min(0.0, float(m_pre[-1]) if n else 0.0, final_x)
    busy = np.where(complete, end, t1) - np.maximum(start, t0)
    time_at_min = (t1 - t0) - float(busy.sum())
    if n_exc and not complete[-1]:
        final = ReflectState(y=final_x - inf_x, open_start=float(start[-1]),
                             open_height=float(height[-1]), open_jump=float(open_jump[-1]))
    else:
        final = ReflectState()
    i_after = np.minimum(m_pre, 0.0) if n else m_pre
    return EventPath(
        t0=t0, horizon=t1, c=c, times=times, sizes=sizes, x_after=x_post, i_after=i_after,
        start=start, end=end, height=height, complete=complete, open_jump=open_jump,
        local_time=-inf_x, time_at_minimum=time_at_min, final=final,
    )


def join_paths(a: EventPath, b: EventPath) -> EventPath:
    """Concatenate two consecutive windows, ``b`` reflected from ``a.final``."""
    if a.horizon != b.t0:
        raise ValueError("windows are not consecutive")
    carried = a.final.y > 0.0
    head = slice(None, -1) if carried else slice(None)
    cat = lambda u, v: np.concatenate((u[head], v))  # noqa: E731
    final = b.final
    return EventPath(
        t0=a.t0, horizon=b.horizon, c=a.c,
        times=np.concatenate((a.times, b.times)), sizes=np.concatenate((a.sizes, b.sizes)),
        x_after=np.concatenate((a.x_after, b.x_after - a.local_time)),
        i_after=np.concatenate((a.i_after, b.i_after - a.local_time)),
        start=cat(a.start, b.start), end=cat(a.end, b.end), height=cat(a.height, b.height),
        complete=cat(a.complete, b.complete), open_jump=cat(a.open_jump, b.open_jump),
        local_time=a.local_time + b.local_time, time_at_minimum=a.time_at_minimum + b.time_at_minimum,
        final=final,
    )


def simulate_path(model: Model, horizon: float, stream: Stream) -> EventPath:
    return reflect_exact(simulate_events(model, horizon, stream), model)


@dataclass(frozen=True)
class TailEstimate:
    x: np.ndarray
    eta_hat: np.ndarray
    stderr: np.ndarray
    e_gamma_x_eta_hat: np.ndarray
    counts: np.ndarray
    local_time: float
    local_time_rate: float
    local_time_rate_stderr: float
    total_horizon: float
    batches: int
    straddling_excluded: int


def _tail_batch(model, stream, horizon, x_grid):
    path = simulate_path(model, horizon, stream)
    h = np.sort(path.complete_heights)
    counts = h.size - np.searchsorted(h, x_grid, side="right")
    return counts, path.local_time, path.n_incomplete


def eta_tail_estimate(model: Model, gamma: float, x_grid, total_horizon: float, batches: int,
                      stream: Stream, mapper: Mapper = map) -> TailEstimate:
    """Excursion rate above each level per unit local time, from independent batches.

    ``x = 0`` is read as ``0+`` (every complete excursion counts). Excursions
    straddling a batch horizon are not counted but their local time is.
    """
    _require_cpd(model)
    x = np.asarray(x_grid, dtype=float)
    if x.ndim != 1 or x.size == 0 or np.any(x < 0) or np.any(np.diff(x) <= 0):
        raise ValueError("x_grid must be nonnegative and strictly ascending")
    if batches < MIN_BATCHES:
        raise ValueError(f"need at least {MIN_BATCHES} batches")
    horizon = total_horizon / batches
    parts = list(mapper(_tail_batch, [model] * batches, [stream.child("tail", b) for b in range(batches)],
                        [horizon] * batches, [x] * batches))
    counts = np.array([p[0] for p in parts], dtype=float)
    lt = np.array([p[1] for p in parts])
    total = counts.sum(axis=0)
    if total[-1] < MIN_EXCEEDANCES:
        raise InsufficientCounts(f"only {int(total[-1])} exceedances at x={x[-1]!r}")
    L = lt.sum()
    eta = total / L
    # ratio estimator over batches
    resid = counts - np.outer(lt, eta)
    se = np.sqrt((resid**2).sum(axis=0) / (batches * (batches - 1))) / lt.mean()
    rate = lt / horizon
    return TailEstimate(
        x=x, eta_hat=eta, stderr=se, e_gamma_x_eta_hat=np.exp(gamma * x) * eta, counts=total,
        local_time=float(L), local_time_rate=float(rate.mean()),
        local_time_rate_stderr=float(rate.std(ddof=1) / math.sqrt(batches)),
        total_horizon=float(total_horizon), batches=batches,
        straddling_excluded=int(sum(p[2] for p in parts)),
    )
