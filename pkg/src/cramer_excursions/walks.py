"""Path machinery for random walks.

Conventions: ``T_i`` is the i-th *strict* descending ladder epoch (first
``k > T_{i-1}`` with ``S_k < S_{T_{i-1}}``, ties never count), the excursion
height ``h_i`` is ``max_{0 <= n < T_i - T_{i-1}} S_{T_{i-1}+n} - S_{T_{i-1}}``
(so an immediate down-step gives ``h = 0``), and the ascending ladder epoch is
*weak* (first ``k >= 1`` with ``S_k >= 0``).

Replicated samplers split ``reps`` into fixed blocks of :data:`BLOCK`
replications; block ``b`` draws from ``stream.child(tag, b)``. Blocks are
independent tasks, dispatched through ``mapper`` (any ordered ``map``) and
concatenated by block index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ExcessiveCensoring
from .models import Model, draw, tilt
from .rng import Stream

BLOCK = 10_000
DEFAULT_STEP_CAP = 10**7
MAX_CENSORED_FRACTION = 0.01

Mapper = Callable[..., Iterable]


@dataclass(frozen=True)
class PathSummary:
    n: int
    partial_sums: np.ndarray
    running_min: np.ndarray
    reflected: np.ndarray
    max_segmental_score: float


@dataclass(frozen=True)
class ExcursionRecord:
    index: int
    start: int
    length: int
    height: float
    ladder_increment: float


@dataclass(frozen=True)
class Incomplete:
    length: int
    running_height: float


@dataclass(frozen=True)
class Excursions:
    """Array form of the ladder decomposition of one path."""

    start: np.ndarray
    length: np.ndarray
    height: np.ndarray
    ladder_increment: np.ndarray
    incomplete: Incomplete | None
    n: int

    def __len__(self) -> int:
        return len(self.height)

    def records(self) -> list[ExcursionRecord]:
        return [
            ExcursionRecord(i + 1, int(s), int(l), float(h), float(d))
            for i, (s, l, h, d) in enumerate(
                zip(self.start, self.length, self.height, self.ladder_increment))
        ]


def partial_sums(steps: Sequence[float]) -> np.ndarray:
    steps = np.asarray(steps, dtype=float)
    out = np.empty(steps.size + 1)
    out[0] = 0.0
    np.cumsum(steps, out=out[1:])
    return out


def reflect_and_summarize(steps: Sequence[float]) -> PathSummary:
    """Partial sums, running minimum, reflected path and maximal segmental score.

    All arrays have length ``n + 1`` and start at 0.
    """
    s = partial_sums(steps)
    i = np.minimum.accumulate(s)
    r = s - i
    return PathSummary(n=s.size - 1, partial_sums=s, running_min=i, reflected=r,
                       max_segmental_score=float(r.max()))


def excursions(steps: Sequence[float]) -> Excursions:
    s = partial_sums(steps)
    n = s.size - 1
    prev_min = np.minimum.accumulate(s)[:-1]
    ladder = np.flatnonzero(s[1:] < prev_min) + 1
    epochs = np.concatenate(([0], ladder))
    seg_max = np.maximum.reduceat(s, epochs)
    base = s[epochs]
    last = int(epochs[-1])
    incomplete = None
    if last < n:
        incomplete = Incomplete(n - last, float(seg_max[-1] - base[-1]))
    return Excursions(
        start=epochs[:-1],
        length=np.diff(epochs),
        height=seg_max[:-1] - base[:-1],
        ladder_increment=base[:-1] - base[1:],
        incomplete=incomplete,
        n=n,
    )


def decompose_excursions(steps: Sequence[float]) -> tuple[list[ExcursionRecord], Incomplete | None]:
    ex = excursions(steps)
    return ex.records(), ex.incomplete


def count_high_excursions(records: Excursions | Sequence[ExcursionRecord] | np.ndarray, y: float) -> int:
    """Number of complete excursions with height strictly above ``y``."""
    if y < 0:
        raise ValueError("y must be nonnegative")
    if isinstance(records, Excursions):
        heights = records.height
    elif isinstance(records, np.ndarray):
        heights = records
    else:
        heights = np.fromiter((r.height for r in records), dtype=float)
    return int(np.count_nonzero(heights > y))


@dataclass(frozen=True)
class LadderSample:
    """Replicated ladder variables, censored replications excluded.

    ``kind == "descending"``: ``T``, ``H`` and ``h`` hold the first strict
    descending ladder epoch, its ladder height ``|S_T|`` and the first
    excursion height. ``kind == "weak_ascending_tilted"``: ``H`` holds the
    weak ascending ladder height under the tilted law and ``weight`` holds
    ``exp(-gamma * H)``; ``T`` holds the ladder epochs.
    """

    kind: str
    reps: int
    T: np.ndarray
    H: np.ndarray
    h: np.ndarray | None = None
    weight: np.ndarray | None = None
    censored_count: int = 0

    @property
    def n(self) -> int:
        return len(self.T)

    @property
    def censored_fraction(self) -> float:
        return self.censored_count / self.reps


def _blocks(reps: int) -> list[int]:
    sizes = [BLOCK] * (reps // BLOCK)
    if reps % BLOCK:
        sizes.append(reps % BLOCK)
    return sizes


def _run_to_epoch(model: Model, rng: np.random.Generator, size: int, step_cap: int, ascending: bool):
    T = np.zeros(size, dtype=np.int64)
    H = np.zeros(size)
    top = np.zeros(size)
    idx = np.arange(size)
    s = np.zeros(size)
    run_max = np.zeros(size)
    k = 0
    while idx.size and k < step_cap:
        k += 1
        s += draw(model, rng, idx.size)
        np.maximum(run_max, s, out=run_max)
        done = s >= 0 if ascending else s < 0
        if done.any():
            d = idx[done]
            T[d] = k
            H[d] = s[done] if ascending else -s[done]
            top[d] = run_max[done]
            keep = ~done
            idx, s, run_max = idx[keep], s[keep], run_max[keep]
    ok = np.ones(size, dtype=bool)
    ok[idx] = False
    return T[ok], H[ok], top[ok], int(idx.size)


def _first_ladder_block(model, stream, size, step_cap):
    return _run_to_epoch(model, stream.generator(), size, step_cap, ascending=False)


def _ascending_block(model, stream, size, step_cap):
    return _run_to_epoch(model, stream.generator(), size, step_cap, ascending=True)


def _gather(fn, model, stream: Stream, tag: str, reps: int, step_cap: int, mapper: Mapper):
    sizes = _blocks(reps)
    tasks = [stream.child(tag, b) for b in range(len(sizes))]
    parts = list(mapper(fn, [model] * len(sizes), tasks, sizes, [step_cap] * len(sizes)))
    T = np.concatenate([p[0] for p in parts])
    H = np.concatenate([p[1] for p in parts])
    top = np.concatenate([p[2] for p in parts])
    censored = sum(p[3] for p in parts)
    if censored > MAX_CENSORED_FRACTION * reps:
        raise ExcessiveCensoring(
            f"{censored}/{reps} replications exceeded step_cap={step_cap} ({tag})")
    return T, H, top, censored


def sample_first_ladder(model: Model, stream: Stream, reps: int, step_cap: int = DEFAULT_STEP_CAP,
                        mapper: Mapper = map) -> LadderSample:
    """Simulate ``reps`` walks up to their first strict descending ladder epoch.

    Replications still running after ``step_cap`` steps are dropped and
    counted in ``censored_count``; more than 1% censored raises
    :class:`~cramer_excursions.errors.ExcessiveCensoring`.
    """
    if not model.is_walk:
        raise TypeError("sample_first_ladder needs a walk model")
    if reps < 1 or step_cap < 1:
        raise ValueError("reps and step_cap must be positive")
    T, H, h, censored = _gather(_first_ladder_block, model, stream, "first_ladder", reps, step_cap, mapper)
    return LadderSample("descending", reps, T=T, H=H, h=h, censored_count=censored)


def sample_weak_ascending_tilted(model: Model, gamma: float, stream: Stream, reps: int,
                                 step_cap: int = DEFAULT_STEP_CAP, mapper: Mapper = map) -> LadderSample:
    """Weak ascending ladder heights of the walk tilted by the Cramér root.

    Under the tilted law the ladder epoch is finite almost surely, and for any
    function ``f``: ``E[f(H+); H+ < inf] = E_tilt[f(H+) exp(-gamma H+)]``. In
    particular the sample mean of ``weight`` estimates ``P(H+ < inf)`` and the
    sample mean of ``H`` estimates ``E[H+ exp(gamma H+); H+ < inf]``.
    """
    tilted = tilt(model, gamma)
    if reps < 1:
        raise ValueError("reps must be positive")
    T, H, _, censored = _gather(_ascending_block, tilted, stream, "ascending_tilted", reps, step_cap, mapper)
    return LadderSample("weak_ascending_tilted", reps, T=T, H=H, weight=np.exp(-gamma * H),
                        censored_count=censored)


def mean_and_stderr(x: np.ndarray) -> tuple[float, float]:
    n = len(x)
    if n < 2:
        return float(np.mean(x)), math.inf
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(n))
