"""Named, splittable random streams.

A :class:`Stream` is a pure key ``(seed, path)``; nothing is consumed until
:meth:`Stream.generator` is called. Generators are Philox (counter-based)
instances keyed through :class:`numpy.random.SeedSequence`, so the numbers a
given replication sees depend only on its key and never on how the work was
distributed across workers.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _word(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError("stream indices must be nonnegative")
    return int(part)


@dataclass(frozen=True)
class Stream:
    seed: int
    path: tuple[int | str, ...] = ()

    def __post_init__(self):
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def child(self, *parts: int | str) -> "Stream":
        return Stream(self.seed, self.path + tuple(parts))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(_word(p) for p in self.path))
        key = ss.generate_state(2, dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def __str__(self) -> str:
        return "/".join([str(self.seed), *map(str, self.path)])


def as_stream(stream: Stream | int) -> Stream:
    return stream if isinstance(stream, Stream) else Stream(int(stream))
