"""Counter-based random streams.

Every replicate owns the stream ``(seed, index)``; the Philox key is derived
from both through :class:`numpy.random.SeedSequence`, so a replicate's draws
depend only on its own identity and never on scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = ["RngStream"]

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Identity of an independent random stream.

    ``counter`` selects a sub-stream, so one replicate can hand separate
    streams to separate consumers (for example field noise and a
    bootstrap) without them overlapping.
    """

    seed: int
    index: int = 0
    counter: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "index", "counter"):
            v = getattr(self, name)
            if not 0 <= int(v) <= _U64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer")
            object.__setattr__(self, name, int(v))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.index, self.counter))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, counter: int) -> RngStream:
        return replace(self, counter=counter)

    def advance(self) -> RngStream:
        return replace(self, counter=self.counter + 1)

    def for_replicate(self, index: int) -> RngStream:
        return RngStream(self.seed, index, 0)
