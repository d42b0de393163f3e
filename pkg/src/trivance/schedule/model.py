"""Immutable schedule data types.

A message's block set is kept factored as a product of per-dimension
coordinate sets whenever the generator can express it that way, which is
what keeps torus schedules with thousands of nodes small in memory.
Schedules read back from JSON carry explicit owner lists instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from ..topology import Topology

LATENCY = "latency"
BANDWIDTH = "bandwidth"


@dataclass(frozen=True, slots=True)
class BlockSet:
    collective: int
    axes: tuple[tuple[int, ...], ...] | None = None
    explicit: tuple[int, ...] | None = None

    def __len__(self) -> int:
        if self.explicit is not None:
            return len(self.explicit)
        return math.prod(len(ax) for ax in self.axes)

    def owners(self, topo: Topology) -> np.ndarray:
        """Owner node ids in ascending order."""
        if self.explicit is not None:
            return np.asarray(self.explicit, dtype=np.int64)
        ids = np.zeros(1, dtype=np.int64)
        # dimension 0 is fastest, so build from the slowest dimension down
        for ax, stride in reversed(list(zip(self.axes, topo.strides))):
            ids = (ids[:, None] + np.asarray(ax, dtype=np.int64)[None, :] * stride).ravel()
        ids.sort()
        return ids

    def block_ids(self, topo: Topology) -> list[tuple[int, int]]:
        return [(self.collective, int(o)) for o in self.owners(topo)]


@dataclass(frozen=True, slots=True)
class Message:
    src: int
    dst: int
    dim: int
    bytes: float
    blocks: BlockSet
    # +1/-1 pins the route around the ring; None means minimal routing
    direction: int | None = None

    @property
    def collective(self) -> int:
        return self.blocks.collective


@dataclass(frozen=True)
class Step:
    k: int
    messages: tuple[Message, ...]

    def __iter__(self) -> Iterator[Message]:
        return iter(self.messages)

    def __len__(self) -> int:
        return len(self.messages)


@dataclass(frozen=True)
class Schedule:
    algo: str
    variant: str
    topo: Topology
    m: float
    steps: tuple[Step, ...]
    collectives: int = 1
    phase_boundary: int | None = None
    options: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def n(self) -> int:
        return self.topo.n

    def truncated(self, count: int) -> "Schedule":
        """The first ``count`` steps (used to probe partial progress)."""
        return Schedule(self.algo, self.variant, self.topo, self.m,
                        self.steps[:count], self.collectives,
                        self.phase_boundary, dict(self.options))

    def without_step(self, k: int) -> "Schedule":
        steps = tuple(Step(i, s.messages) for i, s in
                      enumerate(s for s in self.steps if s.k != k))
        pb = self.phase_boundary
        if pb is not None and k < pb:
            pb -= 1
        return Schedule(self.algo, self.variant, self.topo, self.m, steps,
                        self.collectives, pb, dict(self.options))

    def bytes_sent_per_node(self) -> np.ndarray:
        sent = np.zeros(self.n)
        for step in self.steps:
            for msg in step:
                sent[msg.src] += msg.bytes
        return sent
