"""Completion time under the congestion-aware alpha-beta model.

A step costs ``alpha + beta * L`` where ``L`` is the byte load of the
busiest directed link in that step; the schedule costs the sum over its
steps.  Messages follow the minimal ring path along their dimension, or
the side pinned by ``Message.direction``.  The ``eq1_plus_hops`` mode adds
``(link_latency + hop_latency) * h`` per step, with ``h`` the longest path
of the step, as a rough stand-in for store-and-forward delays.

Loads scale linearly with the payload, so sweeps compute a
:class:`StepProfile` once and re-price it for every size.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import CrossDimensionMessage
from .schedule.model import Schedule, Step
from .topology import DirectedLink, Topology

EQ1 = "eq1"
EQ1_PLUS_HOPS = "eq1_plus_hops"

# defaults of the evaluation setup: 1.5 us per step, 800 Gb/s links,
# 100 ns wire latency and 100 ns per-hop processing
DEFAULT_ALPHA = 1.5e-6
DEFAULT_BANDWIDTH_GBPS = 800.0
DEFAULT_LINK_LATENCY = 100e-9
DEFAULT_HOP_LATENCY = 100e-9


def beta_from_gbps(gbps: float) -> float:
    if gbps <= 0:
        raise ValueError(f"bandwidth must be positive, got {gbps}")
    return 1.0 / (gbps * 1e9 / 8)


@dataclass(frozen=True)
class CostParams:
    alpha: float = DEFAULT_ALPHA
    beta: float = field(default_factory=lambda: beta_from_gbps(DEFAULT_BANDWIDTH_GBPS))
    link_latency: float = 0.0
    hop_latency: float = 0.0
    mode: str = EQ1

    def __post_init__(self):
        for name in ("alpha", "beta", "link_latency", "hop_latency"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.mode not in (EQ1, EQ1_PLUS_HOPS):
            raise ValueError(f"unknown cost mode {self.mode!r}")

    @property
    def per_hop(self) -> float:
        return self.link_latency + self.hop_latency if self.mode == EQ1_PLUS_HOPS else 0.0


# -- units -------------------------------------------------------------------

_TIME = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9}
_SIZE = {"b": 1, "kb": 10**3, "mb": 10**6, "gb": 10**9,
         "kib": 2**10, "mib": 2**20, "gib": 2**30}
_RATE = {"gbps": 1.0, "gb/s": 1.0, "tbps": 1e3, "mbps": 1e-3}
_NUM = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([^\s]*)\s*$")


def _split(text: str, table: dict, default: str):
    m = _NUM.match(str(text))
    if not m:
        raise ValueError(f"cannot parse {text!r}")
    unit = (m.group(2) or default).lower()
    if unit not in table:
        raise ValueError(f"unknown unit {m.group(2)!r} in {text!r}")
    return float(m.group(1)) * table[unit]


def parse_time(text) -> float:
    """'1.5us' -> 1.5e-6; bare numbers are seconds."""
    return _split(text, _TIME, "s")


def parse_size(text) -> int:
    """'32KiB' -> 32768; bare numbers are bytes."""
    value = _split(text, _SIZE, "b")
    if value != int(value):
        raise ValueError(f"size {text!r} is not a whole number of bytes")
    return int(value)


def parse_bandwidth(text) -> float:
    """Link rate in Gb/s ('800', '800Gbps', '1.6Tbps')."""
    return _split(text, _RATE, "gbps")


def format_size(size: int) -> str:
    for unit, scale in (("GiB", 2**30), ("MiB", 2**20), ("KiB", 2**10)):
        if size >= scale and size % scale == 0:
            return f"{size // scale}{unit}"
    return f"{size}B"


# -- link loads ----------------------------------------------------------------

@dataclass
class LinkLoadMap:
    """Bytes per directed link in one step, indexed [node, dim, side].

    ``side`` is 1 for the link towards the next coordinate and 0 for the
    link towards the previous one.
    """
    topo: Topology
    loads: np.ndarray
    max_hops: int = 0

    def __getitem__(self, link: DirectedLink) -> float:
        a, s = self.topo.dims[link.dim], self.topo.strides[link.dim]
        c = (link.src // s) % a
        d = (link.dst // s) % a
        if link.src - c * s != link.dst - d * s:
            raise ValueError(f"{link} is not a physical link of {self.topo}")
        if (d - c) % a == 1:
            return float(self.loads[link.src, link.dim, 1])
        if (c - d) % a == 1:
            return float(self.loads[link.src, link.dim, 0])
        raise ValueError(f"{link} is not a physical link of {self.topo}")

    def max(self) -> float:
        return float(self.loads.max()) if self.loads.size else 0.0

    def items(self):
        """Non-zero links as (DirectedLink, bytes)."""
        dims, strides = self.topo.dims, self.topo.strides
        for node, dim, side in zip(*np.nonzero(self.loads)):
            a, s = dims[dim], strides[dim]
            c = (node // s) % a
            step = 1 if side else -1
            dst = int(node + (((c + step) % a) - c) * s)
            yield DirectedLink(int(node), dst, int(dim)), float(self.loads[node, dim, side])


def _signed_hops(topo: Topology, src, dst, dim, direction) -> np.ndarray:
    dims = np.asarray(topo.dims)[dim]
    strides = np.asarray(topo.strides)[dim]
    cs, cd = (src // strides) % dims, (dst // strides) % dims
    if ((src - cs * strides) != (dst - cd * strides)).any():
        bad = int(np.flatnonzero((src - cs * strides) != (dst - cd * strides))[0])
        raise CrossDimensionMessage(f"message {src[bad]}->{dst[bad]} leaves dimension {dim[bad]}")
    fwd = (cd - cs) % dims
    back = fwd - dims
    shortest = np.where(2 * fwd <= dims, fwd, back)
    h = np.where(direction > 0, fwd, np.where(direction < 0, back, shortest))
    return np.where(fwd == 0, 0, h)


def link_loads(step: Step, topo: Topology, scale: float = 1.0) -> LinkLoadMap:
    """Add every message's bytes to each directed link on its path."""
    loads = np.zeros((topo.n, topo.D, 2))
    msgs = step.messages
    if not msgs:
        return LinkLoadMap(topo, loads, 0)
    src = np.fromiter((mm.src for mm in msgs), np.int64, len(msgs))
    dst = np.fromiter((mm.dst for mm in msgs), np.int64, len(msgs))
    dim = np.fromiter((mm.dim for mm in msgs), np.int64, len(msgs))
    size = np.fromiter((mm.bytes for mm in msgs), float, len(msgs)) * scale
    direction = np.fromiter((mm.direction or 0 for mm in msgs), np.int64, len(msgs))
    h = _signed_hops(topo, src, dst, dim, direction)
    length = np.abs(h)
    total = int(length.sum())
    if total:
        owner = np.repeat(np.arange(len(msgs)), length)
        # position along the path: 0..|h|-1
        pos = np.arange(total) - np.repeat(np.cumsum(length) - length, length)
        sign = np.sign(h)[owner]
        a = np.asarray(topo.dims)[dim][owner]
        s = np.asarray(topo.strides)[dim][owner]
        c0 = (src[owner] // s) % a
        c = (c0 + sign * pos) % a
        node = src[owner] + (c - c0) * s
        side = (sign > 0).astype(np.int64)
        np.add.at(loads, (node, dim[owner], side), size[owner])
    return LinkLoadMap(topo, loads, int(length.max()))


# -- pricing -------------------------------------------------------------------

@dataclass
class StepRecord:
    k: int
    max_link_bytes: float
    hop_count_max: int
    step_time_seconds: float


@dataclass
class CostReport:
    steps: list[StepRecord]
    total_seconds: float
    steps_count: int

    def to_dict(self) -> dict:
        return {"total_seconds": self.total_seconds, "steps_count": self.steps_count,
                "steps": [vars(r) for r in self.steps]}


@dataclass
class StepProfile:
    """Per-step bottleneck load at payload ``m`` and longest path."""
    m: float
    max_link_bytes: np.ndarray
    hop_count_max: np.ndarray

    def report(self, params: CostParams, m: float | None = None) -> CostReport:
        scale = 1.0 if m is None else m / self.m
        loads = self.max_link_bytes * scale
        times = params.alpha + params.beta * loads + params.per_hop * self.hop_count_max
        records = [StepRecord(k, float(b), int(h), float(t))
                   for k, (b, h, t) in enumerate(zip(loads, self.hop_count_max, times))]
        return CostReport(records, float(times.sum()), len(records))

    def total(self, params: CostParams, m: float) -> float:
        scale = m / self.m
        return float(len(self.max_link_bytes) * params.alpha
                     + params.beta * scale * self.max_link_bytes.sum()
                     + params.per_hop * self.hop_count_max.sum())


def profile(schedule: Schedule) -> StepProfile:
    loads, hop_max = [], []
    for step in schedule.steps:
        lm = link_loads(step, schedule.topo)
        loads.append(lm.max())
        hop_max.append(lm.max_hops)
    return StepProfile(schedule.m, np.array(loads, dtype=float), np.array(hop_max, dtype=np.int64))


def step_time(step: Step, topo: Topology, params: CostParams) -> float:
    lm = link_loads(step, topo)
    return params.alpha + params.beta * lm.max() + params.per_hop * lm.max_hops


def completion_time(schedule: Schedule, topo: Topology | None = None,
                    params: CostParams | None = None) -> CostReport:
    topo = schedule.topo if topo is None else topo
    if topo != schedule.topo:
        raise ValueError(f"schedule was built for {schedule.topo}, not {topo}")
    return profile(schedule).report(params or CostParams())


SHIFT_INVARIANT = ("trivance", "bruck", "ring_bucket")


def representative_profile(schedule: Schedule) -> StepProfile:
    """Bottleneck loads of a shift-invariant schedule from node 0's messages.

    With every step invariant under all torus shifts, each directed link of
    a given dimension and side carries the same load, namely the sum of
    bytes * hops over one representative of each message orbit.  The
    schedule must come from ``generate(..., sources=[0])``.
    """
    if schedule.algo not in SHIFT_INVARIANT:
        raise ValueError(f"{schedule.algo} schedules are not shift-invariant")
    topo = schedule.topo
    loads, hop_max = [], []
    for step in schedule.steps:
        msgs = step.messages
        if not msgs:
            loads.append(0.0)
            hop_max.append(0)
            continue
        src = np.fromiter((mm.src for mm in msgs), np.int64, len(msgs))
        dst = np.fromiter((mm.dst for mm in msgs), np.int64, len(msgs))
        dim = np.fromiter((mm.dim for mm in msgs), np.int64, len(msgs))
        size = np.fromiter((mm.bytes for mm in msgs), float, len(msgs))
        direction = np.fromiter((mm.direction or 0 for mm in msgs), np.int64, len(msgs))
        h = _signed_hops(topo, src, dst, dim, direction)
        per_link = np.zeros((topo.D, 2))
        np.add.at(per_link, (dim, (h > 0).astype(np.int64)), size * np.abs(h))
        loads.append(float(per_link.max()))
        hop_max.append(int(np.abs(h).max()))
    return StepProfile(schedule.m, np.array(loads), np.array(hop_max, dtype=np.int64))
