"""Build explicit schedules from per-ring patterns.

Every algorithm runs as one or more independent collectives, each owning
``m / C`` bytes of every node's vector.  A collective follows a *plan*:
for each global step, which dimension it is active in and at which local
step of that dimension's pattern (or ``None`` when it idles).
"""

from __future__ import annotations

from ..errors import Unsupported
from ..topology import Topology
from . import patterns as pt
from .model import BANDWIDTH, LATENCY, BlockSet, Message, Schedule, Step

ALGORITHMS = ("trivance", "bruck", "recdoub", "swing", "ring_bucket")
VARIANTS = (LATENCY, BANDWIDTH)

_VARIANT_ALIASES = {"l": LATENCY, "latency": LATENCY, "b": BANDWIDTH, "bandwidth": BANDWIDTH}


def normalize_variant(variant: str) -> str:
    try:
        return _VARIANT_ALIASES[variant.lower()]
    except KeyError:
        raise ValueError(f"unknown variant {variant!r}") from None


def supported(algo: str, variant: str, topo: Topology) -> bool:
    try:
        _check(algo, normalize_variant(variant), topo)
    except Unsupported:
        return False
    return True


def _check(algo: str, variant: str, topo: Topology) -> None:
    if algo not in ALGORITHMS:
        raise Unsupported(f"unknown algorithm {algo!r}")
    if algo in ("recdoub", "swing") and not all(pt.is_power_of(2, a) for a in topo.dims):
        raise Unsupported(f"{algo} needs power-of-two dimensions, got {topo}")
    if algo == "ring_bucket" and variant != BANDWIDTH:
        raise Unsupported("ring_bucket only has a bandwidth-optimal variant")


def rotation_plan(start: int, steps_per_dim: list[int]):
    """Collective visits dimension (start + k) mod D at global step k."""
    D = len(steps_per_dim)
    plan = []
    for k in range(D * max(steps_per_dim, default=0)):
        e, j = pt.dim_assignment(start, k, D), pt.local_step(k, D)
        plan.append((e, j) if j < steps_per_dim[e] else None)
    return plan


def sequential_plan(steps_per_dim: list[int]):
    return [(e, j) for e, s in enumerate(steps_per_dim) for j in range(s)]


def bucket_plan(start: int, steps_per_dim: list[int]):
    D = len(steps_per_dim)
    phase = max(steps_per_dim, default=0)
    plan = []
    for p in range(D):
        e = (start + p) % D
        plan.extend((e, j) if j < steps_per_dim[e] else None for j in range(phase))
    return plan


class _Collective:
    def __init__(self, index: int, pats: list, plan: list):
        self.index = index
        self.pats = pats
        self.plan = plan


def _collectives(algo, variant, topo, classic_singleport, bruck_routing):
    dims, D = topo.dims, topo.D
    if algo in ("trivance", "bruck"):
        if algo == "trivance":
            pats = [pt.trivance_pattern(a) for a in dims]
        else:
            uni = bruck_routing == "unidirectional"
            pats = [pt.bruck_pattern(a, uni) for a in dims]
        steps = [p.steps for p in pats]
        return [_Collective(c, pats, rotation_plan(c, steps)) for c in range(D)]
    if algo in ("recdoub", "swing"):
        make = pt.recdoub_pattern if algo == "recdoub" else pt.swing_pattern
        plain = [make(a) for a in dims]
        steps = [p.steps for p in plain]
        if variant == LATENCY and classic_singleport:
            return [_Collective(0, plain, sequential_plan(steps))]
        mirror = [make(a, mirrored=True) for a in dims]
        out = []
        for i in range(D):
            out.append(_Collective(2 * i, plain, rotation_plan(i, steps)))
            out.append(_Collective(2 * i + 1, mirror, rotation_plan(i, steps)))
        return out
    fwd = [pt.ring_pattern(a, 1) for a in dims]
    back = [pt.ring_pattern(a, -1) for a in dims]
    steps = [a - 1 for a in dims]
    out = []
    for i in range(D):
        out.append(_Collective(2 * i, fwd, bucket_plan(i, steps)))
        out.append(_Collective(2 * i + 1, back, bucket_plan(i, steps)))
    return out


def _progress(plan):
    """Local steps completed in each dimension before every global step."""
    done: dict[int, int] = {}
    out = []
    for entry in plan:
        out.append(dict(done))
        if entry is not None:
            done[entry[0]] = done.get(entry[0], 0) + 1
    return out


def _coords(topo: Topology):
    dims = topo.dims
    out = []
    for node in range(topo.n):
        c = []
        for a in dims:
            node, r = divmod(node, a)
            c.append(r)
        out.append(tuple(c))
    return out


def _collective_steps(col: _Collective, topo: Topology, variant: str, share: float,
                      coords, sources=None) -> list[list[Message]]:
    D, dims, strides, n = topo.D, topo.dims, topo.strides, topo.n
    per_block = share / n
    latency = variant == LATENCY
    out = []
    interned: dict = {}
    for entry, prog in zip(col.plan, _progress(col.plan)):
        msgs: list[Message] = []
        out.append(msgs)
        if entry is None:
            continue
        e, j = entry
        pat = col.pats[e]
        # per-coordinate lookups: sends along e, carried sets along the rest
        if latency:
            sends = [pat.lat_sends(c, j) for c in range(dims[e])]
            other = [[col.pats[f].held(c, prog.get(f, 0)) for c in range(dims[f])]
                     if f != e else None for f in range(D)]
        else:
            sends = [pat.rs_sends(c, j) for c in range(dims[e])]
            other = [[col.pats[f].live(c, prog.get(f, 0)) for c in range(dims[f])]
                     if f != e else None for f in range(D)]
        for v in (range(n) if sources is None else sources):
            cv = coords[v]
            ce = cv[e]
            here = sends[ce]
            if not here:
                continue
            base = [other[f][cv[f]] if f != e else None for f in range(D)]
            rest = 1
            for f in range(D):
                if f != e:
                    rest *= len(base[f])
            for y, direction, sel in here:
                dst = v + (y - ce) * strides[e]
                if dst == v:
                    continue
                if D == 1:
                    axes = (sel,)
                else:
                    base[e] = sel
                    axes = tuple(base)
                size = share if latency else per_block * len(sel) * rest
                blocks = interned.get(axes)
                if blocks is None:
                    blocks = interned[axes] = BlockSet(col.index, axes)
                msgs.append(Message(v, dst, e, size, blocks, direction))
    return out


def generate(algo: str, variant: str, topo: Topology, m: float, *,
             classic_singleport: bool = False,
             bruck_routing: str | None = None,
             sources=None) -> Schedule:
    """Explicit schedule for ``algo`` on ``topo`` with ``m`` bytes per node.

    ``bruck_routing`` is ``"unidirectional"`` (both Bruck peers reached in
    the positive direction) or ``"shortest"``; by default networks whose
    dimensions are all powers of three use the former, others the latter.

    ``sources`` keeps only the Reduce-Scatter (or latency) messages sent by
    those nodes; AllGather messages are the reversals, so they are the
    ones *received* by the sources.  The result is marked
    ``options["partial"]`` and only serves load accounting on
    shift-invariant schedules, where node 0 alone represents every
    message orbit.
    """
    variant = normalize_variant(variant)
    if not m > 0:
        raise ValueError(f"payload must be positive, got {m}")
    _check(algo, variant, topo)
    if bruck_routing is None:
        uni = all(pt.is_power_of(3, a) for a in topo.dims)
        bruck_routing = "unidirectional" if uni else "shortest"
    if bruck_routing not in ("unidirectional", "shortest"):
        raise ValueError(f"unknown bruck routing {bruck_routing!r}")

    cols = _collectives(algo, variant, topo, classic_singleport, bruck_routing)
    share = m / len(cols)
    coords = _coords(topo)
    if sources is not None:
        sources = sorted({int(v) for v in sources})
        if any(not 0 <= v < topo.n for v in sources):
            raise ValueError(f"sources outside 0..{topo.n - 1}")
    per_col = [_collective_steps(c, topo, variant, share, coords, sources) for c in cols]
    rs_len = max(len(p) for p in per_col)

    if variant == LATENCY:
        phases = [per_col]
        boundary = None
    else:
        gather = [[_reverse(msgs) for msgs in reversed(p)] for p in per_col]
        phases = [per_col, gather]
        boundary = rs_len

    steps = []
    for phase in phases:
        for k in range(rs_len):
            msgs = []
            for p in phase:
                if k < len(p):
                    msgs.extend(p[k])
            steps.append(Step(len(steps), tuple(msgs)))

    options = {"classic_singleport": bool(classic_singleport)}
    if sources is not None:
        options["partial"] = True
    if algo == "bruck":
        options["bruck_routing"] = bruck_routing
    return Schedule(algo, variant, topo, float(m), tuple(steps), len(cols), boundary, options)


def _reverse(msgs: list[Message]) -> list[Message]:
    return [Message(mm.dst, mm.src, mm.dim, mm.bytes, mm.blocks,
                    None if mm.direction is None else -mm.direction) for mm in msgs]
