"""Symbolic replay of schedules.

Each (node, collective, slot) holds the set of origins already reduced
into it.  Steps are synchronous: every transfer of step k reads the state
as it was before step k.  Three transfer kinds exist:

* latency messages add the listed origins to the receiver's single slot;
* Reduce-Scatter messages *move* the sender's partial sums for the listed
  slots into the receiver's;
* AllGather messages copy finished slots to a receiver that lacks them.

Receiving an origin that is already present is an exactly-once fault.

Backends sharing these semantics:

* ``exact`` stores origin sets as bitsets and names the duplicated origin;
* ``translation`` first proves that every step is invariant under a
  group of torus symmetries acting regularly on the nodes (shifts, XOR
  shifts, or shifts with reflections), then replays only owner 0's slot
  exactly.  Every other slot is an image of that one, so nothing is lost;
* ``fingerprint`` stores a count and two random hash sums per slot.  It
  catches over-full slots at once and any other duplicate or gap at the
  final check (collision odds below 1e-17).

``translation`` falls back per collective (to ``exact`` up to 1024 nodes,
``fingerprint`` above) when no symmetry is found.  ``auto`` is ``exact``
up to 1024 nodes and ``translation`` above.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ExactlyOnceViolation, PhantomContribution, PortViolation
from .schedule.model import LATENCY, Message, Schedule
from .topology import Topology, hops

_PRIME = (1 << 31) - 1
_EXACT_MAX_NODES = 1024


@dataclass
class ContributionState:
    topo: Topology
    variant: str
    collectives: int
    steps_replayed: int
    # per collective: bool array (nodes, slots); slots == 1 for latency
    complete: list[np.ndarray]
    boundary_complete: list[np.ndarray] | None = None
    # exact backend only: per collective uint64 array (nodes, slots, words)
    bits: list[np.ndarray] | None = field(default=None, repr=False)
    # per collective, the symmetry used by the translation backend (None
    # when replayed in full).  Only slot 0 is stored; with g_q the element
    # sending 0 to q, slot q of node v is g_q applied to slot 0 of g_q^-1(v)
    groups: list[str | None] | None = None

    def group(self, collective: int) -> str | None:
        return None if self.groups is None else self.groups[collective]

    def slot_complete(self, collective: int) -> np.ndarray:
        """Full (nodes, slots) completeness, expanding a reduced replay."""
        done = self.complete[collective]
        kind = self.group(collective)
        return done if kind is None else _expand(self.topo, kind, done[:, 0])

    def origins(self, node: int, collective: int = 0, slot: int = 0) -> set[int]:
        if self.bits is None:
            raise ValueError("origin sets are only kept by the exact backend")
        kind = self.group(collective)
        if kind is None:
            return _bits_to_set(self.bits[collective][node, slot])
        pulled = _map_node(self.topo, kind, slot, node, True)
        base = _bits_to_set(self.bits[collective][pulled, 0])
        return {_map_node(self.topo, kind, slot, u, False) for u in base}


def _coord_array(topo: Topology) -> np.ndarray:
    ids = np.arange(topo.n)
    return np.stack([(ids // s) % a for a, s in zip(topo.dims, topo.strides)], axis=1)


def _expand(topo: Topology, kind: str, column: np.ndarray) -> np.ndarray:
    c = _coord_array(topo)
    idx = np.zeros((topo.n, topo.n), dtype=np.int64)
    for f, (a, s) in enumerate(zip(topo.dims, topo.strides)):
        idx += _g_inv(kind, c[None, :, f], c[:, None, f], a) * s
    return column[idx]


@dataclass
class CheckReport:
    passed: bool
    # (node, collective, slot, origin); origin -1 when unknown
    missing: list[tuple[int, int, int, int]]
    incomplete_slots: int

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict:
        return {"passed": self.passed, "incomplete_slots": self.incomplete_slots,
                "missing": [list(t) for t in self.missing]}


def _bits_to_set(words: np.ndarray) -> set[int]:
    out = set()
    for w, word in enumerate(words.tolist()):
        while word:
            low = word & -word
            out.add(w * 64 + low.bit_length() - 1)
            word ^= low
    return out


def message_direction(topo: Topology, msg: Message) -> int:
    h = hops(topo, msg.src, msg.dst, msg.dim, msg.direction)
    return 1 if h > 0 else -1


def check_ports(schedule: Schedule, strict: bool = False) -> None:
    """At most two sends and two receives per node and dimension per step.

    ``strict`` additionally requires distinct directions, i.e. one message
    per physical port.
    """
    topo = schedule.topo
    D = topo.D
    limit = 1 if strict else 2
    for step in schedule.steps:
        if not step.messages:
            continue
        dims = np.array([mm.dim for mm in step], dtype=np.int64)
        if strict:
            dirs = np.array([message_direction(topo, mm) > 0 for mm in step], dtype=np.int64)
        else:
            dirs = np.zeros(len(dims), dtype=np.int64)
        for kind, attr in (("sends", "src"), ("receives", "dst")):
            nodes = np.array([getattr(mm, attr) for mm in step], dtype=np.int64)
            key = (nodes * D + dims) * 2 + dirs
            uniq, counts = np.unique(key, return_counts=True)
            if counts.max() > limit:
                bad = int(uniq[np.argmax(counts)])
                raise PortViolation(step.k, bad // 2 // D, bad // 2 % D, kind, int(counts.max()))


def _by_collective(schedule: Schedule, steps: int):
    out = [[[] for _ in range(steps)] for _ in range(schedule.collectives)]
    for k, step in enumerate(schedule.steps[:steps]):
        for msg in step:
            out[msg.collective][k].append(msg)
    return out


def _hash_tables(topo: Topology, seed: int = 0x7A11):
    rng = np.random.default_rng(seed)
    tables = []
    for _ in range(2):
        per_dim = [rng.integers(1, _PRIME, size=a, dtype=np.int64) for a in topo.dims]
        full = np.ones(1, dtype=np.int64)
        for g in reversed(per_dim):
            full = (full[:, None] * g[None, :] % _PRIME).ravel()
        # last multiplied axis is dim 0, so ravel order matches node ids
        tables.append((per_dim, full))
    return tables


class _Exact:
    def __init__(self, n: int, slots: int):
        self.n, self.slots = n, slots
        self.words = (n + 63) // 64
        self.state = np.zeros((n, slots, self.words), dtype=np.uint64)
        r = np.arange(n)
        self.state[r, :, r >> 6] = (np.uint64(1) << (r & 63).astype(np.uint64))[:, None]

    def mask(self, owners: np.ndarray) -> np.ndarray:
        out = np.zeros(self.words, dtype=np.uint64)
        np.bitwise_or.at(out, owners >> 6, np.uint64(1) << (owners & 63).astype(np.uint64))
        return out

    def complete(self) -> np.ndarray:
        return np.bitwise_count(self.state).sum(axis=2) == self.n

    def gather(self, src, slot):
        return self.state[src, slot]

    def merge(self, step, dst, slot, incoming):
        key = dst * self.slots + slot
        order = np.argsort(key, kind="stable")
        key, incoming = key[order], incoming[order]
        starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
        ukey = key[starts]
        flat = self.state.reshape(-1, self.words)
        union = np.bitwise_or.reduceat(incoming, starts, axis=0)
        pop_in = np.add.reduceat(np.bitwise_count(incoming).sum(axis=1), starts)
        existing = flat[ukey]
        merged = union | existing
        bad = np.bitwise_count(merged).sum(axis=1) != pop_in + np.bitwise_count(existing).sum(axis=1)
        if bad.any():
            g = int(np.flatnonzero(bad)[0])
            end = starts[g + 1] if g + 1 < len(starts) else len(key)
            seen = _bits_to_set(existing[g])
            for row in incoming[starts[g]:end]:
                got = _bits_to_set(row)
                dup = seen & got
                if dup:
                    break
                seen |= got
            k = int(ukey[g])
            raise ExactlyOnceViolation(step, k // self.slots, k % self.slots, min(dup))
        flat[ukey] = merged

    def clear(self, src, slot):
        self.state[src, slot] = 0

    def assign(self, step, dst, slot, incoming):
        key = dst * self.slots + slot
        flat = self.state.reshape(-1, self.words)
        done = np.bitwise_count(flat[key]).sum(axis=1) == self.n
        uniq, counts = np.unique(key, return_counts=True)
        if done.any() or (counts > 1).any():
            k = int(key[np.flatnonzero(done)[0]]) if done.any() else int(uniq[counts > 1][0])
            origin = min(_bits_to_set(flat[k])) if done.any() else -1
            raise ExactlyOnceViolation(step, k // self.slots, k % self.slots, origin)
        flat[key] = incoming

    def check_held(self, step, src, masks):
        lacking = masks & ~self.state[src, 0]
        if lacking.any():
            i = int(np.flatnonzero(lacking.any(axis=1))[0])
            raise PhantomContribution(step, int(src[i]), min(_bits_to_set(lacking[i])))


class _Fingerprint:
    """Per slot: [count, hash0, hash1] with hashes summed mod a prime.

    Stored column-wise as a (3, nodes * slots) array.
    """

    def __init__(self, topo: Topology, slots: int):
        n = topo.n
        self.n, self.slots = n, slots
        self.tables = _hash_tables(topo)
        self.state = np.empty((3, n * slots), dtype=np.int64)
        self.state[0] = 1
        for i, (_, full) in enumerate(self.tables):
            self.state[1 + i] = np.repeat(full, slots)
        self.target = np.array([n] + [int(full.sum() % _PRIME) for _, full in self.tables])
        self._axis_sums: dict = {}

    def mask(self, msg: Message, topo: Topology):
        b = msg.blocks
        if b.axes is not None:
            count = len(b)
            hs = []
            for i, (per_dim, _) in enumerate(self.tables):
                acc = 1
                for f, (g, ax) in enumerate(zip(per_dim, b.axes)):
                    key = (i, f, ax)
                    part = self._axis_sums.get(key)
                    if part is None:
                        part = self._axis_sums[key] = int(g[list(ax)].sum() % _PRIME)
                    acc = acc * part % _PRIME
                hs.append(acc)
        else:
            own = b.owners(topo)
            count = len(own)
            hs = [int(full[own].sum() % _PRIME) for _, full in self.tables]
        return np.array([count, *hs], dtype=np.int64)

    def _done(self, cols) -> np.ndarray:
        out = cols[0] == self.target[0]
        idx = np.flatnonzero(out)
        for c in (1, 2):
            out[idx] &= cols[c][idx] % _PRIME == self.target[c]
        return out

    def complete(self) -> np.ndarray:
        return self._done(self.state).reshape(self.n, self.slots)

    def gather(self, src, slot):
        key = src * self.slots + slot
        return [row[key] for row in self.state]

    def merge(self, step, dst, slot, incoming):
        # hashes stay unreduced: n sums of values below 2**31 fit in int64
        key = dst * self.slots + slot
        for row, inc in zip(self.state, incoming):
            np.add.at(row, key, inc)
        over = self.state[0][key] > self.n
        if over.any():
            k = int(key[np.flatnonzero(over)[0]])
            raise ExactlyOnceViolation(step, k // self.slots, k % self.slots, -1)

    def clear(self, src, slot):
        key = src * self.slots + slot
        for row in self.state:
            row[key] = 0

    def assign(self, step, dst, slot, incoming):
        key = dst * self.slots + slot
        done = self._done([row[key] for row in self.state])
        if done.any():
            k = int(key[np.flatnonzero(done)[0]])
            raise ExactlyOnceViolation(step, k // self.slots, k % self.slots, -1)
        order = np.sort(key)
        dup = order[1:] == order[:-1]
        if dup.any():
            k = int(order[1:][dup][0])
            raise ExactlyOnceViolation(step, k // self.slots, k % self.slots, -1)
        for row, inc in zip(self.state, incoming):
            row[key] = inc

    def check_held(self, step, src, masks):
        # subset tests need the origin sets themselves
        pass


def _g_inv(kind: str, t, x, a: int):
    """Preimage of coordinate x under the group element sending 0 to t."""
    if kind == "shift":
        return (x - t) % a
    if kind == "xor":
        return x ^ t
    if kind == "negxor":
        return (-((-x % a) ^ (-t % a))) % a
    odd = t & 1  # reflect: even t shifts, odd t maps x to t - x
    return ((x - t) % a) * (1 - odd) + ((t - x) % a) * odd


def _g_fwd(kind: str, t, x, a: int):
    if kind == "shift":
        return (x + t) % a
    if kind in ("xor", "negxor"):
        return _g_inv(kind, t, x, a)
    odd = t & 1
    return ((x + t) % a) * (1 - odd) + ((t - x) % a) * odd


_GROUPS = ("shift", "xor", "negxor", "reflect")


def _group_fits(kind: str, dims) -> bool:
    if kind in ("xor", "negxor"):
        return all(a & (a - 1) == 0 for a in dims)
    if kind == "reflect":
        return all(a == 1 or a % 2 == 0 for a in dims)
    return True


def _map_node(topo: Topology, kind: str, t: int, x: int, inverse: bool) -> int:
    fn = _g_inv if inverse else _g_fwd
    out = 0
    for a, s in zip(topo.dims, topo.strides):
        out += int(fn(kind, (t // s) % a, (x // s) % a, a)) * s
    return out


class _StepArrays:
    """Messages of one collective as integer arrays, with per-dimension
    owner sets interned to ids (``-1`` marks explicit block lists)."""

    def __init__(self, topo: Topology, per_step: list[list[Message]]):
        self.axes: list[tuple[int, tuple[int, ...]]] = []
        ids: dict = {}
        D = topo.D
        # generated schedules share BlockSet objects, so intern per object
        rows: dict = {}
        table: list = []
        raw = []
        for msgs in per_step:
            src = np.array([mm.src for mm in msgs], dtype=np.int64)
            dst = np.array([mm.dst for mm in msgs], dtype=np.int64)
            dim = np.array([mm.dim for mm in msgs], dtype=np.int64)
            idx = np.empty(len(msgs), dtype=np.int64)
            for i, mm in enumerate(msgs):
                b = mm.blocks
                r = rows.get(id(b))
                if r is None:
                    r = rows[id(b)] = len(table)
                    table.append(self._row(b, D, ids))
                idx[i] = r
            raw.append((src, dst, dim, idx))
        tab = np.array(table, dtype=np.int64).reshape(-1, D)
        self.steps = [(src, dst, dim, tab[idx]) for src, dst, dim, idx in raw]

    def _row(self, b, D: int, ids: dict) -> list[int]:
        if b.axes is None:
            return [-1] * D
        out = []
        for f, t in enumerate(b.axes):
            got = ids.get((f, t))
            if got is None:
                got = ids[(f, t)] = len(self.axes)
                self.axes.append((f, t))
            out.append(got)
        return out

    def has_zero(self) -> np.ndarray:
        return np.array([0 in t for _, t in self.axes], dtype=bool)


def symmetry_group(topo: Topology, arrays: _StepArrays) -> str | None:
    """A coordinate group under which every step maps onto itself, if any.

    Candidates act on each ring coordinate and send 0 to any node in
    exactly one way: cyclic shifts, XOR shifts and their conjugate by
    negation (power-of-two rings), and even shifts combined with
    reflections x -> t - x for odd t.  Every message is pulled back to
    node 0 by the element that sends 0 to its sender; a step is invariant
    iff each pulled-back form occurs exactly once at every node.  Link
    directions only matter for cost, so they are not part of the form.
    """
    if any((ax < 0).any() for *_, ax in arrays.steps):
        return None
    for kind in _GROUPS:
        if _group_fits(kind, topo.dims) and _invariant(topo, kind, arrays):
            return kind
    return None


def _invariant(topo: Topology, kind: str, arrays: _StepArrays) -> bool:
    n, D = topo.n, topo.D
    coords = _coord_array(topo)
    rel_ids: dict = {}
    for src, dst, dim, ax in arrays.steps:
        if not len(src):
            continue
        cs = coords[src]
        cols = [dim, np.zeros(len(src), dtype=np.int64)]
        for f, (a, stride) in enumerate(zip(topo.dims, topo.strides)):
            cols[1] += _g_inv(kind, cs[:, f], coords[dst, f], a) * stride
        for f in range(D):
            pairs = ax[:, f] * topo.dims[f] + cs[:, f]
            uniq, inv = np.unique(pairs, return_inverse=True)
            table = np.empty(len(uniq), dtype=np.int64)
            for i, pair in enumerate(uniq.tolist()):
                axis_id, t = divmod(pair, topo.dims[f])
                _, values = arrays.axes[axis_id]
                a = topo.dims[f]
                rel = (f, tuple(sorted(int(_g_inv(kind, t, x, a)) for x in values)))
                table[i] = rel_ids.setdefault(rel, len(rel_ids))
            cols.append(table[inv.reshape(-1)])
        forms, form_id, counts = np.unique(np.stack(cols, axis=1), axis=0,
                                           return_inverse=True, return_counts=True)
        if (counts != n).any():
            return False
        if len(np.unique(src * len(forms) + form_id.reshape(-1))) != len(src):
            return False
    return True


def simulate(schedule: Schedule, topo: Topology | None = None, *,
             steps: int | None = None, backend: str = "auto",
             ports: bool = True) -> ContributionState:
    """Replay the first ``steps`` steps (all by default) of ``schedule``."""
    topo = schedule.topo if topo is None else topo
    if topo != schedule.topo:
        raise ValueError(f"schedule was built for {schedule.topo}, not {topo}")
    if backend not in ("auto", "exact", "translation", "fingerprint"):
        raise ValueError(f"unknown backend {backend!r}")
    if ports:
        check_ports(schedule)
    total = len(schedule.steps) if steps is None else min(steps, len(schedule.steps))
    latency = schedule.variant == LATENCY
    n = topo.n
    boundary = schedule.phase_boundary

    cache: dict = {}

    def owners_of(b):
        # keyed by object: the schedule keeps every BlockSet alive
        got = cache.get(id(b))
        if got is None:
            got = cache[id(b)] = b.owners(topo)
        return got

    masks_cache: dict = {}

    def mask_of(mm):
        got = masks_cache.get(id(mm.blocks))
        if got is None:
            got = st.mask(owners_of(mm.blocks)) if chosen == "exact" else st.mask(mm, topo)
            masks_cache[id(mm.blocks)] = got
        return got

    complete, boundary_complete, bits, groups = [], [], [], []
    for per_step in _by_collective(schedule, total):
        kind, chosen = None, backend
        if backend == "auto":
            chosen = "exact" if n <= _EXACT_MAX_NODES else "translation"
        if chosen == "translation":
            if not latency:
                arrays = _StepArrays(topo, per_step)
                kind = symmetry_group(topo, arrays)
            if kind is None:
                chosen = "exact" if n <= _EXACT_MAX_NODES else "fingerprint"
        groups.append(kind)
        reduced = kind is not None
        slots = 1 if latency or reduced else n
        st = _Fingerprint(topo, slots) if chosen == "fingerprint" else _Exact(n, slots)
        masks_cache.clear()
        if reduced:
            zero = arrays.has_zero()
        for k, msgs in enumerate(per_step):
            if not latency and k == boundary:
                boundary_complete.append(st.complete())
            if reduced:
                src, dst, _, ax = arrays.steps[k]
                keep = zero[ax].all(axis=1)
                src, dst = src[keep], dst[keep]
                if not len(src):
                    continue
            elif not msgs:
                continue
            else:
                src = np.array([mm.src for mm in msgs], dtype=np.int64)
                dst = np.array([mm.dst for mm in msgs], dtype=np.int64)
            if latency:
                if chosen == "exact":
                    masks = np.stack([mask_of(mm) for mm in msgs])
                    st.check_held(k, src, masks)
                else:
                    masks = np.stack([mask_of(mm) for mm in msgs], axis=1)
                st.merge(k, dst, np.zeros(len(msgs), dtype=np.int64), masks)
                continue
            if reduced:
                e_src, e_dst = src, dst
                slot = np.zeros(len(src), dtype=np.int64)
            else:
                owners = [owners_of(mm.blocks) for mm in msgs]
                lens = np.array([len(o) for o in owners])
                slot = np.concatenate(owners)
                e_src, e_dst = np.repeat(src, lens), np.repeat(dst, lens)
            incoming = st.gather(e_src, slot)
            if boundary is None or k < boundary:
                st.clear(e_src, slot)
                st.merge(k, e_dst, slot, incoming)
            else:
                st.assign(k, e_dst, slot, incoming)
        if not latency and boundary is not None and total <= boundary:
            boundary_complete.append(st.complete())
        complete.append(st.complete())
        if chosen != "fingerprint" and (latency or reduced or n <= 256):
            bits.append(st.state)
    return ContributionState(topo, schedule.variant, schedule.collectives, total, complete,
                             boundary_complete if not latency else None,
                             bits if len(bits) == len(complete) else None,
                             groups if any(g is not None for g in groups) else None)


def _missing_origins(state: ContributionState, c: int, node: int, slot: int, room: int):
    if state.bits is None or c >= len(state.bits):
        return [(node, c, slot, -1)]
    gone = sorted(set(range(state.topo.n)) - state.origins(node, c, slot))
    return [(node, c, slot, u) for u in gone[:room]]


def check_allreduce(state: ContributionState, topo: Topology | None = None,
                    limit: int = 50) -> CheckReport:
    out, count = [], 0
    for c, done in enumerate(state.complete):
        bad = np.argwhere(~done)
        count += len(bad) * (state.topo.n if state.group(c) else 1)
        for node, slot in bad:
            if len(out) >= limit:
                break
            out.extend(_missing_origins(state, c, int(node), int(slot), limit - len(out)))
    return CheckReport(count == 0, out, count)


def check_reduce_scatter(state: ContributionState, topo: Topology | None = None,
                         limit: int = 50) -> CheckReport:
    if state.boundary_complete is None:
        raise ValueError("reduce-scatter check needs a bandwidth-variant replay")
    n = state.topo.n
    out, count = [], 0
    for c, a in enumerate(state.boundary_complete):
        if state.group(c):
            # node r's own slot r is the shift of node 0's slot 0
            bad = [] if a[0, 0] else list(range(n))
        else:
            bad = np.flatnonzero(~a[np.arange(n), np.arange(n)]).tolist()
        count += len(bad)
        out.extend((r, c, r, -1) for r in bad[: max(0, limit - len(out))])
    return CheckReport(count == 0, out, count)


@dataclass
class Coverage:
    radius: int
    contiguous: bool


def coverage_radius(state: ContributionState, topo: Topology | None = None,
                    size: int | None = None) -> list[Coverage]:
    """Per node: largest R with every origin within ring distance R present."""
    topo = state.topo if topo is None else topo
    if topo.D != 1 or state.bits is None or state.variant != LATENCY:
        raise ValueError("coverage radius is defined for exact 1-D latency replays")
    size = topo.n if size is None else size
    out = []
    for r in range(size):
        have = state.origins(r, 0, 0)
        R = 0
        while R < size // 2 and (r - R - 1) % size in have and (r + R + 1) % size in have:
            R += 1
        window = {(r + d) % size for d in range(-R, R + 1)}
        # one extra origin just past the window still leaves a contiguous arc
        extra = have - window
        arc = len(extra) <= 1 and extra <= {(r - R - 1) % size, (r + R + 1) % size}
        out.append(Coverage(R, have == window or arc))
    return out
