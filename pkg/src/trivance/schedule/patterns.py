"""Peer functions and single-ring communication patterns.

Each pattern describes one collective on one ring of ``size`` nodes:

* ``rs_sends(x, j)`` lists the Reduce-Scatter transfers of node ``x`` at
  local step ``j`` as ``(dst, direction, slots)``;
* ``live(x, j)`` is the set of slots whose partial sums ``x`` still has
  to route before step ``j`` (everything at ``j = 0``, only ``x`` itself
  once the pattern is done);
* ``lat_sends`` / ``held`` are the latency-variant counterparts, where a
  message carries contributions (origins) rather than slots.

Multidimensional schedules take products of these per-ring sets.
"""

from __future__ import annotations

from functools import cached_property

from ..errors import InvalidPeer, NotApplicable, Unsupported


def ceil_log(base: int, n: int) -> int:
    """Smallest s with base**s >= n (0 for n <= 1)."""
    s, p = 0, 1
    while p < n:
        p *= base
        s += 1
    return s


def floor_log(base: int, n: int) -> int:
    s, p = 0, base
    while p <= n:
        p *= base
        s += 1
    return s


def is_power_of(base: int, n: int) -> bool:
    return n >= 1 and base ** ceil_log(base, n) == n


def trivance_rho(k: int) -> int:
    return 3 ** k


def trivance_peers(r: int, k: int, size: int) -> tuple[int, int]:
    d = trivance_rho(k)
    return (r - d) % size, (r + d) % size


def trivance_final_distance(size: int) -> int:
    if size < 2:
        raise NotApplicable("a ring of one node needs no communication")
    if is_power_of(3, size):
        raise NotApplicable(f"{size} is a power of three; no shortened final step")
    missing = size - 3 ** floor_log(3, size)
    return -(-missing // 2)


def trivance_distances(size: int) -> list[int]:
    """Per-step distances: 3**j, with the shortened last step for general sizes."""
    s = ceil_log(3, size)
    dist = [3 ** j for j in range(s)]
    if s and not is_power_of(3, size):
        dist[-1] = trivance_final_distance(size)
    return dist


def block_propagation(r: int, step: int, size: int,
                      distances: list[int] | None = None) -> set[int]:
    """Nodes reached from ``r`` by the steps ``step`` onwards (recursive)."""
    if distances is None:
        distances = [3 ** k for k in range(ceil_log(3, size))]
    marked: set[int] = set()

    def walk(node: int, first: int) -> None:
        for k in range(first, len(distances)):
            left, right = (node - distances[k]) % size, (node + distances[k]) % size
            marked.add(left)
            marked.add(right)
            walk(left, k + 1)
            walk(right, k + 1)

    walk(r, step)
    return marked


def trivance_block_set(size: int, r: int, p: int, k: int) -> frozenset[int]:
    """Owners of the blocks ``r`` sends to its step-``k`` peer ``p``."""
    if not is_power_of(3, size):
        raise NotApplicable(f"closed form needs a power-of-three ring, got {size}")
    s = ceil_log(3, size)
    if k >= s or p not in trivance_peers(r, k, size):
        raise InvalidPeer(f"{p} is not a step-{k} peer of {r} on a ring of {size}")
    out = {p}
    for i in range(k + 1, s):
        out = {(x + e * 3 ** i) % size for x in out for e in (-1, 0, 1)}
    return frozenset(out)


def swing_rho(k: int) -> int:
    return (1 - (-2) ** (k + 1)) // 3


def recdoub_peer(r: int, k: int, size: int | None = None) -> int:
    if size is not None:
        if not is_power_of(2, size):
            raise Unsupported(f"recursive doubling needs a power-of-two ring, got {size}")
        if 2 ** k >= size:
            raise ValueError(f"step {k} out of range for a ring of {size}")
    return r ^ (1 << k)


def bruck_peers(r: int, k: int, size: int) -> tuple[int, int]:
    d = 3 ** k
    return (r + d) % size, (r + 2 * d) % size


def dim_assignment(collective: int, k: int, D: int) -> int:
    return (collective + k) % D


def local_step(k: int, D: int) -> int:
    return k // D


class DigitPattern:
    """Translation-invariant pattern where node x talks to x + e*dist[j].

    ``digits`` are the non-zero multipliers a node uses per step, in the
    order in which receivers prefer senders when handing out missing
    contributions.  Block routes for Reduce-Scatter pick, for every
    remaining offset, the first digit (zero first, then ``digits`` order)
    that still allows the offset to be completed.  The routes form an
    in-tree and, since holding is tried first, never revisit a node, so
    the reversed routes are a valid AllGather.
    """

    def __init__(self, size: int, distances: list[int], digits: list[int],
                 directed: bool = True):
        self.size = size
        self.distances = list(distances)
        self.digits = list(digits)
        self.directed = directed

    @property
    def steps(self) -> int:
        return len(self.distances)

    def _direction(self, e: int) -> int | None:
        if not self.directed:
            return None
        return 1 if e > 0 else -1

    # -- Reduce-Scatter -------------------------------------------------
    @cached_property
    def _routes(self):
        a, s = self.size, self.steps
        choices = [0, *self.digits]
        valid = [None] * (s + 1)
        valid[s] = {0}
        for j in range(s - 1, -1, -1):
            d = self.distances[j]
            valid[j] = {(v + e * d) % a for v in valid[j + 1] for e in choices}
        if len(valid[0]) != a:
            raise Unsupported(f"pattern cannot reach every node of a ring of {a}")
        live = [tuple(range(a))]
        sends = []
        for j in range(s):
            d = self.distances[j]
            by_digit = {e: [] for e in self.digits}
            nxt = set()
            for rho in live[j]:
                e = next(e for e in choices if (rho - e * d) % a in valid[j + 1])
                nxt.add((rho - e * d) % a)
                if e:
                    by_digit[e].append(rho)
            sends.append({e: tuple(v) for e, v in by_digit.items()})
            live.append(tuple(sorted(nxt)))
        return live, sends

    def live(self, x: int, j: int) -> tuple[int, ...]:
        return self._shifted(("live", x, j), self._routes[0][j], x)

    def rs_sends(self, x: int, j: int):
        a, d = self.size, self.distances[j]
        return [((x + e * d) % a, self._direction(e), self._shifted(("rs", x, j, e), rel, x))
                for e, rel in self._routes[1][j].items() if rel]

    # -- latency --------------------------------------------------------
    @cached_property
    def _latency(self):
        """Offsets (receiver - origin) held before each step, and per-digit
        offsets (sender - origin) each sender forwards."""
        a = self.size
        held = [frozenset({0})]
        forwarded = []
        for d in self.distances:
            cur = held[-1]
            new = set(cur)
            per_digit = {}
            for e in self.digits:
                fresh = sorted(rel for rel in cur if (rel + e * d) % a not in new)
                new.update((rel + e * d) % a for rel in fresh)
                per_digit[e] = tuple(fresh)
            forwarded.append(per_digit)
            held.append(frozenset(new))
        return held, forwarded

    def held(self, x: int, j: int) -> tuple[int, ...]:
        rel = tuple(sorted(self._latency[0][j]))
        return self._shifted(("held", x, j), rel, x, negate=True)

    def lat_sends(self, x: int, j: int):
        a, d = self.size, self.distances[j]
        out = []
        for e in self.digits:
            rel = self._latency[1][j][e]
            if rel:
                out.append(((x + e * d) % a, self._direction(e),
                            self._shifted(("lat", x, j, e), rel, x, negate=True)))
        return out

    @cached_property
    def _cache(self) -> dict:
        return {}

    def _shifted(self, key, rel, x, negate=False):
        a = self.size
        if len(rel) == 1:
            return (((x - rel[0]) if negate else (x + rel[0])) % a,)
        got = self._cache.get(key)
        if got is None:
            if negate:
                got = tuple(sorted((x - r) % a for r in rel))
            else:
                got = tuple(sorted((x + r) % a for r in rel))
            self._cache[key] = got
        return got


class ExchangePattern:
    """Pairwise-exchange pattern (Recursive Doubling, Swing).

    ``offset(x, k)`` is the signed distance from ``x`` to its partner; a
    mirrored pattern uses the negated offset, so every node drives the
    opposite port of the same dimension.
    """

    def __init__(self, size: int, offset, mirrored: bool = False):
        if not is_power_of(2, size):
            raise Unsupported(f"exchange patterns need a power-of-two ring, got {size}")
        self.size = size
        self._offset = offset
        self.mirrored = mirrored

    @property
    def steps(self) -> int:
        return ceil_log(2, self.size)

    def offset(self, x: int, k: int) -> int:
        o = self._offset(x, k)
        return -o if self.mirrored else o

    def peer(self, x: int, k: int) -> int:
        return (x + self.offset(x, k)) % self.size

    def _direction(self, x: int, k: int) -> int:
        return 1 if self.offset(x, k) > 0 else -1

    @cached_property
    def _reach(self):
        a, s = self.size, self.steps
        reach = [None] * (s + 1)
        reach[s] = [(x,) for x in range(a)]
        for j in range(s - 1, -1, -1):
            reach[j] = [tuple(sorted(set(reach[j + 1][x]) | set(reach[j + 1][self.peer(x, j)])))
                        for x in range(a)]
        return reach

    @cached_property
    def _held(self):
        a = self.size
        held = [[(x,) for x in range(a)]]
        for j in range(self.steps):
            prev = held[-1]
            held.append([tuple(sorted(set(prev[x]) | set(prev[self.peer(x, j)])))
                         for x in range(a)])
        return held

    def live(self, x: int, j: int) -> tuple[int, ...]:
        return self._reach[j][x]

    def rs_sends(self, x: int, j: int):
        p = self.peer(x, j)
        return [(p, self._direction(x, j), self._reach[j + 1][p])]

    def held(self, x: int, j: int) -> tuple[int, ...]:
        return self._held[j][x]

    def lat_sends(self, x: int, j: int):
        return [(self.peer(x, j), self._direction(x, j), self._held[j][x])]


def trivance_pattern(size: int) -> DigitPattern:
    # left peer (x - d, sending +d) is served first
    return DigitPattern(size, trivance_distances(size), [1, -1])


def bruck_pattern(size: int, unidirectional: bool = True) -> DigitPattern:
    s = ceil_log(3, size)
    return DigitPattern(size, [3 ** j for j in range(s)], [1, 2], directed=unidirectional)


def ring_pattern(size: int, direction: int) -> DigitPattern:
    return DigitPattern(size, [1] * (size - 1), [direction])


def _recdoub_offset(x: int, k: int) -> int:
    return (1 << k) if not (x >> k) & 1 else -(1 << k)


def _swing_offset(x: int, k: int) -> int:
    return swing_rho(k) if x % 2 == 0 else -swing_rho(k)


def recdoub_pattern(size: int, mirrored: bool = False) -> ExchangePattern:
    return ExchangePattern(size, _recdoub_offset, mirrored)


def swing_pattern(size: int, mirrored: bool = False) -> ExchangePattern:
    return ExchangePattern(size, _swing_offset, mirrored)
