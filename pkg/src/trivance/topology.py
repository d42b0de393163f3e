"""Ring and D-dimensional torus networks.

Node ids are row-major with dimension 0 varying fastest, so on a
``[3, 3]`` torus node 4 sits at coordinate ``(1, 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

from .errors import CrossDimensionMessage, InvalidNode, ZeroNodes


@dataclass(frozen=True)
class Topology:
    dims: tuple[int, ...]

    def __init__(self, dims: Sequence[int]):
        dims = tuple(int(a) for a in dims)
        if not dims or len(dims) > 4:
            raise ValueError(f"torus must have 1..4 dimensions, got {len(dims)}")
        if any(a < 1 for a in dims):
            raise ZeroNodes(f"every dimension needs at least one node: {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def D(self) -> int:
        return len(self.dims)

    @property
    def n(self) -> int:
        return math.prod(self.dims)

    @cached_property
    def strides(self) -> tuple[int, ...]:
        out, acc = [], 1
        for a in self.dims:
            out.append(acc)
            acc *= a
        return tuple(out)

    def __str__(self) -> str:
        return "x".join(str(a) for a in self.dims)


@dataclass(frozen=True)
class DirectedLink:
    src: int
    dst: int
    dim: int


def coord_of(topo: Topology, node: int) -> tuple[int, ...]:
    if not 0 <= node < topo.n:
        raise InvalidNode(f"node {node} outside 0..{topo.n - 1}")
    out = []
    for a in topo.dims:
        node, c = divmod(node, a)
        out.append(c)
    return tuple(out)


def id_of(topo: Topology, coord: Sequence[int]) -> int:
    if len(coord) != topo.D:
        raise InvalidNode(f"coordinate {tuple(coord)} has wrong rank for {topo}")
    node = 0
    for c, a, s in zip(coord, topo.dims, topo.strides):
        if not 0 <= c < a:
            raise InvalidNode(f"coordinate {tuple(coord)} outside {topo}")
        node += c * s
    return node


def ring_signed_distance(size: int, a: int, b: int) -> int:
    """Signed hop count from ``a`` to ``b``; ties at size/2 go positive."""
    d = (b - a) % size
    return d if 2 * d <= size else d - size


def neighbor(topo: Topology, node: int, dim: int, step: int) -> int:
    """Node reached from ``node`` by ``step`` hops (signed) along ``dim``."""
    a, s = topo.dims[dim], topo.strides[dim]
    c = (node // s) % a
    return node + (((c + step) % a) - c) * s


def message_dim(topo: Topology, src: int, dst: int) -> int:
    """The single dimension in which ``src`` and ``dst`` differ."""
    cs, cd = coord_of(topo, src), coord_of(topo, dst)
    diff = [d for d in range(topo.D) if cs[d] != cd[d]]
    if len(diff) != 1:
        raise CrossDimensionMessage(f"{src}->{dst} differ in dimensions {diff}")
    return diff[0]


def hops(topo: Topology, src: int, dst: int, dim: int, direction: int | None = None) -> int:
    """Signed hop count of the route from ``src`` to ``dst`` along ``dim``.

    ``direction`` forces the route around the ring (+1 or -1); ``None``
    takes the minimal route.
    """
    cs, cd = coord_of(topo, src), coord_of(topo, dst)
    if any(cs[d] != cd[d] for d in range(topo.D) if d != dim):
        raise CrossDimensionMessage(f"{src}->{dst} is not a dimension-{dim} message")
    a = topo.dims[dim]
    if direction is None:
        return ring_signed_distance(a, cs[dim], cd[dim])
    if direction > 0:
        return (cd[dim] - cs[dim]) % a
    return -((cs[dim] - cd[dim]) % a)


def shortest_path(topo: Topology, src: int, dst: int, dim: int,
                  direction: int | None = None) -> list[DirectedLink]:
    h = hops(topo, src, dst, dim, direction)
    step = 1 if h > 0 else -1
    path, cur = [], src
    for _ in range(abs(h)):
        nxt = neighbor(topo, cur, dim, step)
        path.append(DirectedLink(cur, nxt, dim))
        cur = nxt
    return path


def translate(topo: Topology, node: int, by: int) -> int:
    """Node at coordinate coord(node) + coord(by), wrapping in every dimension."""
    out = 0
    for a, s in zip(topo.dims, topo.strides):
        out += (((node // s) % a + (by // s) % a) % a) * s
    return out


def difference(topo: Topology, a_node: int, b_node: int) -> int:
    """Node t with translate(b_node, t) == a_node."""
    out = 0
    for a, s in zip(topo.dims, topo.strides):
        out += (((a_node // s) - (b_node // s)) % a) * s
    return out
