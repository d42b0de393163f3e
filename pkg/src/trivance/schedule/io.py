"""JSON interchange for schedules.

Top-level keys, in this order: algo, variant, dims, n, m_bytes,
phase_boundary, steps, then collectives and options (needed to read a
schedule back losslessly).  Each message is written as src, dst, dim,
bytes (6 significant digits), blocks as [collective, owner] pairs, and a
``dir`` key only when its ring direction is pinned.
"""

from __future__ import annotations

import json

from ..topology import Topology
from .model import BlockSet, Message, Schedule, Step


def _bytes(value: float) -> float | int:
    out = float(f"{value:.6g}")
    return int(out) if out.is_integer() else out


def to_dict(schedule: Schedule) -> dict:
    topo = schedule.topo
    steps = []
    for step in schedule.steps:
        msgs = []
        for mm in step:
            c = mm.blocks.collective
            rec = {"src": mm.src, "dst": mm.dst, "dim": mm.dim, "bytes": _bytes(mm.bytes),
                   "blocks": [[c, int(o)] for o in mm.blocks.owners(topo)]}
            if mm.direction is not None:
                rec["dir"] = mm.direction
            msgs.append(rec)
        steps.append({"k": step.k, "messages": msgs})
    return {
        "algo": schedule.algo,
        "variant": schedule.variant,
        "dims": list(topo.dims),
        "n": topo.n,
        "m_bytes": _bytes(schedule.m),
        "phase_boundary": schedule.phase_boundary,
        "steps": steps,
        "collectives": schedule.collectives,
        "options": dict(schedule.options),
    }


def to_json(schedule: Schedule, indent: int | None = None) -> str:
    return json.dumps(to_dict(schedule), indent=indent)


def from_dict(data: dict) -> Schedule:
    topo = Topology(data["dims"])
    if "n" in data and data["n"] != topo.n:
        raise ValueError(f"n={data['n']} does not match dims {data['dims']}")
    steps = []
    collectives = 1
    for i, rec in enumerate(data["steps"]):
        msgs = []
        for mm in rec["messages"]:
            pairs = mm["blocks"]
            cols = {int(c) for c, _ in pairs}
            if len(cols) > 1:
                raise ValueError(f"message {mm['src']}->{mm['dst']} mixes collectives {sorted(cols)}")
            c = cols.pop() if cols else 0
            collectives = max(collectives, c + 1)
            owners = tuple(sorted(int(o) for _, o in pairs))
            msgs.append(Message(int(mm["src"]), int(mm["dst"]), int(mm["dim"]),
                                float(mm["bytes"]), BlockSet(c, explicit=owners),
                                mm.get("dir")))
        steps.append(Step(int(rec.get("k", i)), tuple(msgs)))
    return Schedule(data["algo"], data["variant"], topo, float(data["m_bytes"]),
                    tuple(steps), int(data.get("collectives", collectives)),
                    data.get("phase_boundary"), dict(data.get("options", {})))


def from_json(text: str) -> Schedule:
    return from_dict(json.loads(text))


def save(schedule: Schedule, path, indent: int | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(to_json(schedule, indent))
        fh.write("\n")


def load(path) -> Schedule:
    with open(path) as fh:
        return from_json(fh.read())
