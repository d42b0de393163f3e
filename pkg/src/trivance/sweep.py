"""Message-size sweeps and baseline comparisons.

Each (algorithm, variant) schedule is generated and verified once at a
unit payload; completion times at the requested sizes follow by scaling
the per-step bottleneck loads.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

from . import __version__
from .cost import CostParams, StepProfile, format_size, profile
from .errors import TrivanceError, Unsupported
from .metrics import measured_factors
from .schedule import ALGORITHMS, VARIANTS, generate, supported
from .topology import Topology
from .verify import check_allreduce, simulate

CSV_COLUMNS = ["algo", "variant", "dims", "msize_bytes", "steps", "max_bytes_per_node",
               "lambda", "delta", "theta", "completion_s", "status"]
COMPARE_COLUMNS = ["msize_bytes", "baseline", "baseline_variant", "baseline_s",
                   "other", "other_variant", "other_s", "improvement"]


def size_grid(min_bytes: int = 32, max_bytes: int = 128 * 2**20, factor: int = 4) -> list[int]:
    if min_bytes <= 0 or max_bytes < min_bytes:
        raise ValueError(f"bad size range {min_bytes}..{max_bytes}")
    if factor <= 1:
        raise ValueError(f"size factor must exceed 1, got {factor}")
    out, s = [], min_bytes
    while s <= max_bytes:
        out.append(int(s))
        s *= factor
    return out


@dataclass
class Evaluated:
    """One schedule priced at unit payload; ``status`` is ok/unverified/failed."""
    algo: str
    variant: str
    topo: Topology
    status: str
    steps: int = 0
    max_bytes_unit: float = 0.0
    lam: float = math.nan
    delta: float = math.nan
    theta: float = math.nan
    prof: StepProfile | None = field(default=None, repr=False)

    def time(self, params: CostParams, m: float) -> float:
        if self.prof is None:
            return math.nan
        return self.prof.total(params, m)


def evaluate(algo: str, variant: str, topo: Topology, *, verify: bool = True,
             classic_singleport: bool = False, bruck_routing: str | None = None) -> Evaluated:
    if not supported(algo, variant, topo):
        return Evaluated(algo, variant, topo, "unsupported")
    try:
        sched = generate(algo, variant, topo, 1.0, classic_singleport=classic_singleport,
                         bruck_routing=bruck_routing)
    except Unsupported:
        return Evaluated(algo, variant, topo, "unsupported")
    status = "unverified"
    if verify:
        try:
            ok = check_allreduce(simulate(sched)).passed
        except TrivanceError as exc:
            return Evaluated(algo, variant, topo, f"failed: {exc}")
        if not ok:
            return Evaluated(algo, variant, topo, "failed: incomplete")
        status = "ok"
    rep = measured_factors(sched, with_references=False)
    return Evaluated(algo, variant, topo, status, len(sched.steps),
                     float(sched.bytes_sent_per_node().max()),
                     rep.measured.lam, rep.measured.delta, rep.measured.theta, profile(sched))


@dataclass
class SweepConfig:
    dims: tuple[int, ...]
    algorithms: list[str] = field(default_factory=lambda: list(ALGORITHMS))
    variants: list[str] = field(default_factory=lambda: list(VARIANTS))
    sizes: list[int] = field(default_factory=size_grid)
    params: CostParams = field(default_factory=CostParams)
    auto_variant: bool = False
    verify: bool = True
    classic_singleport: bool = False
    bruck_routing: str | None = None


def _fmt(x: float) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.10g}"


def run_sweep(cfg: SweepConfig) -> list[dict]:
    """Rows in (algo, variant, size) order; with ``auto_variant`` one row per
    (algo, size) carrying whichever variant is faster."""
    topo = Topology(cfg.dims)
    dims_text = "x".join(map(str, topo.dims))
    rows = []
    for algo in cfg.algorithms:
        evs = [evaluate(algo, v, topo, verify=cfg.verify,
                        classic_singleport=cfg.classic_singleport,
                        bruck_routing=cfg.bruck_routing) for v in cfg.variants]
        usable = [e for e in evs if e.prof is not None]
        if cfg.auto_variant:
            if not usable:
                # report the most informative failure once per size
                picks = [(size, _pick_failure(evs)) for size in cfg.sizes]
            else:
                picks = [(size, min(usable, key=lambda e: (e.time(cfg.params, size),
                                                          VARIANTS.index(e.variant))))
                         for size in cfg.sizes]
            rows.extend(_row(e, size, cfg.params, dims_text) for size, e in picks)
        else:
            for e in evs:
                if e.status == "unsupported":
                    continue
                rows.extend(_row(e, size, cfg.params, dims_text) for size in cfg.sizes)
    return rows


def _pick_failure(evs: list[Evaluated]) -> Evaluated:
    failed = [e for e in evs if e.status.startswith("failed")]
    return failed[0] if failed else evs[0]


def _row(e: Evaluated, size: int, params: CostParams, dims_text: str) -> dict:
    return {
        "algo": e.algo, "variant": e.variant, "dims": dims_text, "msize_bytes": size,
        "steps": e.steps if e.prof is not None else "",
        "max_bytes_per_node": _fmt(e.max_bytes_unit * size) if e.prof is not None else "",
        "lambda": _fmt(e.lam), "delta": _fmt(e.delta), "theta": _fmt(e.theta),
        "completion_s": _fmt(e.time(params, size)), "status": e.status,
    }


def header_lines(kind: str, cfg: SweepConfig) -> list[str]:
    p = cfg.params
    return [
        f"# trivance {__version__} {kind}",
        f"# dims={'x'.join(map(str, cfg.dims))} algorithms={','.join(cfg.algorithms)} "
        f"variants={','.join(cfg.variants)} auto_variant={cfg.auto_variant}",
        f"# alpha={p.alpha!r} beta={p.beta!r} link_latency={p.link_latency!r} "
        f"hop_latency={p.hop_latency!r} mode={p.mode}",
        f"# sizes={format_size(cfg.sizes[0])}..{format_size(cfg.sizes[-1])} "
        f"points={len(cfg.sizes)} verify={cfg.verify}",
    ]


def write_csv(rows: list[dict], columns: list[str], header: list[str]) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(line + "\n")
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def run_compare(baseline: str, cfg: SweepConfig) -> list[dict]:
    """Per size and competitor: (t_other - t_base) / t_other, best variants."""
    auto = SweepConfig(**{**vars(cfg), "auto_variant": True})
    if baseline not in auto.algorithms:
        auto.algorithms = [baseline] + list(auto.algorithms)
    best: dict[tuple[str, int], dict] = {}
    for row in run_sweep(auto):
        best[(row["algo"], row["msize_bytes"])] = row
    out = []
    for size in auto.sizes:
        base = best[(baseline, size)]
        t_base = float(base["completion_s"])
        for algo in auto.algorithms:
            other = best.get((algo, size))
            if other is None or other["completion_s"] == "nan":
                continue
            t_other = float(other["completion_s"])
            out.append({
                "msize_bytes": size, "baseline": baseline, "baseline_variant": base["variant"],
                "baseline_s": _fmt(t_base), "other": algo, "other_variant": other["variant"],
                "other_s": _fmt(t_other), "improvement": _fmt((t_other - t_base) / t_other),
            })
    return out
