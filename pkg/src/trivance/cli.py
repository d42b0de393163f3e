"""Command-line front end: gen, verify, cost, metrics, run, sweep, compare.

Exit codes: 0 ok, 1 verification failure, 2 usage error, 3 unsupported
configuration.  ``--config file.json`` supplies any flag by its long name
(dashes or underscores); explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from .cost import (DEFAULT_ALPHA, DEFAULT_BANDWIDTH_GBPS, DEFAULT_HOP_LATENCY,
                   DEFAULT_LINK_LATENCY, EQ1, EQ1_PLUS_HOPS, CostParams, beta_from_gbps,
                   completion_time, parse_bandwidth, parse_size, parse_time)
from .errors import TrivanceError, Unsupported
from .metrics import measured_factors
from .schedule import ALGORITHMS, generate, load, normalize_variant, save, to_json
from .sweep import (COMPARE_COLUMNS, CSV_COLUMNS, SweepConfig, header_lines, run_compare,
                    run_sweep, size_grid, write_csv)
from .topology import Topology
from .verify import check_allreduce, check_reduce_scatter, simulate

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_UNSUPPORTED = 0, 1, 2, 3

# built-in values for flags left unset on the command line and in --config
DEFAULTS = {
    "variant": "latency",
    "size": "1MiB",
    "alpha": f"{DEFAULT_ALPHA}",
    "bw": f"{DEFAULT_BANDWIDTH_GBPS}",
    "link_latency": f"{DEFAULT_LINK_LATENCY}",
    "hop_latency": f"{DEFAULT_HOP_LATENCY}",
    "mode": EQ1,
    "min_size": "32B",
    "max_size": "128MiB",
    "factor": 4,
    "algos": "all",
    "variants": "latency,bandwidth",
    "baseline": "trivance",
}


class UsageError(Exception):
    pass


def parse_dims(value) -> tuple[int, ...]:
    if isinstance(value, (list, tuple)):
        parts = [str(v) for v in value]
    else:
        parts = str(value).replace("x", ",").split(",")
    try:
        dims = tuple(int(p) for p in parts if p.strip())
    except ValueError:
        raise UsageError(f"cannot parse dims {value!r}") from None
    if not dims:
        raise UsageError("dims must not be empty")
    return dims


def _option(args, name):
    value = getattr(args, name, None)
    if value is None:
        value = args.config_values.get(name)
    if value is None:
        value = DEFAULTS.get(name)
    return value


def _flag(args, name) -> bool:
    return bool(getattr(args, name, False) or args.config_values.get(name, False))


def _params(args) -> CostParams:
    mode = _option(args, "mode")
    if mode not in (EQ1, EQ1_PLUS_HOPS):
        raise UsageError(f"unknown cost mode {mode!r}")
    hops = mode == EQ1_PLUS_HOPS
    return CostParams(
        alpha=parse_time(_option(args, "alpha")),
        beta=beta_from_gbps(parse_bandwidth(_option(args, "bw"))),
        link_latency=parse_time(_option(args, "link_latency")) if hops else 0.0,
        hop_latency=parse_time(_option(args, "hop_latency")) if hops else 0.0,
        mode=mode,
    )


def _required(args, name):
    value = _option(args, name)
    if value is None:
        raise UsageError(f"--{name.replace('_', '-')} is required")
    return value


def _schedule_from_flags(args):
    algo = _required(args, "algo")
    if algo not in ALGORITHMS:
        raise UsageError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")
    topo = Topology(parse_dims(_required(args, "dims")))
    return generate(algo, normalize_variant(_option(args, "variant")), topo,
                    float(parse_size(_option(args, "size"))),
                    classic_singleport=_flag(args, "classic_singleport"),
                    bruck_routing=_option(args, "bruck_routing"))


def _schedule(args):
    path = getattr(args, "schedule", None)
    return load(path) if path else _schedule_from_flags(args)


def _emit(args, text: str) -> None:
    out = getattr(args, "output", None) or args.config_values.get("output")
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _verify_report(sched) -> dict:
    state = simulate(sched)
    report = check_allreduce(state)
    out = {"passed": report.passed, "allreduce": report.to_dict()}
    if state.boundary_complete is not None:
        rs = check_reduce_scatter(state)
        out["reduce_scatter"] = rs.to_dict()
        out["passed"] = out["passed"] and rs.passed
    return out


def _verify_or_violation(sched) -> dict:
    try:
        return _verify_report(sched)
    except TrivanceError as exc:
        if isinstance(exc, Unsupported):
            raise
        return {"passed": False, "violation": {"type": type(exc).__name__, "message": str(exc)}}


# -- subcommands -----------------------------------------------------------------

def cmd_gen(args) -> int:
    sched = _schedule_from_flags(args)
    out = getattr(args, "output", None) or args.config_values.get("output")
    if out:
        save(sched, out)
    else:
        sys.stdout.write(to_json(sched) + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    sched = _schedule(args)
    result = _verify_or_violation(sched)
    if args.json:
        _emit(args, json.dumps(result, indent=2) + "\n")
    else:
        lines = [f"{sched.algo} {sched.variant} on {sched.topo}: "
                 f"{'PASS' if result['passed'] else 'FAIL'}"]
        if "violation" in result:
            lines.append(f"  {result['violation']['type']}: {result['violation']['message']}")
        for key in ("allreduce", "reduce_scatter"):
            if key in result and not result[key]["passed"]:
                lines.append(f"  {key}: {result[key]['incomplete_slots']} incomplete slots")
                for node, col, slot, origin in result[key]["missing"][:10]:
                    lines.append(f"    node {node} collective {col} slot {slot} "
                                 f"missing origin {origin if origin >= 0 else '?'}")
        _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK if result["passed"] else EXIT_VERIFY


def cmd_cost(args) -> int:
    sched = _schedule(args)
    report = completion_time(sched, params=_params(args))
    if args.json:
        _emit(args, json.dumps(report.to_dict(), indent=2) + "\n")
    else:
        lines = [f"{sched.algo} {sched.variant} on {sched.topo}, m={sched.m:g} B",
                 f"{'step':>5} {'max_link_bytes':>16} {'hops':>5} {'time_s':>14}"]
        for r in report.steps:
            lines.append(f"{r.k:>5} {r.max_link_bytes:>16.6g} {r.hop_count_max:>5} "
                         f"{r.step_time_seconds:>14.6e}")
        lines.append(f"total {report.total_seconds:.6e} s over {report.steps_count} steps")
        _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


def _factor_table(rep) -> str:
    lines = [f"{rep.algo} {rep.variant} on {'x'.join(map(str, rep.dims))}",
             f"{'factor':<8} {'measured':>12} {'exact':>12} {'asymptote':>12}"]
    for name, label in (("lam", "lambda"), ("delta", "delta"), ("theta", "theta")):
        vals = [getattr(rep.measured, name)]
        for ref in (rep.exact, rep.asymptote):
            vals.append(getattr(ref, name) if ref is not None else math.nan)
        lines.append(f"{label:<8} " + " ".join(f"{v:>12.6g}" for v in vals))
    return "\n".join(lines)


def cmd_metrics(args) -> int:
    sched = _schedule(args)
    rep = measured_factors(sched)
    if args.json:
        _emit(args, json.dumps(rep.to_dict(), indent=2, default=_nan_safe) + "\n")
    else:
        _emit(args, _factor_table(rep) + "\n")
    return EXIT_OK


def _nan_safe(x):
    return None


def cmd_run(args) -> int:
    sched = _schedule_from_flags(args)
    result = {"algo": sched.algo, "variant": sched.variant, "dims": list(sched.topo.dims),
              "msize_bytes": sched.m, "steps": len(sched.steps)}
    if _flag(args, "skip_verify"):
        result["verify"] = "skipped"
    else:
        v = _verify_or_violation(sched)
        result["verify"] = "pass" if v["passed"] else "fail"
        if not v["passed"]:
            result["verify_report"] = v
            _emit(args, json.dumps(result, indent=2) + "\n" if args.json else
                  f"{sched.algo} {sched.variant} on {sched.topo}: verification FAILED\n")
            return EXIT_VERIFY
    cost = completion_time(sched, params=_params(args))
    rep = measured_factors(sched)
    result.update({"completion_s": cost.total_seconds,
                   "max_bytes_per_node": float(sched.bytes_sent_per_node().max()),
                   "lambda": rep.measured.lam, "delta": rep.measured.delta,
                   "theta": rep.measured.theta})
    if args.json:
        _emit(args, json.dumps(result, indent=2) + "\n")
    else:
        _emit(args, (f"{sched.algo} {sched.variant} on {sched.topo}, m={sched.m:g} B\n"
                     f"  steps {len(sched.steps)}, verify {result['verify']}\n"
                     f"  completion {cost.total_seconds:.6e} s\n"
                     f"  lambda {rep.measured.lam:.6g} delta {rep.measured.delta:.6g} "
                     f"theta {rep.measured.theta:.6g}\n"))
    return EXIT_OK


def _sweep_config(args) -> SweepConfig:
    dims = parse_dims(_required(args, "dims"))
    algos = _option(args, "algos")
    algos = list(ALGORITHMS) if algos in ("all", ["all"]) else _listify(algos)
    for a in algos:
        if a not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {a!r}")
    variants = [normalize_variant(v) for v in _listify(_option(args, "variants"))]
    sizes = _option(args, "sizes")
    if sizes:
        sizes = sorted({parse_size(s) for s in _listify(sizes)})
    else:
        sizes = size_grid(parse_size(_option(args, "min_size")),
                          parse_size(_option(args, "max_size")), int(_option(args, "factor")))
    return SweepConfig(dims=dims, algorithms=algos, variants=variants, sizes=sizes,
                       params=_params(args), auto_variant=_flag(args, "auto_variant"),
                       verify=not _flag(args, "skip_verify"),
                       classic_singleport=_flag(args, "classic_singleport"),
                       bruck_routing=_option(args, "bruck_routing"))


def _listify(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


def cmd_sweep(args) -> int:
    cfg = _sweep_config(args)
    rows = run_sweep(cfg)
    _emit(args, write_csv(rows, CSV_COLUMNS, header_lines("sweep", cfg)))
    return EXIT_VERIFY if any(r["status"].startswith("failed") for r in rows) else EXIT_OK


def cmd_compare(args) -> int:
    cfg = _sweep_config(args)
    baseline = _option(args, "baseline")
    if baseline not in ALGORITHMS:
        raise UsageError(f"unknown baseline {baseline!r}")
    rows = run_compare(baseline, cfg)
    header = header_lines(f"compare baseline={baseline}", cfg)
    _emit(args, write_csv(rows, COMPARE_COLUMNS, header))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def _add_schedule_flags(p, with_file: bool = False):
    if with_file:
        p.add_argument("schedule", nargs="?", help="schedule JSON (otherwise built from flags)")
    p.add_argument("--algo", help=f"one of {', '.join(ALGORITHMS)}")
    p.add_argument("--variant", help="latency|bandwidth (l|b); default latency")
    p.add_argument("--dims", help="torus shape, e.g. 9 or 8,8 or 16x16x16")
    p.add_argument("--size", help="payload per node, e.g. 1MiB (default)")
    p.add_argument("--classic-singleport", action="store_true", default=None,
                   help="latency recdoub/swing as one single-port collective")
    p.add_argument("--bruck-routing", choices=["unidirectional", "shortest"])


def _add_cost_flags(p):
    p.add_argument("--alpha", help="per-step latency, e.g. 1.5us (default)")
    p.add_argument("--bw", help="link bandwidth, e.g. 800Gbps (default)")
    p.add_argument("--mode", choices=[EQ1, EQ1_PLUS_HOPS])
    p.add_argument("--link-latency", help="per-hop wire latency for eq1_plus_hops (100ns)")
    p.add_argument("--hop-latency", help="per-hop processing for eq1_plus_hops (100ns)")


def _add_sweep_flags(p):
    p.add_argument("--dims", help="torus shape, e.g. 8,8")
    p.add_argument("--algos", help="comma list or 'all' (default)")
    p.add_argument("--variants", help="comma list (default latency,bandwidth)")
    p.add_argument("--sizes", help="explicit comma list of sizes")
    p.add_argument("--min-size", help="smallest size (32B)")
    p.add_argument("--max-size", help="largest size (128MiB)")
    p.add_argument("--factor", type=int, help="multiplicative step (4)")
    p.add_argument("--auto-variant", action="store_true", default=None,
                   help="one row per algorithm and size with the faster variant")
    p.add_argument("--skip-verify", action="store_true", default=None)
    p.add_argument("--classic-singleport", action="store_true", default=None)
    p.add_argument("--bruck-routing", choices=["unidirectional", "shortest"])
    _add_cost_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trivance",
                                     description="AllReduce schedules on rings and tori")
    parser.add_argument("--config", help="JSON file with default flag values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a schedule as JSON")
    _add_schedule_flags(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("verify", help="replay a schedule and check AllReduce semantics")
    _add_schedule_flags(p, with_file=True)
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("cost", help="completion time with per-step breakdown")
    _add_schedule_flags(p, with_file=True)
    _add_cost_flags(p)
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("metrics", help="measured and reference optimality factors")
    _add_schedule_flags(p, with_file=True)
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("run", help="generate, verify, cost and measure one configuration")
    _add_schedule_flags(p)
    _add_cost_flags(p)
    p.add_argument("--skip-verify", action="store_true", default=None)
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="CSV over message sizes and algorithms")
    _add_sweep_flags(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="relative improvement of a baseline per size")
    _add_sweep_flags(p)
    p.add_argument("--baseline", help="algorithm to compare against (trivance)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_compare)
    return parser


def _load_config(path) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        args.config_values = _load_config(args.config)
        return args.func(args)
    except Unsupported as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (UsageError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrivanceError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
