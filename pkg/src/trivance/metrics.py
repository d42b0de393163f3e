"""Optimality factors: measured from schedules, and reference values.

* lambda = steps / ceil(log3 n)
* delta  = max bytes sent by any node / 2m
* theta  = sum over steps of the busiest link's bytes / (m / D)

Reference values come in two flavours: exact sums for the finite size
(what a generated schedule must hit) and the large-n asymptote.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .cost import profile
from .errors import Unsupported
from .schedule.model import BANDWIDTH, LATENCY, Schedule
from .schedule.patterns import ceil_log, is_power_of, swing_rho
from .topology import Topology


@dataclass
class Factors:
    lam: float
    delta: float
    theta: float

    def as_tuple(self):
        return self.lam, self.delta, self.theta


@dataclass
class OptimalityReport:
    algo: str
    variant: str
    dims: tuple[int, ...]
    measured: Factors
    exact: Factors | None = None
    asymptote: Factors | None = None
    relative_error: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"algo": self.algo, "variant": self.variant, "dims": list(self.dims),
               "measured": vars(self.measured)}
        if self.exact is not None:
            out["exact"] = vars(self.exact)
        if self.asymptote is not None:
            out["asymptote"] = vars(self.asymptote)
        out["relative_error"] = self.relative_error
        return out


def _rel(measured: float, ref: float | None) -> float | None:
    if ref is None or ref == 0:
        return None
    return abs(measured - ref) / abs(ref)


def measured_factors(schedule: Schedule, topo: Topology | None = None,
                     with_references: bool = True) -> OptimalityReport:
    topo = schedule.topo if topo is None else topo
    n, m = topo.n, schedule.m
    opt_steps = ceil_log(3, n)
    lam = len(schedule.steps) / opt_steps if opt_steps else 0.0
    delta = float(schedule.bytes_sent_per_node().max()) / (2 * m) if n > 1 else 0.0
    theta = float(profile(schedule).max_link_bytes.sum()) / (m / topo.D)
    report = OptimalityReport(schedule.algo, schedule.variant, topo.dims,
                              Factors(lam, delta, theta))
    if with_references:
        single = bool(schedule.options.get("classic_singleport"))
        try:
            if topo.D == 1:
                exact, asym = reference_factors_ring(schedule.algo, schedule.variant, n,
                                                     single_port=single)
            elif len(set(topo.dims)) == 1:
                t_exact, t_asym = reference_theta_torus(schedule.algo, schedule.variant,
                                                        topo.D, n, single_port=single)
                exact = Factors(math.nan, math.nan, t_exact)
                asym = Factors(math.nan, math.nan, t_asym)
            else:
                exact = asym = None
        except Unsupported:
            exact = asym = None
        report.exact, report.asymptote = exact, asym
        if exact is not None:
            report.relative_error = {
                name: _rel(getattr(report.measured, name), getattr(exact, name))
                for name in ("lam", "delta", "theta")
                if not math.isnan(getattr(exact, name))}
    return report


# -- ring references -----------------------------------------------------------

def _swing_terms(steps: int):
    return [abs(swing_rho(k)) for k in range(steps)]


def reference_factors_ring(algo: str, variant: str, n: int,
                           single_port: bool | None = None) -> tuple[Factors, Factors]:
    """(exact, asymptotic) factors on a ring of ``n`` nodes.

    Latency-variant Recursive Doubling and Swing default to the classic
    single-port form (one collective, full vector); ``single_port=False``
    gives the mirrored two-collective form, which halves Theta.
    """
    variant = LATENCY if variant.lower() in ("l", LATENCY) else BANDWIDTH
    if n < 2:
        raise Unsupported("references need at least two nodes")
    s3 = ceil_log(3, n)
    log3 = math.log(n, 3)
    log2 = math.log2(n)
    lat = variant == LATENCY
    bw_delta = (n - 1) / n

    if algo in ("trivance", "bruck"):
        if not is_power_of(3, n):
            raise Unsupported(f"exact sums need a power-of-three ring, got {n}")
        scale = 3 if algo == "bruck" else 1
        if lat:
            exact = Factors(1.0, float(s3), scale * (n - 1) / 2)
            asym = Factors(1.0, log3, scale * n / 2)
        else:
            exact = Factors(2.0, bw_delta, scale * 2 * s3 / 3)
            asym = Factors(2.0, 1.0, scale * 2 * log3 / 3)
        return exact, asym

    if algo in ("recdoub", "swing"):
        if not is_power_of(2, n):
            raise Unsupported(f"exact sums need a power-of-two ring, got {n}")
        s2 = ceil_log(2, n)
        single = True if single_port is None else single_port
        if lat:
            if algo == "recdoub":
                theta = float(n - 1) if single else (n - 1) / 2
                theta_asym = float(n) if single else n / 2
            else:
                rho = _swing_terms(s2)
                # half the nodes go each way, so a link sees ceil(rho/2) messages
                theta = float(sum(-(-r // 2) for r in rho)) if single else sum(rho) / 2
                theta_asym = n / 3 if single else n / 3
            exact = Factors(s2 / s3, s2 / 2, theta)
            asym = Factors(math.log2(3), log2 / 2, theta_asym)
        else:
            if algo == "recdoub":
                theta, theta_asym = s2 / 2, log2 / 2
            else:
                theta = sum(r / 2 ** (k + 1) for k, r in enumerate(_swing_terms(s2)))
                theta_asym = log2 / 3
            exact = Factors(2 * s2 / s3, bw_delta, theta)
            asym = Factors(2 * math.log2(3), 1.0, theta_asym)
        return exact, asym

    if algo == "ring_bucket":
        if lat:
            raise Unsupported("ring_bucket only has a bandwidth-optimal variant")
        exact = Factors(2 * (n - 1) / s3, bw_delta, (n - 1) / n)
        asym = Factors(2 * n / log3, 1.0, 1.0)
        return exact, asym
    raise Unsupported(f"no reference for {algo!r}")


# -- torus references ------------------------------------------------------------

def _per_dim(n: int, D: int) -> int:
    a = round(n ** (1 / D))
    for cand in (a - 1, a, a + 1):
        if cand >= 1 and cand ** D == n:
            return cand
    raise Unsupported(f"{n} nodes do not form a {D}-dimensional square torus")


def reference_theta_torus(algo: str, variant: str, D: int, n: int | None = None,
                          single_port: bool | None = None) -> tuple[float, float]:
    """(exact, asymptotic) Theta on a torus of ``D`` equal dimensions.

    ``n`` is the total node count; ``None`` returns the asymptote for both.
    Latency sums are per collective in units of m, scaled by D for the
    m/D normalisation.
    """
    variant = LATENCY if variant.lower() in ("l", LATENCY) else BANDWIDTH
    lat = variant == LATENCY
    if D < 1:
        raise Unsupported("need at least one dimension")
    if algo == "ring_bucket" and lat:
        raise Unsupported("ring_bucket only has a bandwidth-optimal variant")

    if lat:
        coef = {"recdoub": D * D, "swing": D * D / 3, "bruck": 3 * D / 2, "trivance": D / 2}
        if algo not in coef:
            raise Unsupported(f"no reference for {algo!r}")
        asym_of = lambda a: coef[algo] * a
    else:
        closed = {
            "ring_bucket": 1.0,
            "swing": 2 ** D * (2 ** D - 1) / ((2 ** D - 2) * (2 ** D + 1)) if D > 1 else math.inf,
            "trivance": (3 ** D - 1) / (3 ** D - 3) if D > 1 else math.inf,
            "recdoub": (2 ** D - 1) / (2 ** D - 2) if D > 1 else math.inf,
            "bruck": 3 * (3 ** D - 1) / (3 ** D - 3) if D > 1 else math.inf,
        }
        if algo not in closed:
            raise Unsupported(f"no reference for {algo!r}")
        asym_of = lambda a: closed[algo]

    if n is None:
        if lat:
            raise Unsupported("latency asymptotes grow with n; pass a size")
        return asym_of(None), asym_of(None)

    a = _per_dim(n, D)
    asym = asym_of(a)
    if algo in ("trivance", "bruck"):
        if not is_power_of(3, a):
            raise Unsupported(f"exact sums need power-of-three dimensions, got {a}")
        K = ceil_log(3, a)
        scale = 3 if algo == "bruck" else 1
        if lat:
            exact = D * scale * sum(3 ** k for k in range(K))
        else:
            exact = 2 * scale * sum(3 ** k / 3 ** (1 + d + D * k)
                                    for d in range(D) for k in range(K))
        return float(exact), asym
    if algo in ("recdoub", "swing"):
        if not is_power_of(2, a):
            raise Unsupported(f"exact sums need power-of-two dimensions, got {a}")
        K = ceil_log(2, a)
        single = True if single_port is None else single_port
        rho = [2 ** k for k in range(K)] if algo == "recdoub" else _swing_terms(K)
        if lat:
            if algo == "recdoub":
                per_dim = sum(rho) if single else sum(rho) / 2
            else:
                per_dim = sum(-(-r // 2) for r in rho) if single else sum(rho) / 2
            # single port: one collective walks the D dimensions in turn
            exact = D * D * per_dim if single else D * per_dim
        else:
            exact = sum(r / 2 ** (1 + d + D * k) for d in range(D) for k, r in enumerate(rho))
        return float(exact), asym
    # bucket: (a - 1) steps per phase, block shrinking by a per phase, both phases
    return (n - 1) / n, asym
