import numpy as np
import pytest

from trivance.cost import (EQ1_PLUS_HOPS, CostParams, beta_from_gbps, completion_time,
                           format_size, link_loads, parse_bandwidth, parse_size, parse_time,
                           profile, representative_profile, step_time)
from trivance.schedule import BlockSet, Message, Step, generate
from trivance.topology import DirectedLink, Topology

MIB = 2 ** 20
PAPER = CostParams(alpha=1.5e-6, beta=1e-11)


def test_beta_conversion():
    assert beta_from_gbps(800) == pytest.approx(1e-11, rel=1e-12)


def test_unit_parsing():
    assert parse_time("1.5us") == pytest.approx(1.5e-6)
    assert parse_time("100ns") == pytest.approx(1e-7)
    assert parse_time("2") == 2.0
    assert parse_size("32KiB") == 32768
    assert parse_size("1MiB") == MIB
    assert parse_size(64) == 64
    assert parse_bandwidth("800Gbps") == 800
    assert parse_bandwidth("1.6Tbps") == pytest.approx(1600)
    assert format_size(128 * MIB) == "128MiB" and format_size(100) == "100B"
    with pytest.raises(ValueError):
        parse_size("3 parsecs")
    with pytest.raises(ValueError):
        parse_size("0.5B")


def test_negative_params_rejected():
    with pytest.raises(ValueError):
        CostParams(alpha=-1.0)
    with pytest.raises(ValueError):
        CostParams(mode="bogus")


def test_trivance_latency_step1_loads_are_uniform():
    m = 1000.0
    s = generate("trivance", "latency", Topology([9]), m)
    loads = link_loads(s.steps[1], s.topo)
    assert np.allclose(loads.loads, 3 * m)


def test_trivance_bandwidth_step1_ring27():
    m = 2700.0
    s = generate("trivance", "bandwidth", Topology([27]), m)
    assert np.allclose(link_loads(s.steps[1], s.topo).loads, m / 3)


def test_single_message_load():
    t = Topology([9])
    step = Step(0, (Message(0, 1, 0, 5.0, BlockSet(0, explicit=(0,))),))
    lm = link_loads(step, t)
    assert lm[DirectedLink(0, 1, 0)] == 5.0
    assert lm.loads.sum() == 5.0
    assert list(lm.items()) == [(DirectedLink(0, 1, 0), 5.0)]
    with pytest.raises(ValueError):
        lm[DirectedLink(0, 2, 0)]


def test_step_time_examples():
    s = generate("trivance", "latency", Topology([9]), float(MIB))
    t0 = step_time(s.steps[0], s.topo, PAPER)
    assert t0 == pytest.approx(1.5e-6 + 1.048576e-5, rel=1e-12)
    assert step_time(Step(0, ()), s.topo, PAPER) == PAPER.alpha
    hop_params = CostParams(1.5e-6, 1e-11, 100e-9, 100e-9, EQ1_PLUS_HOPS)
    assert step_time(s.steps[0], s.topo, hop_params) == pytest.approx(t0 + 2e-7, rel=1e-12)


def test_completion_time_trivance_ring9():
    s = generate("trivance", "latency", Topology([9]), float(MIB))
    report = completion_time(s, params=PAPER)
    assert report.total_seconds == pytest.approx(2 * 1.5e-6 + 1e-11 * 4 * MIB, rel=1e-12)
    assert report.total_seconds == pytest.approx(4.494e-5, rel=1e-3)
    assert report.steps_count == 2
    assert [r.max_link_bytes for r in report.steps] == [MIB, 3 * MIB]


def test_tiny_payload_costs_only_latency():
    s = generate("swing", "bandwidth", Topology([8, 8]), 1e-30)
    total = completion_time(s, params=PAPER).total_seconds
    assert total == pytest.approx(len(s.steps) * PAPER.alpha, rel=1e-12)


def test_bucket_ring8():
    m = 8.0
    s = generate("ring_bucket", "bandwidth", Topology([8]), m)
    report = completion_time(s, params=PAPER)
    assert report.steps_count == 14
    assert all(r.max_link_bytes == pytest.approx(m / 16) for r in report.steps)
    assert report.total_seconds == pytest.approx(14 * 1.5e-6 + 1e-11 * 14 * m / 16)


def test_step_time_at_least_alpha():
    s = generate("bruck", "bandwidth", Topology([10]), 100.0)
    assert all(r.step_time_seconds >= PAPER.alpha
               for r in completion_time(s, params=PAPER).steps)


def test_profile_rescales_linearly():
    s = generate("trivance", "bandwidth", Topology([9, 3]), 1.0)
    big = generate("trivance", "bandwidth", Topology([9, 3]), 4096.0)
    assert profile(s).total(PAPER, 4096.0) == pytest.approx(
        completion_time(big, params=PAPER).total_seconds, rel=1e-12)


@pytest.mark.parametrize("algo,variant,dims", [
    ("trivance", "bandwidth", [27, 9]),
    ("trivance", "latency", [10, 4]),
    ("bruck", "bandwidth", [9, 9]),
    ("ring_bucket", "bandwidth", [5, 4, 3]),
])
def test_representative_profile_matches_full(algo, variant, dims):
    t = Topology(dims)
    full = profile(generate(algo, variant, t, 1.0))
    rep = representative_profile(generate(algo, variant, t, 1.0, sources=[0]))
    assert np.allclose(full.max_link_bytes, rep.max_link_bytes, rtol=1e-12)
    assert np.array_equal(full.hop_count_max, rep.hop_count_max)


def test_representative_profile_rejects_irregular_algorithms():
    with pytest.raises(ValueError):
        representative_profile(generate("recdoub", "bandwidth", Topology([8]), 1.0))
