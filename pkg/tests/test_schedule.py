import pytest

from trivance.errors import InvalidPeer, NotApplicable, Unsupported
from trivance.schedule import (ALGORITHMS, VARIANTS, block_propagation, bruck_peers,
                               dim_assignment, generate, local_step, recdoub_peer, supported,
                               swing_rho, trivance_block_set, trivance_final_distance,
                               trivance_peers, trivance_rho)
from trivance.schedule.patterns import ceil_log
from trivance.topology import Topology
from trivance.verify import check_ports


def test_trivance_rho():
    assert [trivance_rho(k) for k in (0, 1, 3)] == [1, 3, 27]


def test_trivance_peers():
    assert trivance_peers(0, 0, 9) == (8, 1)
    assert trivance_peers(0, 1, 9) == (6, 3)
    assert trivance_peers(5, 0, 9) == (4, 6)


def test_final_distance():
    assert trivance_final_distance(7) == 2
    assert trivance_final_distance(32) == 3
    assert trivance_final_distance(4) == 1
    with pytest.raises(NotApplicable):
        trivance_final_distance(27)


def test_block_propagation_examples():
    assert block_propagation(0, 0, 9) == set(range(1, 9))
    assert block_propagation(0, 1, 9) == {3, 6}
    assert block_propagation(0, 0, 3) == {1, 2}


def test_block_set_examples():
    assert trivance_block_set(9, 0, 1, 0) == {1, 4, 7}
    assert trivance_block_set(9, 0, 3, 1) == {3}
    for k in range(3):
        p = trivance_peers(5, k, 27)[1]
        assert len(trivance_block_set(27, 5, p, k)) == 3 ** (2 - k)
    with pytest.raises(InvalidPeer):
        trivance_block_set(9, 0, 2, 0)


def test_swing_rho():
    assert [swing_rho(k) for k in range(5)] == [1, -1, 3, -5, 11]


def test_recdoub_peer():
    assert recdoub_peer(0, 0) == 1
    assert recdoub_peer(5, 2) == 1
    assert recdoub_peer(3, 1) == 1
    with pytest.raises(Unsupported):
        recdoub_peer(0, 0, 9)


def test_bruck_peers():
    assert bruck_peers(0, 0, 9) == (1, 2)
    assert bruck_peers(0, 1, 9) == (3, 6)
    assert bruck_peers(8, 0, 9) == (0, 1)


def test_dim_assignment():
    assert dim_assignment(0, 0, 2) == 0 and dim_assignment(1, 0, 2) == 1
    assert dim_assignment(0, 1, 2) == 1
    assert dim_assignment(0, 2, 2) == 0 and 3 ** local_step(2, 2) == 3


@pytest.mark.parametrize("algo,variant,dims,steps", [
    ("trivance", "latency", [9], 2),
    ("recdoub", "latency", [8], 3),
    ("trivance", "bandwidth", [27], 6),
    ("trivance", "latency", [7], 2),
    ("bruck", "bandwidth", [9, 9], 8),
    ("swing", "latency", [4, 4], 4),
    ("swing", "bandwidth", [8, 8], 12),
    ("ring_bucket", "bandwidth", [8], 14),
    ("ring_bucket", "bandwidth", [4, 3], 2 * 2 * 3),
])
def test_step_counts(algo, variant, dims, steps):
    assert len(generate(algo, variant, Topology(dims), 1.0).steps) == steps


def test_trivance_bandwidth_payloads():
    s = generate("trivance", "bandwidth", Topology([27]), 27.0)
    assert s.phase_boundary == 3
    for k, (count, dist) in enumerate([(9, 1), (3, 3), (1, 9)]):
        sent = {m.dst: m for m in s.steps[k].messages if m.src == 0}
        assert set(sent) == {dist, 27 - dist}
        for m in sent.values():
            assert m.bytes == count
            assert sorted(m.blocks.owners(s.topo)) == sorted(
                trivance_block_set(27, 0, m.dst, k))


def test_latency_final_step_distance():
    s = generate("trivance", "latency", Topology([7]), 1.0)
    assert sorted(m.dst for m in s.steps[-1].messages if m.src == 0) == [2, 5]


def test_unsupported_combinations():
    with pytest.raises(Unsupported):
        generate("recdoub", "latency", Topology([9]), 1.0)
    with pytest.raises(Unsupported):
        generate("swing", "bandwidth", Topology([8, 6]), 1.0)
    with pytest.raises(Unsupported):
        generate("ring_bucket", "latency", Topology([8]), 1.0)
    assert not supported("recdoub", "latency", Topology([12]))
    assert supported("recdoub", "latency", Topology([16, 4]))


def test_bad_payload():
    with pytest.raises(ValueError):
        generate("trivance", "latency", Topology([9]), 0.0)


def test_single_node_has_no_steps():
    assert generate("trivance", "latency", Topology([1]), 1.0).steps == ()


@pytest.mark.parametrize("dims", [[9], [12], [8, 8], [3, 9, 2]])
def test_ports_respected(dims):
    t = Topology(dims)
    for algo in ALGORITHMS:
        for variant in VARIANTS:
            if supported(algo, variant, t):
                check_ports(generate(algo, variant, t, 1.0))


def test_trivance_latency_step_count_is_log3():
    for n in (2, 4, 10, 28, 100):
        s = generate("trivance", "latency", Topology([n]), 1.0)
        assert len(s.steps) == ceil_log(3, n)


def test_truncation_helpers():
    s = generate("trivance", "bandwidth", Topology([9]), 1.0)
    assert len(s.truncated(2).steps) == 2
    assert len(s.without_step(1).steps) == 3
