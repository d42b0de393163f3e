from dataclasses import replace

import numpy as np
import pytest

from trivance.errors import ExactlyOnceViolation, PhantomContribution, PortViolation
from trivance.schedule import ALGORITHMS, VARIANTS, BlockSet, Message, Step, generate, supported
from trivance.topology import Topology
from trivance.verify import (check_allreduce, check_ports, check_reduce_scatter,
                             coverage_radius, simulate)


def gen(algo, variant, dims, m=1.0, **kw):
    return generate(algo, variant, Topology(dims), m, **kw)


def with_step(sched, k, messages):
    steps = list(sched.steps)
    steps[k] = Step(steps[k].k, tuple(messages))
    return replace(sched, steps=tuple(steps))


def test_trivance_latency_ring9_states():
    s = gen("trivance", "latency", [9])
    assert simulate(s, steps=1).origins(0) == {8, 0, 1}
    assert simulate(s, steps=2).origins(0) == set(range(9))


def test_single_node_is_complete():
    state = simulate(gen("trivance", "latency", [1]))
    assert state.steps_replayed == 0
    assert check_allreduce(state).passed


def test_allreduce_examples():
    assert check_allreduce(simulate(gen("trivance", "latency", [27])))
    assert check_allreduce(simulate(gen("bruck", "latency", [9])))


def test_truncated_reports_missing_origins():
    report = check_allreduce(simulate(gen("trivance", "latency", [27]), steps=2))
    assert not report.passed
    # after two steps every node sees exactly the 9 origins within distance 4
    for node, _, _, origin in report.missing:
        d = min((origin - node) % 27, (node - origin) % 27)
        assert d > 4


def test_reduce_scatter_examples():
    s = gen("trivance", "bandwidth", [9])
    assert check_reduce_scatter(simulate(s))
    assert check_reduce_scatter(simulate(gen("ring_bucket", "bandwidth", [8])))
    assert not check_reduce_scatter(simulate(s.without_step(0)))


def test_dropping_any_step_breaks_allreduce():
    s = gen("trivance", "bandwidth", [9])
    for k in range(len(s.steps)):
        assert not check_allreduce(simulate(s.without_step(k))).passed


def test_coverage_radius_examples():
    s = gen("trivance", "latency", [81])
    for steps, radius in [(1, 1), (2, 4), (3, 13)]:
        cov = coverage_radius(simulate(s, steps=steps))
        assert {c.radius for c in cov} == {radius}
        assert all(c.contiguous for c in cov)


def test_duplicate_message_is_double_reduction():
    s = gen("trivance", "latency", [9])
    msgs = list(s.steps[1].messages)
    # re-send step 0's neighbour contribution at step 1
    extra = Message(1, 0, 0, 1.0, BlockSet(0, explicit=(1,)))
    bad = with_step(s, 1, [m for m in msgs if m.dst != 0 or m.src != 3] + [extra])
    with pytest.raises(ExactlyOnceViolation) as info:
        simulate(bad, ports=False)
    assert info.value.node == 0 and info.value.origin == 1


def test_forwarding_unheld_data_is_phantom():
    s = gen("trivance", "latency", [9])
    msgs = [m for m in s.steps[0].messages if m.src != 0]
    msgs.append(Message(0, 1, 0, 1.0, BlockSet(0, explicit=(0, 5))))
    with pytest.raises(PhantomContribution):
        simulate(with_step(s, 0, msgs))


def test_port_violation():
    s = gen("trivance", "latency", [9])
    msgs = list(s.steps[0].messages) + [Message(0, 2, 0, 1.0, BlockSet(0, explicit=(0,)))]
    with pytest.raises(PortViolation):
        check_ports(with_step(s, 0, msgs))


def test_strict_ports_need_distinct_directions():
    s = gen("trivance", "latency", [9])
    check_ports(s, strict=True)
    # two sends leaving through the same port
    bad = with_step(s, 0, [Message(0, 1, 0, 1.0, BlockSet(0, explicit=(0,))),
                           Message(0, 2, 0, 1.0, BlockSet(0, explicit=(0,)))])
    check_ports(bad)
    with pytest.raises(PortViolation):
        check_ports(bad, strict=True)


def test_left_and_right_contributions_are_disjoint():
    n = 27
    s = gen("trivance", "latency", [n])
    for k in range(1, 3):
        before = simulate(s, steps=k)
        for r in range(n):
            left, right = (r - 3 ** k) % n, (r + 3 ** k) % n
            a, b, own = before.origins(left), before.origins(right), before.origins(r)
            assert not (a & b) and not (a & own) and not (b & own)


@pytest.mark.parametrize("dims", [[9], [8], [10], [4, 4], [9, 3]])
def test_backends_agree(dims):
    t = Topology(dims)
    for algo in ALGORITHMS:
        for variant in VARIANTS:
            if not supported(algo, variant, t):
                continue
            s = generate(algo, variant, t, 1.0)
            for steps in (len(s.steps) - 1, None):
                base = simulate(s, steps=steps, backend="exact")
                for backend in ("translation", "fingerprint"):
                    other = simulate(s, steps=steps, backend=backend)
                    for c in range(s.collectives):
                        assert np.array_equal(base.slot_complete(c), other.slot_complete(c))


def test_translation_backend_reconstructs_origins():
    s = gen("trivance", "bandwidth", [9])
    full = simulate(s, steps=4, backend="exact")
    reduced = simulate(s, steps=4, backend="translation")
    assert reduced.group(0) is not None
    for node in range(9):
        for slot in range(9):
            assert reduced.origins(node, 0, slot) == full.origins(node, 0, slot)


def test_fingerprint_flags_double_reduction():
    # counts only overflow late; otherwise the hashes never reach the target
    s = gen("trivance", "latency", [9])
    extra = Message(1, 0, 0, 1.0, BlockSet(0, explicit=(1,)))
    msgs = [m for m in s.steps[1].messages if m.dst != 0 or m.src != 3] + [extra]
    try:
        state = simulate(with_step(s, 1, msgs), backend="fingerprint", ports=False)
    except ExactlyOnceViolation:
        return
    assert not check_allreduce(state).passed
