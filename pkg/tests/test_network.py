import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import SINGLE_ARC, random_instance
from netplan.network import (InstanceError, build_adjacency, generate_random_instance, nobel_us_topology,
                             parse_instance, parse_network, parse_sndlib_native, sample_costs, write_instance)


def test_minimal_instance():
    inst = parse_instance(SINGLE_ARC.format(u=5, c=3, phi=10))
    assert inst.n_commodities == 1
    assert len(inst.network.arcs) == 1
    arc = inst.network.arcs[0]
    assert (arc.base_capacity, arc.expansion_cost, inst.penalty) == (5.0, 3.0, 10.0)


@pytest.mark.parametrize("text, message", [
    ("NODES 2\ns\nt\nARCS 1\na s Z 1 1\nCOMMODITIES 1\n1 s t\n", "unknown node"),
    ("NODES 2\ns\nt\nARCS 1\na s t -1 1\nCOMMODITIES 1\n1 s t\n", "negative capacity"),
    ("NODES 2\ns\nt\nARCS 1\na s t 1 -2\nCOMMODITIES 1\n1 s t\n", "negative cost"),
    ("NODES 2\ns\nt\nARCS 2\na s t 1 1\na t s 1 1\nCOMMODITIES 1\n1 s t\n", "duplicate arc id"),
    ("NODES 2\ns\nt\nARCS 1\na s t 1 1\nCOMMODITIES 1\n1 s Z\n", "unknown node"),
    ("NODES 2\ns\nt\nARCS 1\na s t one 1\nCOMMODITIES 1\n1 s t\n", "expected a number"),
    ("NODES 2\ns\nt\nARCS 1\na s s 1 1\nCOMMODITIES 1\n1 s t\n", "self-loop"),
    ("NODES 2\ns\nt\nARCS 1\na s t 1 1\nCOMMODITIES 1\n1 s t\nPENALTY 0\n", "penalty"),
    ("NODES 2\ns\nt\nARCS 3\na s t 1 1\n", "file ended"),
    ("NODES 2\ns\nt\nARCS 1\na s t 1 1\n", "missing COMMODITIES"),
])
def test_parse_errors(text, message):
    with pytest.raises(InstanceError, match=message):
        parse_instance(text)


def test_error_carries_line_number():
    text = "# header\nNODES 2\ns\nt\nARCS 1\na s Z 1 1\nCOMMODITIES 1\n1 s t\n"
    with pytest.raises(InstanceError) as err:
        parse_instance(text)
    assert err.value.line == 6
    assert "line 6" in str(err.value)


def test_comments_and_default_penalty():
    inst = parse_instance("NODES 2 # two\ns\nt\n\nARCS 1\na s t 0 2.5  # arc\nCOMMODITIES 1\nk s t\n")
    assert inst.penalty == 130.0
    assert inst.commodities[0].id == "k"


def test_nobel_us_shaped_file():
    inst = generate_random_instance(nobel_us_topology(), 20, rng_seed=5)
    again = parse_instance(write_instance(inst))
    assert len(again.network.nodes) == 14
    assert len(again.network.arcs) == 42
    assert again.n_commodities == 20


def test_round_trip_minimal():
    inst = parse_instance(SINGLE_ARC.format(u=5, c=3, phi=10))
    assert parse_instance(write_instance(inst)) == inst


def test_fractional_cost_precision():
    inst = parse_instance(SINGLE_ARC.format(u=0.1, c=38.5, phi=130))
    text = write_instance(inst)
    assert "38.5" in text
    inst2 = parse_instance(SINGLE_ARC.format(u=1, c=38.123456789123, phi=130))
    assert parse_instance(write_instance(inst2)).network.arcs[0].expansion_cost == 38.123456789123


def test_arc_lines_in_order():
    inst = generate_random_instance(nobel_us_topology(), 3, rng_seed=1)
    lines = write_instance(inst).splitlines()
    start = lines.index("ARCS 42") + 1
    arc_lines = lines[start:start + 42]
    assert [ln.split()[0] for ln in arc_lines] == inst.network.arc_ids
    assert sum(1 for ln in lines if ln.split()[0] in set(inst.network.arc_ids)) == 42


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_round_trip_random(seed):
    inst = random_instance(np.random.default_rng(seed))
    again = parse_instance(write_instance(inst))
    assert again == inst
    assert again.network.arcs == inst.network.arcs


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_adjacency_rebuild(seed):
    inst = parse_instance(write_instance(random_instance(np.random.default_rng(seed))))
    net = inst.network
    incoming, outgoing = build_adjacency(net.nodes, net.arcs)
    assert incoming == net.incoming and outgoing == net.outgoing
    for j, arc in enumerate(net.arcs):
        assert j in net.outgoing[arc.tail] and j in net.incoming[arc.head]


def test_generate_deterministic():
    topo = nobel_us_topology()
    assert generate_random_instance(topo, 20, 9) == generate_random_instance(topo, 20, 9)
    assert generate_random_instance(topo, 20, 9) != generate_random_instance(topo, 20, 10)


def test_generate_pairs_distinct_and_costs_positive():
    inst = generate_random_instance(nobel_us_topology(), 182, 2)
    pairs = {(c.source, c.sink) for c in inst.commodities}
    assert len(pairs) == 182
    assert (inst.network.costs > 0).all()
    assert inst.penalty == 130.0


def test_generate_too_many_commodities():
    topo = nobel_us_topology()
    n = len(topo.nodes)
    with pytest.raises(InstanceError, match="exceeds"):
        generate_random_instance(topo, n * (n - 1) + 1, 0)


def test_cost_distribution_band():
    costs = sample_costs(np.random.default_rng(11), 10_000)
    assert abs(costs.mean() - 40.0) <= 0.2
    assert abs(costs.std() - 6.0) <= 0.2
    assert (costs > 0).all()


def test_negative_cost_draws_are_redrawn():
    costs = sample_costs(np.random.default_rng(0), 5_000, mean=1.0, variance=4.0)
    assert (costs > 0).all()


def test_parse_network_without_commodities():
    net = parse_network("NODES 3\na\nb\nc\nARCS 2\nx a b 0 1\ny b c 0 1\n")
    assert net.arc_ids == ["x", "y"]


SNDLIB = """\
?SNDlib native format; type: network; version: 1.0
# network nobel-us-like

NODES (
  A ( -122.0 37.0 )
  B ( -117.0 32.0 )
  C ( -104.0 40.0 )
)

LINKS (
  L1 ( A B ) 5.00 0.00 0.00 0.00 ( 1000.00 40000.00 )
  L2 ( B C ) 0.00 0.00 0.00 0.00 ( 100.00 3850.00 )
)

DEMANDS (
  D1 ( A C ) 1 12.00 UNLIMITED
)
"""


def test_sndlib_import():
    net = parse_sndlib_native(SNDLIB)
    assert net.nodes == ("A", "B", "C")
    assert net.arc_ids == ["L1+", "L1-", "L2+", "L2-"]
    a = net.arcs
    assert (a[0].tail, a[0].head, a[1].tail, a[1].head) == ("A", "B", "B", "A")
    assert a[0].base_capacity == 5.0 and a[0].expansion_cost == 40.0
    assert a[2].base_capacity == 0.0 and a[2].expansion_cost == pytest.approx(38.5)
