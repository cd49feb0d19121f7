import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentic_sagin.allocator import DemandSet, allocate, certify_qos, demands_for, task_latency
from agentic_sagin.env import PlacementDecision, latency
from agentic_sagin.scenario import Task, build_scenario

WORLD = build_scenario()
UAV_LINK = ("user", "uav")


def test_examples(world):
    a = allocate(DemandSet(links={(0, UAV_LINK): [("t", 5.0)]}), world)
    assert a.link_rates[(0, UAV_LINK)] == {"t": 50.0}
    a = allocate(DemandSet(nodes={8: [("a", 1.0), ("b", 3.0)]}), world)
    assert a.compute_rates[8] == {"a": 5.0, "b": 15.0}
    empty = allocate(DemandSet(), world)
    assert empty.link_rates == {} and empty.compute_rates == {}


def test_certify_matches_simulator(world):
    task = Task(0, 5.0, 2.0, 25.0, 2000.0)
    d = PlacementDecision(1, 1, 2.0)
    alloc = allocate(demands_for(world, [(task, d)]), world)
    assert task_latency(alloc, 0) == pytest.approx(1002.0)
    assert task_latency(alloc, 0) == pytest.approx(latency(world, (0.0,) * 10, task, d))
    assert certify_qos(alloc, [task]) == [(0, True)]
    tight = Task(0, 5.0, 2.0, 25.0, 500.0)
    assert certify_qos(alloc, [tight]) == [(0, False)]
    assert certify_qos(allocate(DemandSet(), world), []) == []
    with pytest.raises(KeyError):
        certify_qos(alloc, [])


def test_single_task_satellite_path_matches_simulator(world):
    task = Task(3, 4.0, 3.0, 30.0, 2000.0)
    for d in (PlacementDecision(6, 9, 1.0), PlacementDecision(5, 2, 1.0), PlacementDecision(9, 9, 1.0)):
        alloc = allocate(demands_for(world, [(task, d)]), world)
        assert task_latency(alloc, 3) == pytest.approx(latency(world, (0.0,) * 10, task, d))


def test_demand_validation():
    with pytest.raises(ValueError):
        DemandSet(nodes={0: [("a", 1.0), ("a", 2.0)]})
    with pytest.raises(ValueError):
        DemandSet(nodes={0: [("a", 0.0)]})


link_keys = st.sampled_from([(0, UAV_LINK), (3, UAV_LINK), (8, ("user", "ground")), (6, ("access", "satellite"))])
demands = st.lists(st.floats(0.01, 100), min_size=0, max_size=8)


@st.composite
def demand_sets(draw):
    links = {}
    for key in draw(st.lists(link_keys, unique=True, max_size=4)):
        links[key] = [(i, v) for i, v in enumerate(draw(demands))]
    nodes = {}
    for node in draw(st.lists(st.integers(0, 9), unique=True, max_size=5)):
        nodes[node] = [(i, v) for i, v in enumerate(draw(demands))]
    return DemandSet(links, nodes)


@settings(max_examples=1000, deadline=None)
@given(ds=demand_sets())
def test_conservation(ds):
    alloc = allocate(ds, WORLD)
    for key, rates in alloc.link_rates.items():
        cap = alloc.link_capacity(key)
        assert sum(rates.values()) <= cap * (1 + 1e-12)
        if rates:
            assert sum(rates.values()) == pytest.approx(cap, rel=1e-12)
    for node, rates in alloc.compute_rates.items():
        cap = alloc.node_capacity(node)
        assert sum(rates.values()) <= cap * (1 + 1e-12)
        if rates:
            assert sum(rates.values()) == pytest.approx(cap, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(ds=demand_sets(), c=st.floats(0.01, 100))
def test_scale_equivariance(ds, c):
    scaled = DemandSet(ds.links, {n: [(t, v * c) for t, v in e] for n, e in ds.nodes.items()})
    a, b = allocate(ds, WORLD), allocate(scaled, WORLD)
    for node, rates in a.compute_rates.items():
        for t, r in rates.items():
            assert b.compute_rates[node][t] == pytest.approx(r, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(ds=demand_sets(), data=st.data())
def test_permutation_equivariance(ds, data):
    perm_nodes = {n: data.draw(st.permutations(e)) for n, e in ds.nodes.items()}
    perm_links = {k: data.draw(st.permutations(e)) for k, e in ds.links.items()}
    a = allocate(ds, WORLD)
    b = allocate(DemandSet(perm_links, perm_nodes), WORLD)
    for node, rates in a.compute_rates.items():
        for t, r in rates.items():
            assert b.compute_rates[node][t] == pytest.approx(r, rel=1e-12)
    assert a.link_rates == b.link_rates
