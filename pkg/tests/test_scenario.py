import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentic_sagin.config import ScenarioConfig
from agentic_sagin.scenario import (
    NodeKind,
    RelayClass,
    build_scenario,
    enumerate_discrete_actions,
    generate_tasks,
)


def test_default_world_layout(world):
    kinds = [n.kind for n in world.nodes]
    assert len(kinds) == 10
    assert kinds == [NodeKind.UAV] * 5 + [NodeKind.LEO_SATELLITE] * 3 + [NodeKind.GROUND_BASE_STATION] * 2
    assert [n.id for n in world.nodes] == list(range(10))
    assert world.nodes[0].energy_fraction == 0.25
    assert world.nodes[1].energy_fraction == 0.80
    assert world.obs_dim == 22 and world.action_dim == 12


def test_degenerate_world_without_uavs():
    cfg = ScenarioConfig(n_uav=0, uav_energies=(), task_count=0)
    w = build_scenario(cfg)
    assert w.n_nodes == 5
    assert list(w.uav_ids) == []
    assert generate_tasks(3, cfg) == []


def test_build_is_pure():
    assert build_scenario() == build_scenario()


def test_catalogue_sizes(world):
    cat = enumerate_discrete_actions(world)
    assert len(cat) == 5 * 2 + 2 * 2 + 3 * 2 * 2
    assert cat[0].processing_node == 0 and cat[0].power == 1.0
    assert cat[1].power == 2.0
    sat0 = [e for e in cat if e.processing_node == 5]
    assert [(e.relay_class, e.power) for e in sat0] == [
        (RelayClass.GROUND, 1.0), (RelayClass.GROUND, 2.0), (RelayClass.UAV, 1.0), (RelayClass.UAV, 2.0)
    ]
    one = build_scenario(ScenarioConfig(n_uav=1, n_sat=0, n_ground=0, uav_energies=(0.5,)))
    assert len(enumerate_discrete_actions(one)) == 2
    empty = build_scenario(ScenarioConfig(n_uav=0, n_sat=0, n_ground=0, uav_energies=()))
    assert enumerate_discrete_actions(empty) == []


def test_tasks_deterministic():
    cfg = ScenarioConfig()
    a = generate_tasks(42, cfg)
    assert len(a) == 50
    assert a == generate_tasks(42, cfg)
    assert a != generate_tasks(43, cfg)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(0, 80))
def test_task_fields_in_range(seed, n):
    cfg = ScenarioConfig(task_count=n)
    tasks = generate_tasks(seed, cfg)
    assert len(tasks) == n
    for t in tasks:
        assert cfg.data_in_range[0] <= t.data_in <= cfg.data_in_range[1]
        assert cfg.compute_range[0] <= t.compute_demand <= cfg.compute_range[1]
        assert cfg.result_range[0] <= t.result_out <= cfg.result_range[1]
        assert t.deadline == 2000.0


@settings(max_examples=50, deadline=None)
@given(nu=st.integers(0, 6), ns=st.integers(0, 4), ng=st.integers(0, 4))
def test_canonical_order_any_counts(nu, ns, ng):
    cfg = ScenarioConfig(n_uav=nu, n_sat=ns, n_ground=ng, uav_energies=(0.5,) * nu)
    w = build_scenario(cfg)
    order = {NodeKind.UAV: 0, NodeKind.LEO_SATELLITE: 1, NodeKind.GROUND_BASE_STATION: 2}
    ranks = [order[n.kind] for n in w.nodes]
    assert ranks == sorted(ranks)
    assert len(enumerate_discrete_actions(w)) == 2 * nu + 2 * ng + 4 * ns
    assert w.action_dim == nu + ns + ng + 2
