"""Topology, node/link/task data model and the case-study scenario."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .config import LinkSpec, ScenarioConfig


class NodeKind(enum.Enum):
    LEO_SATELLITE = "leo_satellite"
    UAV = "uav"
    GROUND_BASE_STATION = "ground_base_station"


class RelayClass(enum.IntEnum):
    """Which kind of access node relays traffic to a satellite."""

    GROUND = 0
    UAV = 1


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    compute_capacity: float
    # None means "not tracked" (satellites and ground stations).
    energy_fraction: float | None = None
    backlog: float = 0.0


@dataclass(frozen=True)
class Link:
    endpoints: tuple[str, str]
    rate: float  # Mb/s
    propagation_delay: float  # ms


@dataclass(frozen=True)
class Task:
    id: int
    data_in: float  # Mb
    compute_demand: float  # gigacycles
    result_out: float  # Mb
    deadline: float  # ms


class CatalogueEntry(NamedTuple):
    """One discrete action: where to process, how to relay, at which power."""

    processing_node: int
    relay_class: RelayClass | None
    power: float


@dataclass(frozen=True)
class World:
    nodes: tuple[Node, ...]
    links: dict[tuple[str, str], Link]
    config: ScenarioConfig

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def uav_ids(self) -> range:
        return range(0, self.config.n_uav)

    @property
    def sat_ids(self) -> range:
        return range(self.config.n_uav, self.config.n_uav + self.config.n_sat)

    @property
    def ground_ids(self) -> range:
        start = self.config.n_uav + self.config.n_sat
        return range(start, start + self.config.n_ground)

    def kind(self, node_id: int) -> NodeKind:
        return self.nodes[node_id].kind

    def capacity(self, node_id: int) -> float:
        return self.nodes[node_id].compute_capacity

    def access_link(self, node_id: int) -> Link:
        """User-facing link of an access node (UAV or ground station)."""
        kind = self.nodes[node_id].kind
        if kind is NodeKind.UAV:
            return self.links[("user", "uav")]
        if kind is NodeKind.GROUND_BASE_STATION:
            return self.links[("user", "ground")]
        raise ValueError(f"node {node_id} ({kind.value}) cannot serve as an access node")

    def backhaul_link(self, processing_id: int) -> Link:
        kind = self.nodes[processing_id].kind
        if kind is NodeKind.LEO_SATELLITE:
            return self.links[("access", "satellite")]
        return self.links[("access", "ground_edge")]

    # Observation/action layout sizes follow from the node counts.
    @property
    def obs_dim(self) -> int:
        return 3 + self.config.n_uav + self.n_nodes + 3 + 1

    @property
    def action_dim(self) -> int:
        return self.n_nodes + 2


def _link(endpoints: tuple[str, str], spec: LinkSpec) -> Link:
    return Link(endpoints, float(spec.rate_mbps), float(spec.prop_ms))


def build_scenario(config: ScenarioConfig | None = None) -> World:
    """Build the world in canonical node order: UAVs, satellites, ground stations."""
    config = config or ScenarioConfig()
    nodes: list[Node] = []
    for energy in config.uav_energies:
        nodes.append(Node(len(nodes), NodeKind.UAV, config.uav_capacity, float(energy)))
    for _ in range(config.n_sat):
        nodes.append(Node(len(nodes), NodeKind.LEO_SATELLITE, config.sat_capacity))
    for _ in range(config.n_ground):
        nodes.append(Node(len(nodes), NodeKind.GROUND_BASE_STATION, config.ground_capacity))
    links = {
        ("user", "uav"): _link(("user", "uav"), config.user_uav),
        ("user", "ground"): _link(("user", "ground"), config.user_ground),
        ("access", "satellite"): _link(("access", "satellite"), config.sat_backhaul),
        ("access", "ground_edge"): _link(("access", "ground_edge"), config.ground_backhaul),
    }
    return World(tuple(nodes), links, config)


def generate_tasks(seed: int, config: ScenarioConfig) -> list[Task]:
    """Sample ``config.task_count`` tasks uniformly from the configured ranges."""
    rng = np.random.default_rng(seed)
    n = config.task_count
    cols = [
        rng.uniform(lo, hi, size=n)
        for lo, hi in (
            config.data_in_range,
            config.compute_range,
            config.result_range,
            config.deadline_range,
        )
    ]
    return [
        Task(i, float(d), float(c), float(r), float(dl))
        for i, (d, c, r, dl) in enumerate(zip(*cols))
    ]


def enumerate_discrete_actions(world: World) -> list[CatalogueEntry]:
    """Full discrete action catalogue, ordered by (processing id, relay class, power).

    UAV and ground placements come at two power levels; satellite placements at
    two relay classes times two power levels. Power levels are half and full
    ``p_max``.
    """
    powers = (0.5 * world.config.p_max, world.config.p_max)
    entries: list[CatalogueEntry] = []
    for node in world.nodes:
        if node.kind is NodeKind.LEO_SATELLITE:
            for relay in (RelayClass.GROUND, RelayClass.UAV):
                entries.extend(CatalogueEntry(node.id, relay, p) for p in powers)
        else:
            entries.extend(CatalogueEntry(node.id, None, p) for p in powers)
    return entries
