"""Closed-form bandwidth and compute splitting for concurrently active tasks.

Links are shared equally among their contenders. Node compute is split in
proportion to each task's demand. A link resource is keyed by
``(node_id, link_class)`` where ``link_class`` indexes :attr:`World.links`;
every task crosses a link once up and once down.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

from .env import PlacementDecision
from .scenario import NodeKind, Task, World

LinkKey = tuple[int, tuple[str, str]]


@dataclass(frozen=True)
class DemandSet:
    links: Mapping[LinkKey, Sequence[tuple[Hashable, float]]] = field(default_factory=dict)
    nodes: Mapping[int, Sequence[tuple[Hashable, float]]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for resource, entries in (*self.links.items(), *self.nodes.items()):
            ids = [t for t, _ in entries]
            if len(set(ids)) != len(ids):
                raise ValueError(f"duplicate task id on resource {resource!r}")
            for t, amount in entries:
                if not amount > 0:
                    raise ValueError(f"demand of task {t!r} on {resource!r} must be positive")


@dataclass(frozen=True)
class Allocation:
    link_rates: dict[LinkKey, dict[Hashable, float]]
    compute_rates: dict[int, dict[Hashable, float]]
    demands: DemandSet
    world: World

    def link_capacity(self, key: LinkKey) -> float:
        return self.world.links[key[1]].rate

    def node_capacity(self, node: int) -> float:
        return self.world.capacity(node)


def allocate(demands: DemandSet, world: World) -> Allocation:
    link_rates = {}
    for key, entries in demands.links.items():
        share = world.links[key[1]].rate / len(entries) if entries else 0.0
        link_rates[key] = {t: share for t, _ in entries}
    compute_rates = {}
    for node, entries in demands.nodes.items():
        total = sum(d for _, d in entries)
        cap = world.capacity(node)
        compute_rates[node] = {t: cap * d / total for t, d in entries}
    return Allocation(link_rates, compute_rates, demands, world)


def task_latency(allocation: Allocation, task_id: Hashable) -> float:
    """End-to-end latency (ms) of one task under the allocation."""
    world = allocation.world
    total = 0.0
    for key, entries in allocation.demands.links.items():
        for t, megabits in entries:
            if t == task_id:
                link = world.links[key[1]]
                total += megabits / allocation.link_rates[key][t] * 1000.0 + 2 * link.propagation_delay
    for node, entries in allocation.demands.nodes.items():
        for t, gigacycles in entries:
            if t == task_id:
                total += gigacycles / allocation.compute_rates[node][t] * 1000.0
    return total


def certify_qos(allocation: Allocation, tasks: Sequence[Task]) -> list[tuple[Hashable, bool]]:
    """Deadline feasibility for every task that holds an allocation."""
    by_id = {t.id: t for t in tasks}
    allocated: list[Hashable] = []
    for entries in (*allocation.demands.links.values(), *allocation.demands.nodes.values()):
        for t, _ in entries:
            if t not in allocated:
                allocated.append(t)
    unknown = [t for t in allocated if t not in by_id]
    if unknown:
        raise KeyError(f"allocation references unknown task ids {unknown}")
    return [(t, task_latency(allocation, t) <= by_id[t].deadline) for t in allocated]


def demands_for(world: World, placements: Iterable[tuple[Task, PlacementDecision]]) -> DemandSet:
    """Build the demand set that a batch of concurrent placements would create."""
    links: dict[LinkKey, list[tuple[Hashable, float]]] = {}
    nodes: dict[int, list[tuple[Hashable, float]]] = {}
    for task, d in placements:
        volume = task.data_in + task.result_out
        access_class = (
            ("user", "uav") if world.kind(d.access_node) is NodeKind.UAV else ("user", "ground")
        )
        links.setdefault((d.access_node, access_class), []).append((task.id, volume))
        if d.processing_node != d.access_node:
            hop = world.backhaul_link(d.processing_node)
            links.setdefault((d.processing_node, hop.endpoints), []).append((task.id, volume))
        nodes.setdefault(d.processing_node, []).append((task.id, task.compute_demand))
    return DemandSet(links, nodes)
