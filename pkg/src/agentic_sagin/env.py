"""Episodic placement environment.

One decision per task. A decision picks the processing node, the access
node that faces the user, and a transmit power. Latency follows the uplink,
optional relay hop, FIFO compute queue and the reversed downlink. UAV
batteries pay for every transfer that crosses them plus on-board compute.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import IO, Sequence

import numpy as np

from .orchestrator import RewardConfig
from .perceiver import SemanticState
from .scenario import (
    CatalogueEntry,
    NodeKind,
    RelayClass,
    Task,
    World,
    enumerate_discrete_actions,
    generate_tasks,
)

# UAVs below this battery fraction can neither process nor relay.
MIN_FEASIBLE_ENERGY = 0.05


class NoFeasibleNode(RuntimeError):
    """Every candidate node is masked out."""


@dataclass(frozen=True)
class PlacementDecision:
    processing_node: int
    access_node: int
    power: float


@dataclass(frozen=True)
class EnvState:
    world: World
    energies: tuple[float, ...]
    backlogs: tuple[float, ...]
    tasks: tuple[Task, ...]
    step_index: int
    reward_config: RewardConfig
    seed: int

    @property
    def done(self) -> bool:
        return self.step_index >= len(self.tasks)

    @property
    def current_task(self) -> Task | None:
        return None if self.done else self.tasks[self.step_index]


@dataclass(frozen=True)
class StepOutcome:
    latency: float  # ms
    uav_energy_spent: float  # battery fraction, excludes hover drain
    reward: float
    reward_terms: tuple[float, float, float]  # (latency_norm, energy_norm, lam)
    deadline_met: bool
    waiting: float = 0.0  # ms spent queued behind the processing node's backlog


def reset(world: World, seed: int, reward_config: RewardConfig) -> EnvState:
    tasks = tuple(generate_tasks(seed, world.config))
    return EnvState(
        world=world,
        energies=tuple(float(e) for e in world.config.uav_energies),
        backlogs=(0.0,) * world.n_nodes,
        tasks=tasks,
        step_index=0,
        reward_config=reward_config,
        seed=seed,
    )


def with_reward_config(env: EnvState, reward_config: RewardConfig) -> EnvState:
    return replace(env, reward_config=reward_config)


# -- feasibility ------------------------------------------------------------

def uav_feasible(env: EnvState, uav: int) -> bool:
    return env.energies[uav] >= MIN_FEASIBLE_ENERGY


def ground_relay(env: EnvState) -> int | None:
    ground = env.world.ground_ids
    if not ground:
        return None
    return min(ground, key=lambda g: (env.backlogs[g], g))


def uav_relay(env: EnvState) -> int | None:
    feasible = [u for u in env.world.uav_ids if uav_feasible(env, u)]
    if not feasible:
        return None
    return min(feasible, key=lambda u: (-env.energies[u], u))


def _relay(env: EnvState, prefer: RelayClass, fallback: bool) -> int | None:
    first, second = (ground_relay, uav_relay) if prefer is RelayClass.GROUND else (uav_relay, ground_relay)
    node = first(env)
    if node is None and fallback:
        node = second(env)
    return node


def feasible_mask(env: EnvState) -> np.ndarray:
    """Per-node processing feasibility in canonical order."""
    world = env.world
    mask = np.ones(world.n_nodes, dtype=bool)
    for u in world.uav_ids:
        mask[u] = uav_feasible(env, u)
    if ground_relay(env) is None and uav_relay(env) is None:
        mask[list(world.sat_ids)] = False
    return mask


# -- decoding ---------------------------------------------------------------

def decode_continuous(action: Sequence[float], env: EnvState) -> PlacementDecision:
    """Map an action in [-1, 1]^(n_nodes+2) to a placement decision.

    Entries ``[0, n_nodes)`` score nodes, the next entry picks the satellite
    relay class (>= 0 ground, < 0 UAV) and the last sets transmit power. If the
    preferred relay class has no usable node the other class is used.
    """
    world = env.world
    a = np.asarray(action, dtype=float)
    if a.shape != (world.action_dim,):
        raise ValueError(f"action must have shape ({world.action_dim},), got {a.shape}")
    mask = feasible_mask(env)
    if not mask.any():
        raise NoFeasibleNode("all nodes masked")
    scores = np.where(mask, a[: world.n_nodes], -np.inf)
    proc = int(np.argmax(scores))  # first maximum, i.e. lowest id on ties
    cfg = world.config
    power = cfg.p_min + (float(a[-1]) + 1.0) / 2.0 * (cfg.p_max - cfg.p_min)
    if world.kind(proc) is NodeKind.LEO_SATELLITE:
        prefer = RelayClass.GROUND if a[world.n_nodes] >= 0 else RelayClass.UAV
        access = _relay(env, prefer, fallback=True)
    else:
        access = proc
    return PlacementDecision(proc, access, power)


def entry_feasible(entry: CatalogueEntry, env: EnvState) -> bool:
    kind = env.world.kind(entry.processing_node)
    if kind is NodeKind.UAV:
        return uav_feasible(env, entry.processing_node)
    if kind is NodeKind.LEO_SATELLITE:
        return _relay(env, entry.relay_class, fallback=False) is not None
    return True


def resolve_entry(entry: CatalogueEntry, env: EnvState) -> PlacementDecision:
    if env.world.kind(entry.processing_node) is NodeKind.LEO_SATELLITE:
        access = _relay(env, entry.relay_class, fallback=False)
    else:
        access = entry.processing_node
    return PlacementDecision(entry.processing_node, access, entry.power)


def decode_discrete(
    index: int, env: EnvState, catalogue: Sequence[CatalogueEntry] | None = None
) -> PlacementDecision:
    """Catalogue lookup; infeasible entries remap to the next feasible index cyclically."""
    catalogue = catalogue if catalogue is not None else enumerate_discrete_actions(env.world)
    n = len(catalogue)
    if not 0 <= index < n:
        raise IndexError(f"action index {index} outside catalogue of size {n}")
    for offset in range(n):
        entry = catalogue[(index + offset) % n]
        if entry_feasible(entry, env):
            return resolve_entry(entry, env)
    raise NoFeasibleNode("no feasible catalogue entry")


# -- dynamics -----------------------------------------------------------------

def validate_decision(world: World, d: PlacementDecision) -> None:
    if not (0 <= d.processing_node < world.n_nodes and 0 <= d.access_node < world.n_nodes):
        raise ValueError(f"node id out of range in {d}")
    kind = world.kind(d.processing_node)
    if kind is NodeKind.LEO_SATELLITE:
        if world.kind(d.access_node) is NodeKind.LEO_SATELLITE:
            raise ValueError("satellite processing needs a UAV or ground relay")
    elif d.access_node != d.processing_node:
        raise ValueError("UAV and ground processing must use the processing node as access")
    cfg = world.config
    if not (cfg.p_min - 1e-12 <= d.power <= cfg.p_max + 1e-12):
        raise ValueError(f"power {d.power} outside [{cfg.p_min}, {cfg.p_max}]")


def latency_breakdown(world: World, backlogs: Sequence[float], task: Task,
                      d: PlacementDecision) -> tuple[float, float]:
    """Return (total latency ms, waiting ms) for ``task`` under decision ``d``."""
    access = world.access_link(d.access_node)
    cap = world.capacity(d.processing_node)
    up = task.data_in / access.rate * 1000.0 + access.propagation_delay
    down = task.result_out / access.rate * 1000.0 + access.propagation_delay
    if d.processing_node != d.access_node:
        hop = world.backhaul_link(d.processing_node)
        up += task.data_in / hop.rate * 1000.0 + hop.propagation_delay
        down += task.result_out / hop.rate * 1000.0 + hop.propagation_delay
    waiting = backlogs[d.processing_node] / cap * 1000.0
    compute = task.compute_demand / cap * 1000.0
    return up + waiting + compute + down, waiting


def latency(world: World, backlogs: Sequence[float], task: Task, d: PlacementDecision) -> float:
    return latency_breakdown(world, backlogs, task, d)[0]


def uav_energy(world: World, task: Task, d: PlacementDecision) -> dict[int, float]:
    """Battery fraction spent per involved UAV (hover drain excluded)."""
    cfg = world.config
    spent: dict[int, float] = {}
    if world.kind(d.access_node) is NodeKind.UAV:
        access = world.access_link(d.access_node)
        seconds = (task.data_in + task.result_out) / access.rate
        if d.processing_node != d.access_node:
            hop = world.backhaul_link(d.processing_node)
            seconds += (task.data_in + task.result_out) / hop.rate
        spent[d.access_node] = d.power * seconds / cfg.battery_j
    if world.kind(d.processing_node) is NodeKind.UAV:
        spent[d.processing_node] = (
            spent.get(d.processing_node, 0.0) + cfg.kappa * task.compute_demand / cfg.battery_j
        )
    return spent


def step(env: EnvState, decision: PlacementDecision) -> tuple[EnvState, StepOutcome]:
    if env.done:
        raise RuntimeError("episode already finished")
    world = env.world
    validate_decision(world, decision)
    task = env.tasks[env.step_index]
    total, waiting = latency_breakdown(world, env.backlogs, task, decision)

    spent = uav_energy(world, task, decision)
    energy_spent = float(sum(spent.values()))
    hover = world.config.hover_drain
    energies = tuple(
        max(0.0, e - spent.get(u, 0.0) - hover) for u, e in enumerate(env.energies)
    )
    backlogs = list(env.backlogs)
    backlogs[decision.processing_node] += task.compute_demand

    rc = env.reward_config
    latency_norm = total / rc.l_ref
    energy_norm = energy_spent / rc.e_ref
    reward = -(latency_norm + rc.lam * energy_norm)
    outcome = StepOutcome(
        latency=total,
        uav_energy_spent=energy_spent,
        reward=reward,
        reward_terms=(latency_norm, energy_norm, rc.lam),
        deadline_met=total <= task.deadline,
        waiting=waiting,
    )
    new_env = replace(env, energies=energies, backlogs=tuple(backlogs), step_index=env.step_index + 1)
    return new_env, outcome


# -- observation ----------------------------------------------------------------

def observe(env: EnvState, semantic: SemanticState) -> np.ndarray:
    """Fixed-layout observation, every entry clamped to [0, 1].

    Layout for the default world (22 entries): current task features (3), UAV
    energies (5), per-node backlog in seconds of work over the configured
    horizon (10), one-hot
    energy level (3), lam over lam_max (1).
    """
    world = env.world
    cfg = world.config
    obs = np.zeros(world.obs_dim)
    task = env.current_task
    if task is not None:
        for i, (value, (lo, hi)) in enumerate(
            (
                (task.data_in, cfg.data_in_range),
                (task.compute_demand, cfg.compute_range),
                (task.result_out, cfg.result_range),
            )
        ):
            obs[i] = (value - lo) / (hi - lo) if hi > lo else 0.0
    n_uav = cfg.n_uav
    obs[3 : 3 + n_uav] = env.energies
    off = 3 + n_uav
    caps = np.array([n.compute_capacity for n in world.nodes])
    obs[off : off + world.n_nodes] = np.asarray(env.backlogs) / (caps * cfg.backlog_horizon_s)
    off += world.n_nodes
    obs[off + int(semantic.uav_energy_level)] = 1.0
    obs[off + 3] = env.reward_config.lam / env.reward_config.lam_max
    return np.clip(obs, 0.0, 1.0)


# -- trace ----------------------------------------------------------------------

class TraceWriter:
    """Per-step JSON Lines trace."""

    def __init__(self, fh: IO[str]):
        self.fh = fh

    def write(self, episode: int, step_index: int, decision: PlacementDecision,
              outcome: StepOutcome) -> None:
        record = {
            "episode": episode,
            "step": step_index,
            "decision": {
                "processing_node": decision.processing_node,
                "access_node": decision.access_node,
                "power": decision.power,
            },
            "latency_ms": outcome.latency,
            "energy_fraction": outcome.uav_energy_spent,
            "reward": outcome.reward,
            "lambda": outcome.reward_terms[2],
        }
        self.fh.write(json.dumps(record) + "\n")
