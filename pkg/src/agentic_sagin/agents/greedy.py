"""Myopic lowest-latency placement."""
from __future__ import annotations

from typing import Sequence

from ..env import EnvState, NoFeasibleNode, PlacementDecision, entry_feasible, latency, resolve_entry
from ..scenario import CatalogueEntry, enumerate_discrete_actions


def greedy_select(env: EnvState, catalogue: Sequence[CatalogueEntry] | None = None) -> PlacementDecision:
    """Pick the feasible catalogue entry with the smallest latency.

    Energy is ignored. Ties go to the lowest catalogue index, so between two
    power levels with equal latency the lower one wins.
    """
    catalogue = catalogue if catalogue is not None else enumerate_discrete_actions(env.world)
    task = env.current_task
    if task is None:
        raise RuntimeError("episode already finished")
    best: PlacementDecision | None = None
    best_latency = float("inf")
    for entry in catalogue:
        if not entry_feasible(entry, env):
            continue
        decision = resolve_entry(entry, env)
        value = latency(env.world, env.backlogs, task, decision)
        if value < best_latency:
            best, best_latency = decision, value
    if best is None:
        raise NoFeasibleNode("no feasible catalogue entry")
    return best


class GreedyAgent:
    """Planner wrapper so the harness can treat greedy like the learners."""

    needs_obs = False

    def __init__(self, world):
        self.catalogue = enumerate_discrete_actions(world)

    def begin_episode(self, episode: int) -> None:
        pass

    def decide(self, env: EnvState, obs=None, explore: bool = True) -> tuple[PlacementDecision, None]:
        return greedy_select(env, self.catalogue), None
