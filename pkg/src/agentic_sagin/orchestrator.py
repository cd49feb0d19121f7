"""Plan phase: intent, reward shaping and planner selection.

The orchestrator turns a semantic state into a penalty coefficient on UAV
energy. The coefficient is chosen once per episode. A pluggable advisor may
propose multiplier changes; they are validated before being adopted.
"""
from __future__ import annotations

import dataclasses
import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Protocol, Sequence

from .config import ConfigError, Intent, ShapingRuleTable
from .perceiver import EnergyLevel, SemanticState

log = logging.getLogger(__name__)

_MULTIPLIER_FIELD = {
    EnergyLevel.ADEQUATE: "adequate",
    EnergyLevel.CONSTRAINED: "constrained",
    EnergyLevel.CRITICAL: "critical",
}


@dataclass(frozen=True)
class RewardConfig:
    lam: float = 1.0
    l_ref: float = 1000.0
    e_ref: float = 0.01
    lam_max: float = 8.0
    # (episode, semantic label, rule row); enough to recompute lam.
    provenance: tuple[Any, ...] = field(default=(), compare=False)


class PlannerChoice(enum.Enum):
    LLM_SHAPED_D3PG = "LlmShapedD3pg"
    FIXED_D3PG = "FixedD3pg"
    LLM_SHAPED_DDPG = "LlmShapedDdpg"
    LLM_SHAPED_DQN = "LlmShapedDqn"
    GREEDY = "Greedy"

    @classmethod
    def parse(cls, name: str) -> PlannerChoice:
        for choice in cls:
            if choice.value.lower() == name.lower() or choice.name.lower() == name.lower():
                return choice
        raise ValueError(f"unknown method {name!r}; expected one of {[c.value for c in cls]}")


def multiplier(table: ShapingRuleTable, level: EnergyLevel) -> float:
    return getattr(table, _MULTIPLIER_FIELD[level])


def shape_reward(
    s: SemanticState,
    intent: Intent,
    table: ShapingRuleTable,
    *,
    episode: int = 0,
    l_ref: float = 1000.0,
    e_ref: float = 0.01,
) -> RewardConfig:
    """lam = clamp(lam_base * multiplier(energy level), lam_min, lam_max)."""
    row = _MULTIPLIER_FIELD[s.uav_energy_level]
    raw = table.lam_base * multiplier(table, s.uav_energy_level)
    lam = min(max(raw, table.lam_min), table.lam_max)
    return RewardConfig(
        lam=lam,
        l_ref=l_ref,
        e_ref=e_ref,
        lam_max=table.lam_max,
        provenance=(episode, s.label(), row, table.lam_base, multiplier(table, s.uav_energy_level)),
    )


def fixed_reward(table: ShapingRuleTable, *, episode: int = 0, l_ref: float = 1000.0,
                 e_ref: float = 0.01) -> RewardConfig:
    return RewardConfig(
        lam=table.lam_base, l_ref=l_ref, e_ref=e_ref, lam_max=table.lam_max,
        provenance=(episode, "fixed", "lam_base", table.lam_base, 1.0),
    )


@dataclass
class Planner:
    """Handle returned by :func:`select_planner`.

    ``shaping`` is ``"semantic"`` (lam from the rule table), ``"fixed"`` (lam
    pinned to the initial base value) or ``"none"`` (decisions ignore lam).
    """

    choice: PlannerChoice
    shaping: str
    agent: Any = None
    fixed_table: ShapingRuleTable | None = None

    def reward_config(
        self,
        s: SemanticState,
        intent: Intent,
        table: ShapingRuleTable,
        *,
        episode: int = 0,
        l_ref: float = 1000.0,
        e_ref: float = 0.01,
    ) -> RewardConfig:
        if self.shaping == "semantic":
            return shape_reward(s, intent, table, episode=episode, l_ref=l_ref, e_ref=e_ref)
        # Fixed and greedy both see the untouched base coefficient; greedy never reads it.
        base = self.fixed_table or table
        return fixed_reward(base, episode=episode, l_ref=l_ref, e_ref=e_ref)


_SHAPING = {
    PlannerChoice.LLM_SHAPED_D3PG: "semantic",
    PlannerChoice.FIXED_D3PG: "fixed",
    PlannerChoice.LLM_SHAPED_DDPG: "semantic",
    PlannerChoice.LLM_SHAPED_DQN: "semantic",
    PlannerChoice.GREEDY: "none",
}


def select_planner(
    requested: PlannerChoice | str,
    *,
    table: ShapingRuleTable | None = None,
    agent: Any = None,
    artifact_dir: str | Path | None = None,
    evaluation: bool = False,
    world: Any = None,
    agent_config: Any = None,
    seed: int = 0,
) -> Planner:
    """Return a planner handle whose shaping behaviour matches ``requested``.

    In evaluation mode the RL planners load parameters from ``artifact_dir``;
    a missing file raises :class:`FileNotFoundError` naming the path.
    """
    if isinstance(requested, str):
        requested = PlannerChoice.parse(requested)
    table = table or ShapingRuleTable()
    planner = Planner(requested, _SHAPING[requested], agent, fixed_table=table)
    if agent is not None:
        return planner

    from .agents import make_agent  # agents import this module

    if world is None:
        raise ValueError("world is required to construct an RL agent")
    planner.agent = make_agent(requested, world, agent_config, seed=seed)
    if evaluation and requested is not PlannerChoice.GREEDY:
        if artifact_dir is None:
            raise FileNotFoundError("evaluation mode requires an artifact directory")
        planner.agent.load(Path(artifact_dir))
    return planner


# -- advisor seam ---------------------------------------------------------

@dataclass(frozen=True)
class AdvisorOutcome:
    adopted: bool
    table: ShapingRuleTable
    reason: str


class Advisor(Protocol):
    def propose(
        self, s: SemanticState, intent: Intent, history: Sequence[Mapping[str, float]]
    ) -> Mapping[str, float] | None: ...


class RuleTableAdvisor:
    """Default advisor: never suggests a change."""

    def propose(self, s, intent, history):
        return None


def advisor_propose(
    s: SemanticState,
    intent: Intent,
    history: Sequence[Mapping[str, float]],
    table: ShapingRuleTable,
    advisor: Advisor | None = None,
) -> AdvisorOutcome:
    advisor = advisor or RuleTableAdvisor()
    suggestion = advisor.propose(s, intent, history)
    if not suggestion:
        return AdvisorOutcome(False, table, "no change")
    return adopt_suggestion(table, suggestion)


def adopt_suggestion(table: ShapingRuleTable, suggestion: Mapping[str, float]) -> AdvisorOutcome:
    """Validate a ``{level: multiplier}`` suggestion against the table invariants."""
    updates: dict[str, float] = {}
    for key, value in suggestion.items():
        name = key.name.lower() if isinstance(key, EnergyLevel) else str(key).lower()
        if name not in _MULTIPLIER_FIELD.values():
            reason = f"unknown energy level {key!r}"
            log.warning("advisor suggestion rejected: %s", reason)
            return AdvisorOutcome(False, table, reason)
        updates[name] = float(value)
    try:
        candidate = dataclasses.replace(table, **updates)
    except ConfigError as exc:
        reason = f"violates rule table invariants ({exc})"
        log.warning("advisor suggestion rejected: %s", reason)
        return AdvisorOutcome(False, table, reason)
    log.info("advisor suggestion adopted: %s", updates)
    return AdvisorOutcome(True, candidate, f"adopted {updates}")
