"""Slow-timescale feedback: KPI windows, deviations and rule-table refinement."""
from __future__ import annotations

import dataclasses
import enum
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .config import Intent, ShapingRuleTable

LATENCY_MARGIN = 1.1
LATENCY_STEP = 0.8
ENERGY_STEP = 1.25


class DeviationKind(enum.Enum):
    LATENCY_ABOVE_TARGET = "LatencyAboveTarget"
    ENERGY_FLOOR_VIOLATED = "EnergyFloorViolated"


@dataclass(frozen=True)
class Deviation:
    kind: DeviationKind
    magnitude: float
    episode_range: tuple[int, int]  # inclusive
    action_taken: str = ""


@dataclass(frozen=True)
class EpisodeKpi:
    episode: int
    mean_latency: float
    min_end_energy: float
    mean_reward: float


class KpiWindow:
    """Ring of at most ``length`` per-episode KPIs."""

    def __init__(self, length: int = 20):
        self.length = length
        self.entries: deque[EpisodeKpi] = deque(maxlen=length)

    def push(self, kpi: EpisodeKpi) -> None:
        self.entries.append(kpi)

    @property
    def full(self) -> bool:
        return len(self.entries) == self.length

    def clear(self) -> None:
        self.entries.clear()

    @property
    def episode_range(self) -> tuple[int, int]:
        return (self.entries[0].episode, self.entries[-1].episode)


def record_feedback(window: KpiWindow, intent: Intent) -> list[Deviation]:
    if not window.full:
        return []
    entries = list(window.entries)
    span = window.episode_range
    out: list[Deviation] = []
    mean_latency = sum(e.mean_latency for e in entries) / len(entries)
    if mean_latency > LATENCY_MARGIN * intent.target_latency:
        magnitude = (mean_latency - intent.target_latency) / intent.target_latency
        out.append(Deviation(DeviationKind.LATENCY_ABOVE_TARGET, magnitude, span))
    lowest = min(e.min_end_energy for e in entries)
    if lowest < intent.uav_energy_floor:
        out.append(Deviation(DeviationKind.ENERGY_FLOOR_VIOLATED, intent.uav_energy_floor - lowest, span))
    return out


def refine_config(
    deviations: Sequence[Deviation], table: ShapingRuleTable
) -> tuple[ShapingRuleTable, str]:
    """Adjust ``lam_base`` from the deviations of the latest one or two windows.

    An energy-floor violation in the latest window raises ``lam_base`` by 25%
    and takes precedence. Otherwise two consecutive windows with latency above
    target lower it by 20%. Returns the new table and the reason ("" if
    unchanged).
    """
    if not deviations:
        return table, ""
    windows = sorted({d.episode_range for d in deviations})
    latest = windows[-1]
    in_latest = {d.kind for d in deviations if d.episode_range == latest}
    if DeviationKind.ENERGY_FLOOR_VIOLATED in in_latest:
        lam = min(table.lam_max, ENERGY_STEP * table.lam_base)
        return dataclasses.replace(table, lam_base=lam), "energy floor violated"
    if DeviationKind.LATENCY_ABOVE_TARGET in in_latest and len(windows) >= 2:
        previous = windows[-2]
        in_previous = {d.kind for d in deviations if d.episode_range == previous}
        if DeviationKind.LATENCY_ABOVE_TARGET in in_previous:
            lam = max(table.lam_min, LATENCY_STEP * table.lam_base)
            return dataclasses.replace(table, lam_base=lam), "latency above target in two consecutive windows"
    return table, ""


class AdaptiveLearner:
    """Judges tumbling KPI windows and refines the shaping table.

    Each window is judged once, then cleared, so refinement fires at most once
    per window. Every judgement and table change goes to ``store`` (if given).
    """

    def __init__(self, intent: Intent, table: ShapingRuleTable, window: int = 20, store=None):
        self.intent = intent
        self.table = table
        self.window = KpiWindow(window)
        self.store = store
        self._pending: list[Deviation] = []

    def observe(self, kpi: EpisodeKpi, method: str = "", seed: int = 0) -> ShapingRuleTable:
        self.window.push(kpi)
        if not self.window.full:
            return self.table
        deviations = record_feedback(self.window, self.intent)
        self.window.clear()
        if not deviations:
            self._pending = []
            return self.table
        # Only the previous window can pair with this one for the latency rule.
        span = deviations[0].episode_range
        self._pending = [d for d in self._pending if d.episode_range[1] == span[0] - 1] + deviations
        new_table, reason = refine_config(self._pending, self.table)
        action = f"lam_base {self.table.lam_base!r} -> {new_table.lam_base!r}" if reason else "none"
        if self.store is not None:
            for d in deviations:
                self.store.append({
                    "kind": "deviation", "method": method, "seed": seed,
                    "deviation": d.kind.value, "magnitude": d.magnitude,
                    "episode_range": list(d.episode_range), "action_taken": action,
                })
        if reason:
            if self.store is not None:
                self.store.append({
                    "kind": "table_change", "method": method, "seed": seed,
                    "episode": kpi.episode, "field": "lam_base",
                    "old": self.table.lam_base, "new": new_table.lam_base, "reason": reason,
                })
            self.table = new_table
            self._pending = []
        return self.table


def replay_table_changes(records: Iterable[dict], initial: ShapingRuleTable) -> ShapingRuleTable:
    """Rebuild the final table from ``table_change`` records in log order."""
    table = initial
    for rec in records:
        if rec.get("kind") != "table_change":
            continue
        table = dataclasses.replace(table, **{rec["field"]: rec["new"]})
    return table
