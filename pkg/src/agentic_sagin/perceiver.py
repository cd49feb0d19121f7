"""Monitor and Analyze: telemetry capture and semantic labelling."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .config import Thresholds

if TYPE_CHECKING:
    from .env import EnvState
    from .scenario import World

log = logging.getLogger(__name__)


class EnergyLevel(enum.IntEnum):
    # Integer order doubles as the one-hot slot and the severity ranking.
    CRITICAL = 0
    CONSTRAINED = 1
    ADEQUATE = 2


class SatelliteBackup(enum.Enum):
    AVAILABLE_HIGH_LATENCY = "available_high_latency"
    UNAVAILABLE = "unavailable"


class GroundCongestion(enum.Enum):
    LOW = "low"
    HIGH = "high"


@dataclass(frozen=True)
class SemanticState:
    uav_energy_level: EnergyLevel
    satellite_backup: SatelliteBackup
    ground_congestion: GroundCongestion

    def label(self) -> str:
        return "/".join(
            (self.uav_energy_level.name, self.satellite_backup.name, self.ground_congestion.name)
        )


@dataclass(frozen=True)
class Telemetry:
    uav_energies: tuple[float, ...]
    backlogs: tuple[float, ...]
    step_index: int
    recent_mean_latency: float = 0.0


def monitor(env: EnvState, recent_mean_latency: float = 0.0) -> Telemetry:
    return Telemetry(
        uav_energies=tuple(env.energies),
        backlogs=tuple(env.backlogs),
        step_index=env.step_index,
        recent_mean_latency=float(recent_mean_latency),
    )


def analyze(t: Telemetry, th: Thresholds, world: World) -> SemanticState:
    """Map telemetry to labels; comparisons are strict-less on the energy bands."""
    if t.uav_energies:
        lowest = min(t.uav_energies)
        if lowest < th.critical_below:
            level = EnergyLevel.CRITICAL
        elif lowest < th.constrained_below:
            level = EnergyLevel.CONSTRAINED
        else:
            level = EnergyLevel.ADEQUATE
    else:
        log.info("no UAVs in telemetry; energy level defaults to adequate")
        level = EnergyLevel.ADEQUATE

    backup = (
        SatelliteBackup.AVAILABLE_HIGH_LATENCY
        if len(world.sat_ids) > 0
        else SatelliteBackup.UNAVAILABLE
    )

    ground = list(world.ground_ids)
    congestion = GroundCongestion.LOW
    if ground:
        load = sum(t.backlogs[g] / world.capacity(g) for g in ground) / len(ground)
        if load > th.congestion_backlog_seconds:
            congestion = GroundCongestion.HIGH
    return SemanticState(level, backup, congestion)


PAPER_STATE_SENTENCE = "UAV cluster energy-constrained with satellite backup available but high latency"


def render_summary(s: SemanticState) -> str:
    """Deterministic one-line description of a semantic state."""
    low_energy = s.uav_energy_level is not EnergyLevel.ADEQUATE
    has_backup = s.satellite_backup is SatelliteBackup.AVAILABLE_HIGH_LATENCY
    if low_energy and has_backup:
        return PAPER_STATE_SENTENCE

    congested = "; ground edge congested" if s.ground_congestion is GroundCongestion.HIGH else ""
    if low_energy:
        word = "critical" if s.uav_energy_level is EnergyLevel.CRITICAL else "constrained"
        return f"UAV cluster energy-{word} with no satellite backup{congested}"
    backup = "satellite backup available" if has_backup else "no satellite backup"
    return f"UAV cluster energy adequate; {backup}{congested}"
