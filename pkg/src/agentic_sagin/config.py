"""Scenario, intent and shaping configuration, loadable from TOML.

Every dataclass here mirrors one TOML table. Unknown keys are rejected so a
typo in an experiment file fails loudly instead of silently using a default.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

try:  # python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid configuration value or unknown key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class LinkSpec:
    rate_mbps: float
    prop_ms: float


@dataclass(frozen=True)
class ScenarioConfig:
    n_uav: int = 5
    n_sat: int = 3
    n_ground: int = 2
    # Gigacycles per second.
    uav_capacity: float = 5.0
    sat_capacity: float = 10.0
    ground_capacity: float = 20.0
    user_uav: LinkSpec = LinkSpec(50.0, 1.0)
    user_ground: LinkSpec = LinkSpec(100.0, 2.0)
    sat_backhaul: LinkSpec = LinkSpec(100.0, 15.0)
    ground_backhaul: LinkSpec = LinkSpec(100.0, 2.0)
    uav_energies: tuple[float, ...] = (0.25, 0.80, 0.60, 0.45, 0.90)
    battery_j: float = 200.0
    data_in_range: tuple[float, float] = (2.0, 8.0)
    compute_range: tuple[float, float] = (1.0, 5.0)
    result_range: tuple[float, float] = (10.0, 50.0)
    deadline_range: tuple[float, float] = (2000.0, 2000.0)
    p_min: float = 0.5
    p_max: float = 2.0
    kappa: float = 0.3  # joules per gigacycle on a UAV
    hover_drain: float = 0.0005  # battery fraction per decision step
    l_ref: float = 1000.0
    e_ref: float = 0.01
    task_count: int = 50
    # Backlog features are seconds of queued work over this horizon, then clamped.
    backlog_horizon_s: float = 4.0

    def __post_init__(self) -> None:
        for name in ("n_uav", "n_sat", "n_ground", "task_count"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ConfigError(name, f"must be a non-negative integer, got {value!r}")
        for name in (
            "uav_capacity", "sat_capacity", "ground_capacity", "battery_j",
            "p_min", "p_max", "kappa", "hover_drain", "l_ref", "e_ref", "backlog_horizon_s",
        ):
            _positive(name, getattr(self, name))
        for name in ("user_uav", "user_ground", "sat_backhaul", "ground_backhaul"):
            link = getattr(self, name)
            _positive(f"{name}.rate_mbps", link.rate_mbps)
            if not (math.isfinite(link.prop_ms) and link.prop_ms >= 0):
                raise ConfigError(f"{name}.prop_ms", "must be >= 0")
        for name in ("data_in_range", "compute_range", "result_range", "deadline_range"):
            lo, hi = getattr(self, name)
            _positive(name, lo)
            if hi < lo:
                raise ConfigError(name, f"upper bound {hi} below lower bound {lo}")
        if self.p_max < self.p_min:
            raise ConfigError("p_max", "must be >= p_min")
        if len(self.uav_energies) != self.n_uav:
            raise ConfigError(
                "uav_energies",
                f"length {len(self.uav_energies)} does not match n_uav={self.n_uav}",
            )
        for e in self.uav_energies:
            if not (0.0 <= e <= 1.0):
                raise ConfigError("uav_energies", f"entry {e} outside [0, 1]")


def _positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigError(name, f"must be strictly positive, got {value!r}")


@dataclass(frozen=True)
class Intent:
    target_latency: float = 1000.0
    uav_energy_floor: float = 0.15
    note: str = "minimize service latency while ensuring UAV energy sustainability"

    def __post_init__(self) -> None:
        _positive("target_latency", self.target_latency)
        if not (0.0 <= self.uav_energy_floor < 1.0):
            raise ConfigError("uav_energy_floor", "must lie in [0, 1)")


@dataclass(frozen=True)
class ShapingRuleTable:
    adequate: float = 1.0
    constrained: float = 2.0
    critical: float = 4.0
    lam_base: float = 1.0
    lam_min: float = 0.25
    lam_max: float = 8.0

    def __post_init__(self) -> None:
        for name in ("adequate", "constrained", "critical", "lam_base", "lam_min", "lam_max"):
            _positive(name, getattr(self, name))
        if not (self.adequate < self.constrained < self.critical):
            raise ConfigError("multipliers", "must increase strictly toward critical")
        if not (self.lam_min <= self.lam_max):
            raise ConfigError("lam_min", "must not exceed lam_max")
        if not (self.lam_min <= self.lam_base <= self.lam_max):
            raise ConfigError("lam_base", "must lie in [lam_min, lam_max]")


@dataclass(frozen=True)
class Thresholds:
    critical_below: float = 0.30
    constrained_below: float = 0.50
    congestion_backlog_seconds: float = 0.5

    def __post_init__(self) -> None:
        if not (0.0 < self.critical_below < self.constrained_below < 1.0):
            raise ConfigError("thresholds", "need 0 < critical_below < constrained_below < 1")
        _positive("congestion_backlog_seconds", self.congestion_backlog_seconds)


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.99
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    batch_size: int = 64
    tau: float = 0.005
    explore_sigma: float = 0.1
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_episodes: int = 500
    hidden: int = 64
    buffer_capacity: int = 50_000
    diffusion_steps: int = 5
    beta_start: float = 1e-4
    beta_end: float = 0.1
    warmup_steps: int = 500
    train_every: int = 2
    pretrain_every: int = 100
    pretrain_top_k: int = 20
    pretrain_epochs: int = 2
    reward_scale: float = 0.1

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma <= 1.0):
            raise ConfigError("gamma", "must lie in (0, 1]")
        if not (0.0 < self.tau <= 1.0):
            raise ConfigError("tau", "must lie in (0, 1]")
        for name in ("actor_lr", "critic_lr"):
            _positive(name, getattr(self, name))
        for name in ("batch_size", "hidden", "buffer_capacity", "diffusion_steps", "train_every"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.explore_sigma < 0:
            raise ConfigError("explore_sigma", "must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    intent: Intent = field(default_factory=Intent)
    shaping: ShapingRuleTable = field(default_factory=ShapingRuleTable)
    thresholds: Thresholds = field(default_factory=Thresholds)
    agent: AgentConfig = field(default_factory=AgentConfig)


def _build(cls: type, data: Mapping[str, Any], prefix: str) -> Any:
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in fields:
            raise ConfigError(path, "unknown key")
        default = fields[key].default
        if dataclasses.is_dataclass(default) or (
            fields[key].default_factory is not dataclasses.MISSING  # type: ignore[misc]
        ):
            if not isinstance(value, Mapping):
                raise ConfigError(path, "expected a table")
            sub_cls = type(default) if dataclasses.is_dataclass(default) else type(
                fields[key].default_factory()  # type: ignore[misc]
            )
            kwargs[key] = _build(sub_cls, value, path)
        elif isinstance(value, list):
            kwargs[key] = tuple(float(v) for v in value)
        elif isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
            kwargs[key] = float(value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        if prefix and not exc.field.startswith(prefix):
            raise ConfigError(f"{prefix}.{exc.field}", str(exc).split(": ", 1)[1]) from None
        raise
    except TypeError as exc:
        raise ConfigError(prefix or "<root>", str(exc)) from None


def config_from_dict(data: Mapping[str, Any]) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "")


def load_config(path: str | Path) -> ExperimentConfig:
    """Read an :class:`ExperimentConfig` from a TOML file."""
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return config_from_dict(data)
