import textwrap

import pytest

from agentic_sagin.config import (
    AgentConfig,
    ConfigError,
    ExperimentConfig,
    ScenarioConfig,
    ShapingRuleTable,
    Thresholds,
    config_from_dict,
    load_config,
)


def test_defaults_build():
    cfg = ExperimentConfig()
    assert cfg.scenario.n_uav == 5 and cfg.scenario.n_sat == 3 and cfg.scenario.n_ground == 2
    assert cfg.scenario.task_count == 50
    assert cfg.shaping.lam_max == 8.0


def test_toml_round_trip(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text(textwrap.dedent("""
        [scenario]
        n_uav = 2
        uav_energies = [0.3, 0.7]
        hover_drain = 0.001

        [scenario.user_uav]
        rate_mbps = 40
        prop_ms = 1.5

        [shaping]
        critical = 6

        [agent]
        hidden = 32
    """))
    cfg = load_config(path)
    assert cfg.scenario.n_uav == 2
    assert cfg.scenario.uav_energies == (0.3, 0.7)
    assert cfg.scenario.user_uav.rate_mbps == 40.0
    assert cfg.shaping.critical == 6.0
    assert cfg.agent.hidden == 32


@pytest.mark.parametrize(
    "data, field",
    [
        ({"scenario": {"n_uavs": 5}}, "scenario.n_uavs"),
        ({"bogus": {}}, "bogus"),
        ({"scenario": {"user_uav": {"rate": 1}}}, "scenario.user_uav.rate"),
        ({"agent": {"learning_rate": 0.1}}, "agent.learning_rate"),
    ],
)
def test_unknown_keys_are_errors(data, field):
    with pytest.raises(ConfigError) as exc:
        config_from_dict(data)
    assert exc.value.field == field


def test_invalid_values_name_the_field():
    with pytest.raises(ConfigError) as exc:
        config_from_dict({"scenario": {"battery_j": -1}})
    assert "battery_j" in str(exc.value)
    with pytest.raises(ConfigError):
        config_from_dict({"scenario": {"n_uav": 2}})  # energies length mismatch
    with pytest.raises(ConfigError):
        config_from_dict({"shaping": {"critical": 1.5}})  # not above constrained


def test_table_and_thresholds_validate():
    with pytest.raises(ConfigError):
        ShapingRuleTable(adequate=2.0, constrained=2.0)
    with pytest.raises(ConfigError):
        ShapingRuleTable(lam_base=9.0)
    with pytest.raises(ConfigError):
        Thresholds(critical_below=0.6, constrained_below=0.5)
    with pytest.raises(ConfigError):
        AgentConfig(tau=0.0)
    with pytest.raises(ConfigError):
        ScenarioConfig(n_uav=1, uav_energies=(1.5,))


def test_section_must_be_table():
    with pytest.raises(ConfigError):
        config_from_dict({"scenario": 3})
