import pytest

from agentic_sagin.config import ScenarioConfig
from agentic_sagin.orchestrator import RewardConfig
from agentic_sagin.scenario import build_scenario


@pytest.fixture
def world():
    return build_scenario()


@pytest.fixture
def rc():
    return RewardConfig(lam=1.0)


def small_config(**kw) -> ScenarioConfig:
    base = dict(n_uav=1, n_sat=0, n_ground=0, uav_energies=(0.9,))
    base.update(kw)
    return ScenarioConfig(**base)


# -- acceptance report -----------------------------------------------------------

_CRITERIA: list[str] = []


def record_criterion(line: str) -> None:
    _CRITERIA.append(line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
