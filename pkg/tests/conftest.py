import pytest

from helpers import World
from mab import ledger, profiles


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch, tmp_path_factory):
    monkeypatch.delenv("MAB_SEED", raising=False)
    monkeypatch.setenv("MAB_PARAMS_DIR", str(tmp_path_factory.getbasetemp() / "params"))


@pytest.fixture(scope="session")
def system():
    """Test-profile consortium shared by the ledger tests (k=3)."""
    return ledger.setup_system(profiles.TEST, 3, "fixture")


@pytest.fixture(scope="session")
def range_params(system):
    return system[0].range_params


@pytest.fixture(scope="session")
def equality_params(system):
    return system[0].equality_params


@pytest.fixture
def world(system):
    return World(system)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
