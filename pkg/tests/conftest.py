import os

import pytest

from anchorsim.constellation import GroundSite, OrbitalShell
from anchorsim.latency import default_isl

SCENARIO_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "scenarios")


@pytest.fixture(scope="session")
def scenario_dir() -> str:
    return SCENARIO_DIR


@pytest.fixture(scope="session")
def small_shell() -> OrbitalShell:
    # 4 planes x 5 slots: big enough for a real torus, small enough to enumerate
    return OrbitalShell(4, 5, 550.0, 53.0)


@pytest.fixture(scope="session")
def starlink_shell() -> OrbitalShell:
    return OrbitalShell(72, 22, 550.0, 53.0)


@pytest.fixture(scope="session")
def starlink_isl(starlink_shell):
    return default_isl(starlink_shell)


@pytest.fixture(scope="session")
def london() -> GroundSite:
    return GroundSite("london", 51.5074, -0.1278)


@pytest.fixture(scope="session")
def paris() -> GroundSite:
    return GroundSite("paris", 48.8566, 2.3522)


@pytest.fixture(scope="session")
def ashburn() -> GroundSite:
    return GroundSite("ashburn", 39.0438, -77.4874)
