import json
from pathlib import Path

import pytest

from mzlab.interferometer import InterferometerGeometry
from mzlab.physics import LaserField, lithium6, lithium7

FIXTURES = Path(__file__).parent / "fixtures"
SCENARIOS = Path(__file__).parent.parent / "scenarios"


@pytest.fixture(scope="session")
def li7():
    return lithium7()


@pytest.fixture(scope="session")
def li6():
    return lithium6()


@pytest.fixture(scope="session")
def geom():
    return InterferometerGeometry()


@pytest.fixture(scope="session")
def laser671():
    return LaserField(wavelength=671e-9, detuning=2.0e10)


@pytest.fixture(scope="session")
def bragg_window():
    with open(FIXTURES / "bragg_window.json", "r", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture()
def scenario_dir():
    return SCENARIOS
