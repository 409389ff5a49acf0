from pathlib import Path

import pytest

from dglight.sim import IntersectionObservation, LaneObs, SignalPhase

FIXTURES = Path(__file__).parent / "fixtures"


def make_reference_obs() -> IntersectionObservation:
    """The hand-built intersection state behind the golden prompt."""
    lanes = {
        ("E", "through"): LaneObs(0, (0, 1, 0)),
        ("W", "through"): LaneObs(1, (0, 0, 2)),
        ("N", "through"): LaneObs(0, (0, 0, 1)),
        ("S", "through"): LaneObs(0, (0, 0, 0)),
        ("E", "left"): LaneObs(0, (0, 0, 0)),
        ("W", "left"): LaneObs(0, (0, 0, 1)),
        ("N", "left"): LaneObs(0, (0, 0, 0)),
        ("S", "left"): LaneObs(0, (0, 0, 0)),
    }
    neighbors = {"E": 2, "W": 1, "N": None, "S": 3}
    return IntersectionObservation("i_0_0", SignalPhase.ETWT, lanes, neighbors)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def reference_obs() -> IntersectionObservation:
    return make_reference_obs()
