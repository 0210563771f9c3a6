import pytest

from casimir_qi.modes import BoxSpec, PotentialSpec


@pytest.fixture
def unit_pot() -> PotentialSpec:
    """Lambda = 1 with a = 1."""
    return PotentialSpec.from_coupling(1.0, a=1.0)


@pytest.fixture
def free_pot() -> PotentialSpec:
    return PotentialSpec(strength=0.0, a=1.0)


@pytest.fixture
def box_20() -> BoxSpec:
    return BoxSpec(length=20.0)


@pytest.fixture
def box_100() -> BoxSpec:
    return BoxSpec(length=100.0)
