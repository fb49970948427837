import pytest

from drychaos import analysis as an
from drychaos.dynamics import Params

# parameter sets used throughout
STD = Params(1.0, 0.01, 0.8)
ORACLE = Params(1.0, 0.005, 0.8)
COVER = Params(1.0, 0.003, 0.8)
SUPER = Params(1.0, 0.03545, 0.8)


@pytest.fixture(scope="session")
def cover():
    return an.find_covering_pair(COVER)


@pytest.fixture(scope="session")
def builder(cover):
    return an.ShadowBuilder(cover, COVER)
