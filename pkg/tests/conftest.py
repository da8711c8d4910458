import numpy as np
import pytest

from fracfield.palm import FdTable
from fracfield.rng import substream

#: Master seed for every randomized test (determinism contract).
TEST_SEED = 20250607


@pytest.fixture(scope="session")
def fd_table() -> FdTable:
    return FdTable()


@pytest.fixture()
def rng_for(request):
    """Factory for named, test-scoped substreams."""

    def make(*path) -> np.random.Generator:
        return substream(TEST_SEED, request.node.nodeid, *path)

    return make
