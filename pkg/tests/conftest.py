import pytest

from ehrkit.maabe import abe_global_setup
from ehrkit.pairing import default_params, gt_generator


@pytest.fixture(scope="session")
def params():
    return default_params()


@pytest.fixture(scope="session")
def gp():
    return abe_global_setup(128)


@pytest.fixture(scope="session", autouse=True)
def _warm_gt_table():
    # Build the fixed-base table once so timing-sensitive tests don't pay for it.
    gt_generator()
