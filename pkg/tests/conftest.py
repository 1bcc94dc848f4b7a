import pytest

from faultscale.catalog import default_catalog
from faultscale.workload import WorkloadProfile, generate_baseline


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def baseline():
    return generate_baseline(WorkloadProfile())
