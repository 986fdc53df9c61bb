import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from treemed.xalgebra import validate  # noqa: E402

# every operator output is checked tuple by tuple in the test build
validate.ENABLED = True

settings.register_profile("default", deadline=None, print_blob=True)
settings.load_profile("default")

@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    from treemed.bench.dataset import DatasetSpec, write_dataset

    d = tmp_path_factory.mktemp("data")
    write_dataset(DatasetSpec(), str(d))
    return str(d)


@pytest.fixture(scope="session")
def data():
    from treemed.bench.dataset import DatasetSpec, generate

    return generate(DatasetSpec())


@pytest.fixture(scope="session")
def topology(dataset_dir):
    from treemed.bench.topology import build_topology

    return build_topology(dataset_dir)

