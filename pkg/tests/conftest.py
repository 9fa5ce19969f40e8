import random
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from sagezip.simulate import random_consensus  # noqa: E402

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def consensus():
    return random_consensus(30_000, random.Random(7))


@pytest.fixture(scope="session")
def consensus_n():
    return random_consensus(30_000, random.Random(8), n_runs=3)
