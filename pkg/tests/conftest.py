import numpy as np
import pytest

from coopldpc.construction import CodeSpec, assemble
from coopldpc.degree import get_preset


@pytest.fixture(scope="session")
def regular_code():
    return assemble(CodeSpec(get_preset("regular3936"), 1200, seed=11))


@pytest.fixture(scope="session")
def irregular_code():
    return assemble(CodeSpec(get_preset("scenario1"), 1200, seed=12, remove_4cycles=True))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
