from functools import lru_cache

import pytest

from chaconlab.chacon import build_system


@lru_cache(maxsize=None)
def cached_system(n_max: int):
    return build_system(n_max)


@pytest.fixture(scope="session")
def get_system():
    return cached_system
