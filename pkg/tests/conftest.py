import pytest
from hypothesis import settings

from oracles import running_example_net, synthetic_benchmark
from pmfault.diagnosis import DictionaryConfig, build_dictionary

settings.register_profile("default", deadline=None)
settings.load_profile("default")


@pytest.fixture
def example_net():
    return running_example_net()


@pytest.fixture(scope="session")
def bench():
    """(train, test, normal, rate_hz) of the default synthetic benchmark."""
    return synthetic_benchmark()


@pytest.fixture(scope="session")
def small_dictionary(bench):
    train, _, _, rate = bench
    return build_dictionary(train, DictionaryConfig(k=5, n_sims=40), rate)
