from typing import Callable

import pytest

from linglam.entities import DataMatrix, GenConfig, LingLamGraph, TestConfig
from linglam.synthesis import sample
from tests.reference import make_reference_graph


@pytest.fixture(scope="session")
def reference_graph() -> LingLamGraph:
    return make_reference_graph()


@pytest.fixture(scope="session")
def reference_data(reference_graph: LingLamGraph) -> DataMatrix:
    return sample(reference_graph, GenConfig(seed=1, sample_size=1000))


@pytest.fixture
def make_data(reference_graph: LingLamGraph) -> Callable[..., DataMatrix]:
    def _make(graph: LingLamGraph = reference_graph, n: int = 1000, seed: int = 0, repetition: int = 0):
        return sample(graph, GenConfig(seed=seed, sample_size=n, repetition=repetition))

    return _make


@pytest.fixture
def test_config() -> TestConfig:
    return TestConfig()
