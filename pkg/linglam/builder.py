import logging
from typing import Optional

from linglam.criterion import GinCriterion
from linglam.discovery import StructureLearner
from linglam.entities import DataMatrix, DiscoveryResult, LingLamGraph, TestConfig
from linglam.errors import NoDataSpecified

logger = logging.getLogger(__name__)


class Builder:
    """Provides a simple interface for assembling a discovery run
    from a data source, a test configuration and execution settings."""

    def __init__(self) -> None:
        self._data: Optional[DataMatrix] = None
        self._graph: Optional[LingLamGraph] = None
        self._criterion: Optional[GinCriterion] = None
        self._config: Optional[TestConfig] = None
        self._threads: Optional[int] = 1
        self._trace = False

        self._learner: Optional[StructureLearner] = None

    def _check_no_source(self, what: str):
        existing = self._data or self._graph or self._criterion
        if existing is not None:
            raise ValueError(f"can't use {what} — already configured {type(existing).__name__}")

    def with_sample_data(self, data: DataMatrix) -> "Builder":
        """Run statistical GIN tests on a [data matrix][linglam.entities.DataMatrix]."""
        self._check_no_source("sample data")
        self._data = data
        return self

    def with_population_graph(self, graph: LingLamGraph) -> "Builder":
        """Run exact GIN decisions read off a known [graph][linglam.entities.LingLamGraph]."""
        self._check_no_source("population graph")
        self._graph = graph
        return self

    def with_criterion(self, criterion: GinCriterion) -> "Builder":
        """Configure arbitrary [GinCriterion][linglam.criterion.GinCriterion] instance."""
        self._check_no_source(type(criterion).__name__)
        self._criterion = criterion
        return self

    def with_test_config(self, config: TestConfig) -> "Builder":
        if self._config is not None:
            raise ValueError("can't use test config — already configured another one")
        self._config = config
        return self

    def with_threads(self, threads: Optional[int]) -> "Builder":
        """Number of worker threads; `None` uses all available cores."""
        if threads is not None and threads < 1:
            raise ValueError(f"thread count must be positive, got {threads}")
        self._threads = threads
        return self

    def with_trace(self, enabled: bool = True) -> "Builder":
        self._trace = enabled
        return self

    def build(self) -> "Builder":
        """Instantiate the configured criterion and raise exception if misconfigured."""
        if self._learner is not None:
            return self
        criterion = self._build_criterion()
        logger.info("Initializing structure learner on %s", type(criterion).__name__)
        self._learner = StructureLearner(criterion, self._threads)
        return self

    def _build_criterion(self) -> GinCriterion:
        config = self._config or TestConfig()
        if self._criterion is not None:
            if self._config is not None and self._config != self._criterion.config:
                raise ValueError("can't use test config — criterion is already configured")
            return self._criterion
        if self._data is not None:
            from linglam.criteria.sample import SampleGinCriterion

            return SampleGinCriterion(self._data, config)
        if self._graph is not None:
            from linglam.criteria.population import PopulationGinCriterion

            return PopulationGinCriterion(self._graph, config)
        raise NoDataSpecified()

    def run(self) -> DiscoveryResult:
        """Build if necessary and run the full discovery pipeline."""
        self.build()
        assert self._learner is not None
        return self._learner.discover(trace=self._trace)
