import abc
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from linglam.entities import GinResult, TestConfig, TraceEntry
from linglam.helpers import parallel_map
from linglam.observer import LocalObservable, Observable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GinRequest:
    """One GIN test to run: column indices of Z and Y plus a label for the trace."""

    z: Tuple[int, ...]
    y: Tuple[int, ...]
    description: str = ""


class GinCriterion(abc.ABC):
    """
    Decides the GIN condition for column subsets of one fixed set of observed variables.

    Structure discovery only ever talks to a criterion, so the same search runs
    on sampled data ([SampleGinCriterion][linglam.criteria.sample.SampleGinCriterion])
    or on a known graph ([PopulationGinCriterion][linglam.criteria.population.PopulationGinCriterion]).
    Every executed test is published through `on_test`.
    """

    def __init__(self, config: TestConfig):
        self.config = config
        self.on_test: Observable[TraceEntry] = LocalObservable()

    @property
    @abc.abstractmethod
    def names(self) -> Tuple[str, ...]:
        """Names of the observed variables, in column order."""

    @abc.abstractmethod
    def evaluate(self, z: Sequence[int], y: Sequence[int]) -> GinResult:
        """Run one GIN test of `(Z, Y)` without publishing it."""

    @abc.abstractmethod
    def dependent(self, first: int, second: int) -> bool:
        """Whether two columns are dependent; used to reject vacuous clusters."""

    @property
    def width(self) -> int:
        return len(self.names)

    def check(self, z: Sequence[int], y: Sequence[int], description: str = "") -> GinResult:
        return self.check_many([GinRequest(tuple(z), tuple(y), description)])[0]

    def check_many(self, requests: Sequence[GinRequest], threads: Optional[int] = 1) -> List[GinResult]:
        """Run tests, possibly concurrently; results and trace events keep request order."""
        results = parallel_map(lambda r: self.evaluate(r.z, r.y), requests, threads)
        logger.debug("ran %d GIN tests with %s threads", len(requests), threads or "all")
        self.on_test.trigger_batch(
            [
                TraceEntry(
                    description=request.description,
                    z=tuple(self.names[c] for c in request.z),
                    y=tuple(self.names[c] for c in request.y),
                    result=result,
                )
                for request, result in zip(requests, results)
            ]
        )
        return results
