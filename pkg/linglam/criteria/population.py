from typing import Optional, Sequence, Tuple

from linglam.criterion import GinCriterion
from linglam.entities import GinResult, LingLamGraph, TestConfig
from linglam.oracle import dependent, exact_gin


class PopulationGinCriterion(GinCriterion):
    """
    Exact GIN decisions read off a known graph.

    Column `i` is the `i`-th observed variable of the graph. Verdicts carry a
    combined p-value of 1 when GIN holds and 0 when it does not.
    """

    def __init__(self, graph: LingLamGraph, config: Optional[TestConfig] = None):
        super().__init__(config or TestConfig())
        self.graph = graph

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(ref.name for ref in self.graph.observed)

    def evaluate(self, z: Sequence[int], y: Sequence[int]) -> GinResult:
        decision = exact_gin(
            self.graph, [self.graph.observed[c] for c in z], [self.graph.observed[c] for c in y]
        )
        p = 1.0 if decision.satisfied else 0.0
        return GinResult(
            satisfied=decision.satisfied,
            combined_p=p,
            pairwise_p=tuple((self.names[c], p) for c in z),
            omega=None,
            config_used=self.config,
            certificate=decision.certificate,
        )

    def dependent(self, first: int, second: int) -> bool:
        return dependent(self.graph, self.graph.observed[first], self.graph.observed[second])
