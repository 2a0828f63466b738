import functools
from typing import Sequence, Tuple

from linglam.criterion import GinCriterion
from linglam.entities import DataMatrix, GinResult, TestConfig
from linglam.gin import gin_test
from linglam.stats import KernelSummary, hsic_from_summaries, kernel_summary

KERNEL_CACHE_SIZE = 8


class SampleGinCriterion(GinCriterion):
    """Statistical GIN tests on a data matrix, caching the Gram matrices of single columns."""

    def __init__(self, data: DataMatrix, config: TestConfig):
        super().__init__(config)
        self.data = data
        self._centered = data.centered()
        self._kernel = functools.lru_cache(maxsize=KERNEL_CACHE_SIZE)(self._compute_kernel)

    @property
    def names(self) -> Tuple[str, ...]:
        return self.data.names

    def _compute_kernel(self, column: int) -> KernelSummary:
        return kernel_summary(self._centered[:, column], self.config)

    def evaluate(self, z: Sequence[int], y: Sequence[int]) -> GinResult:
        return gin_test(self.data, z, y, self.config, kernel_of=self._kernel)

    def dependent(self, first: int, second: int) -> bool:
        result = hsic_from_summaries(self._kernel(first), self._kernel(second), self.config)
        return not result.degenerate and result.p_value < self.config.alpha
