import pytest

import linglam.criteria.sample
from linglam.criteria.sample import SampleGinCriterion
from linglam.entities import DataMatrix, TestConfig
from tests.criterion import CriterionTestSuite


class TestSampleGinCriterion(CriterionTestSuite):
    @pytest.fixture(autouse=True)
    def _create_criterion(self, reference_data: DataMatrix):
        self.criterion = SampleGinCriterion(reference_data, TestConfig(alpha=0.001))

    def expected_verdict(self) -> bool:
        return True

    def test_column_kernels_are_cached(self, mocker):
        spy = mocker.spy(linglam.criteria.sample, "kernel_summary")
        self.criterion.check(z=(3, 4), y=(0, 1, 2))
        self.criterion.check(z=(3, 4), y=(0, 1, 5))
        assert spy.call_count == 2

    def test_omega_is_reported(self):
        result = self.criterion.check(z=(3, 4), y=(0, 1, 2))
        assert result.omega is not None
        assert result.omega.omega.shape == (3,)
        assert result.omega.omega[0] > 0
