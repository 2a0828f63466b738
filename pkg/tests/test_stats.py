import numpy as np
import pytest

from linglam.entities import DataMatrix, KernelWidthRule, PValueMethod, TestConfig
from linglam.errors import (
    ColumnOutOfRange,
    EmptyColumnSet,
    OverlappingColumns,
    ScalarSurrogateUndefined,
    SingularCovariance,
    TooFewSamples,
)
from linglam.stats import (
    cross_covariance,
    empirical_width,
    estimate_omega,
    fisher_combine,
    hsic_pvalue,
    kernel_summary,
    median_width,
    numerical_rank,
    ols_residual,
    omega_from_covariance,
    standardize,
)


def _data(columns, names=None) -> DataMatrix:
    values = np.column_stack(columns)
    return DataMatrix(values=values, names=names or tuple(f"c{i}" for i in range(values.shape[1])))


def test_fisher_combination():
    assert fisher_combine([0.5, 0.5]).p_value == pytest.approx(0.5966, abs=1e-4)
    assert fisher_combine([0.05]).p_value == pytest.approx(0.05)
    assert fisher_combine([1.0, 1.0]).p_value == pytest.approx(1.0)


def test_fisher_clamps_zero():
    result = fisher_combine([0.0, 0.5])
    assert result.clamped
    assert 0.0 <= result.p_value < 1e-100
    assert not fisher_combine([0.5]).clamped


def test_fisher_is_monotone():
    rng = np.random.default_rng(11)
    for _ in range(100):
        p_values = list(rng.uniform(1e-6, 1.0, size=int(rng.integers(1, 6))))
        combined = fisher_combine(p_values).p_value
        for i in range(len(p_values)):
            smaller = list(p_values)
            smaller[i] *= rng.uniform(0.0, 0.9)
            assert fisher_combine(smaller).p_value <= combined


def test_fisher_rejects_bad_input():
    with pytest.raises(ValueError):
        fisher_combine([])
    with pytest.raises(ValueError):
        fisher_combine([1.5])


def test_omega_of_rank_deficient_covariance():
    a, b = np.array([1.0, 2.0, 3.0]), np.array([1.0, 1.0, 2.0])
    sigma = np.column_stack([a, b]) @ np.array([[2.0, 0.5], [0.3, 1.0]])
    solution = omega_from_covariance(sigma)
    assert solution.omega == pytest.approx(np.array([1.0, 1.0, -1.0]) / np.sqrt(3))
    assert solution.null_dim == 1
    assert solution.residual_singular_value == pytest.approx(0.0, abs=1e-12)
    assert not solution.degenerate


def test_omega_counts_structural_zeros():
    solution = omega_from_covariance(np.array([[1.0], [2.0], [0.5]]))
    assert solution.null_dim == 2
    assert np.linalg.norm(solution.omega) == pytest.approx(1.0)


def test_omega_of_zero_covariance_is_degenerate():
    solution = omega_from_covariance(np.zeros((2, 3)))
    assert solution.degenerate
    assert solution.null_dim == 2
    assert list(solution.omega) == [1.0, 0.0]


def test_omega_is_scale_equivariant():
    a, b = np.array([1.0, 2.0, 3.0]), np.array([1.0, 1.0, 2.0])
    sigma = np.column_stack([a, b])
    d = np.array([2.0, 0.5, 4.0])
    scaled = omega_from_covariance(d[:, None] * sigma).omega
    expected = np.linalg.solve(np.diag(d), omega_from_covariance(sigma).omega)
    assert scaled == pytest.approx(expected / np.linalg.norm(expected))


def test_scalar_surrogate_needs_zero_covariance():
    rng = np.random.default_rng(0)
    z = rng.uniform(-1, 1, 200)
    data = _data([z, 2 * z + rng.uniform(-1, 1, 200)])
    with pytest.raises(ScalarSurrogateUndefined):
        estimate_omega(data, [1], [0], TestConfig())


def test_column_checks():
    data = _data([np.arange(5.0), np.arange(5.0) ** 2])
    with pytest.raises(EmptyColumnSet):
        cross_covariance(data, [], [0])
    with pytest.raises(ColumnOutOfRange):
        cross_covariance(data, [0], [2])
    with pytest.raises(OverlappingColumns):
        cross_covariance(data, [0, 1], [1])
    assert cross_covariance(data, [0, 1], [1], allow_overlap=True).shape == (2, 1)


def test_ols_residual_recovers_coefficients():
    rng = np.random.default_rng(1)
    z = rng.uniform(-1, 1, (500, 2))
    y = z @ np.array([1.5, -0.5])
    regression = ols_residual(_data([z[:, 0], z[:, 1], y]), [0, 1], 2)
    assert regression.coefficients == pytest.approx([1.5, -0.5])
    assert np.abs(regression.residual).max() < 1e-10


def test_ols_residual_on_singular_z():
    z = np.random.default_rng(2).uniform(-1, 1, 100)
    with pytest.raises(SingularCovariance):
        ols_residual(_data([z, z, 3 * z]), [0, 1], 2)


def test_hsic_detects_nonlinear_dependence():
    x = np.random.default_rng(3).uniform(-1, 1, 300)
    assert hsic_pvalue(x, x**2, TestConfig()).p_value < 1e-3


def test_hsic_permutation_p_value_bounds():
    rng = np.random.default_rng(4)
    x, y = rng.uniform(-1, 1, 100), rng.uniform(-1, 1, 100)
    config = TestConfig(pvalue_method=PValueMethod.PERMUTATION, permutations=99)
    result = hsic_pvalue(x, y, config)
    assert 1 / 100 <= result.p_value <= 1.0
    assert hsic_pvalue(x, y, config).p_value == result.p_value
    assert hsic_pvalue(x, x**2, config).p_value == pytest.approx(1 / 100)


def test_hsic_null_rejection_rate():
    rng = np.random.default_rng(5)
    rejections = sum(
        hsic_pvalue(rng.uniform(-1, 1, 200), rng.uniform(-1, 1, 200), TestConfig()).p_value < 0.05
        for _ in range(60)
    )
    assert rejections <= 12


@pytest.mark.parametrize("rule", list(KernelWidthRule))
def test_hsic_gamma_is_symmetric(rule):
    rng = np.random.default_rng(12)
    x = rng.uniform(-1, 1, 300)
    y = 0.3 * x + rng.uniform(-1, 1, 300) ** 5
    config = TestConfig(width_rule=rule)
    forward, backward = hsic_pvalue(x, y, config), hsic_pvalue(y, x, config)
    assert forward.statistic == pytest.approx(backward.statistic, rel=1e-12)
    assert forward.p_value == pytest.approx(backward.p_value, rel=1e-9, abs=1e-300)


def test_hsic_is_scale_free():
    rng = np.random.default_rng(13)
    x, y = rng.uniform(-1, 1, 200), rng.uniform(-1, 1, 200)
    y = y + x**2
    config = TestConfig()
    assert hsic_pvalue(1000.0 * x, -0.01 * y, config).p_value == pytest.approx(
        hsic_pvalue(x, y, config).p_value, rel=1e-6
    )


@pytest.mark.slow
def test_gamma_approximation_matches_permutations():
    rng = np.random.default_rng(14)
    gamma_config = TestConfig()
    permutation_config = TestConfig(pvalue_method=PValueMethod.PERMUTATION, permutations=500)
    gamma_rejections = permutation_rejections = 0
    trials = 1000
    for _ in range(trials):
        x, y = rng.uniform(-1, 1, 200), rng.uniform(-1, 1, 200) ** 5
        gamma_rejections += hsic_pvalue(x, y, gamma_config).p_value < 0.05
        permutation_rejections += hsic_pvalue(x, y, permutation_config).p_value < 0.05
    assert abs(gamma_rejections - permutation_rejections) / trials <= 0.03


def test_hsic_constant_input_is_degenerate():
    result = hsic_pvalue(np.ones(50), np.arange(50.0), TestConfig())
    assert result.degenerate
    assert result.p_value == 1.0


def test_gamma_needs_enough_samples():
    with pytest.raises(TooFewSamples) as excinfo:
        hsic_pvalue(np.arange(10.0), np.arange(10.0) ** 2, TestConfig())
    assert (excinfo.value.count, excinfo.value.minimum) == (10, 20)


def test_permutations_work_on_few_samples():
    config = TestConfig(pvalue_method=PValueMethod.PERMUTATION, permutations=50)
    result = hsic_pvalue(np.arange(10.0), np.arange(10.0) ** 2, config)
    assert 0.0 < result.p_value <= 1.0


def test_kernel_summary_truncates_rows():
    x = np.random.default_rng(6).normal(size=100)
    assert kernel_summary(x, TestConfig(hsic_max_samples=20)).centered.shape == (20, 20)
    assert kernel_summary(x, TestConfig(hsic_max_samples=None)).centered.shape == (100, 100)


def test_median_width():
    assert median_width(np.ones(10)) == 1.0
    assert median_width(np.array([0.0, 2.0])) == pytest.approx(np.sqrt(2.0))


def test_empirical_width():
    assert empirical_width(100) == 0.8
    assert empirical_width(200) == 0.5
    assert empirical_width(1199) == 0.5
    assert empirical_width(2000) == 0.3
    assert empirical_width(2000, 4) == pytest.approx(0.6)


def test_standardize():
    x = np.column_stack([np.arange(5.0) * 3 + 1, np.full(5, 2.0)])
    scaled = standardize(x)
    assert scaled[:, 0].mean() == pytest.approx(0.0)
    assert scaled[:, 0].std(ddof=1) == pytest.approx(1.0)
    assert np.all(scaled[:, 1] == 0.0)


def test_kernel_width_rules():
    x = np.random.default_rng(15).standard_t(3, size=300)
    median = kernel_summary(x, TestConfig(width_rule=KernelWidthRule.MEDIAN))
    fixed = kernel_summary(x, TestConfig(kernel_width=median_width(standardize(x))))
    assert np.allclose(median.centered, fixed.centered)
    empirical = kernel_summary(x, TestConfig())
    assert np.allclose(empirical.centered, kernel_summary(x, TestConfig(kernel_width=0.5)).centered)


def test_numerical_rank():
    assert numerical_rank(np.outer([1.0, 2.0], [3.0, 4.0])) == 1
    assert numerical_rank(np.eye(3)) == 3
    assert numerical_rank(np.zeros((2, 2))) == 0
