"""Numerical primitives shared by the GIN tests and the population oracle."""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import chi2, gamma

from linglam.entities import DataMatrix, KernelWidthRule, OmegaSolution, PValueMethod, TestConfig
from linglam.errors import (
    ColumnOutOfRange,
    EmptyColumnSet,
    OverlappingColumns,
    ScalarSurrogateUndefined,
    SingularCovariance,
    TooFewSamples,
)

logger = logging.getLogger(__name__)

MAX_CONDITION_NUMBER = 1e12
MEDIAN_HEURISTIC_ROWS = 100
MIN_GAMMA_SAMPLES = 20
EMPIRICAL_WIDTHS = ((200, 0.8), (1200, 0.5), (float("inf"), 0.3))


@dataclass(frozen=True)
class HsicResult:
    p_value: float
    statistic: float
    degenerate: bool = False


@dataclass(frozen=True)
class CombinedPValue:
    p_value: float
    statistic: float
    clamped: bool = False


@dataclass(frozen=True, eq=False)
class Regression:
    residual: np.ndarray
    coefficients: np.ndarray


@dataclass(frozen=True, eq=False)
class KernelSummary:
    """Centered Gram matrix of one HSIC argument, reusable across tests."""

    centered: np.ndarray
    off_diagonal_mean: float
    degenerate: bool


def check_columns(data: DataMatrix, columns: Iterable[int], role: str) -> Tuple[int, ...]:
    result = tuple(int(c) for c in columns)
    if not result:
        raise EmptyColumnSet(role)
    for c in result:
        if not 0 <= c < data.width:
            raise ColumnOutOfRange(c, data.width)
    return result


def cross_covariance(
    data: DataMatrix,
    y_cols: Iterable[int],
    z_cols: Iterable[int],
    allow_overlap: bool = False,
) -> np.ndarray:
    """Sample cross-covariance `Σ̂_YZ` with the `1/(N-1)` normalization."""
    y = check_columns(data, y_cols, "Y")
    z = check_columns(data, z_cols, "Z")
    if not allow_overlap and set(y) & set(z):
        raise OverlappingColumns(set(y) & set(z))
    centered = data.centered()
    return centered[:, y].T @ centered[:, z] / (data.n_samples - 1)


def omega_from_covariance(sigma: np.ndarray, tolerance: float = 1e-8) -> OmegaSolution:
    """Unit vector spanning the direction of least `ωᵀΣ`, sign-canonicalized."""
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    dim_y = sigma.shape[0]
    if not np.any(sigma):
        omega = np.zeros(dim_y)
        omega[0] = 1.0
        return OmegaSolution(omega=omega, residual_singular_value=0.0, null_dim=dim_y, degenerate=True)

    u, singular_values, _ = np.linalg.svd(sigma, full_matrices=True)
    # Y directions beyond Dim(Z) are structural zeros.
    spectrum = np.zeros(dim_y)
    spectrum[: singular_values.size] = singular_values
    null_dim = int(np.sum(spectrum <= tolerance * spectrum[0]))
    omega = canonical_sign(u[:, -1])
    return OmegaSolution(
        omega=omega,
        residual_singular_value=float(np.linalg.norm(omega @ sigma)),
        null_dim=null_dim,
    )


def canonical_sign(vector: np.ndarray) -> np.ndarray:
    nonzero = np.flatnonzero(np.abs(vector) > 1e-12)
    if nonzero.size and vector[nonzero[0]] < 0:
        return -vector
    return vector


def estimate_omega(
    data: DataMatrix,
    y_cols: Sequence[int],
    z_cols: Sequence[int],
    config: TestConfig,
    allow_overlap: bool = False,
) -> OmegaSolution:
    sigma = cross_covariance(data, y_cols, z_cols, allow_overlap=allow_overlap)
    if sigma.shape[0] == 1 and np.any(sigma):
        raise ScalarSurrogateUndefined()
    return omega_from_covariance(sigma, config.svd_tolerance)


def _as_columns(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, 1) if x.ndim == 1 else x


def _squared_distances(x: np.ndarray) -> np.ndarray:
    norms = np.sum(x * x, axis=1)
    return np.maximum(norms[:, None] + norms[None, :] - 2 * x @ x.T, 0.0)


def median_width(x: np.ndarray) -> float:
    """Median heuristic over the leading rows: `sqrt(median(d²)/2)` of positive distances."""
    head = _as_columns(x)[:MEDIAN_HEURISTIC_ROWS]
    distances = _squared_distances(head)
    positive = distances[np.triu_indices_from(distances, k=1)]
    positive = positive[positive > 0]
    if positive.size == 0:
        return 1.0
    return float(np.sqrt(0.5 * np.median(positive)))


def empirical_width(n: int, dim: int = 1) -> float:
    """Width in standard deviations for `n` rows of a `dim`-column argument."""
    base = next(width for limit, width in EMPIRICAL_WIDTHS if n < limit)
    return base * float(np.sqrt(dim))


def standardize(x: np.ndarray) -> np.ndarray:
    """Center every column and scale it to unit variance; constant columns are only centered."""
    x = _as_columns(x)
    std = x.std(axis=0, ddof=1)
    return (x - x.mean(axis=0)) / np.where(std > 0, std, 1.0)


def kernel_width(x: np.ndarray, config: TestConfig) -> float:
    if config.kernel_width is not None:
        return config.kernel_width
    if config.width_rule == KernelWidthRule.MEDIAN:
        return median_width(x)
    return empirical_width(*x.shape)


def kernel_summary(x: np.ndarray, config: TestConfig) -> KernelSummary:
    x = _as_columns(x)
    if config.hsic_max_samples is not None:
        x = x[: config.hsic_max_samples]
    n = x.shape[0]
    if np.all(np.ptp(x, axis=0) <= 1e-12 * max(1.0, float(np.abs(x).max()))):
        return KernelSummary(centered=np.zeros((n, n)), off_diagonal_mean=1.0, degenerate=True)
    x = standardize(x)
    width = kernel_width(x, config)
    gram = np.exp(-_squared_distances(x) / (2 * width**2))
    row_mean = gram.mean(axis=0)
    centered = gram - row_mean[None, :] - row_mean[:, None] + gram.mean()
    off_diagonal_mean = (gram.sum() - np.trace(gram)) / n / (n - 1)
    return KernelSummary(centered=centered, off_diagonal_mean=float(off_diagonal_mean), degenerate=False)


def hsic_from_summaries(kx: KernelSummary, ky: KernelSummary, config: TestConfig) -> HsicResult:
    n = kx.centered.shape[0]
    if ky.centered.shape[0] != n:
        raise ValueError(f"HSIC arguments differ in length: {n} and {ky.centered.shape[0]}")
    if kx.degenerate or ky.degenerate:
        return HsicResult(p_value=1.0, statistic=0.0, degenerate=True)
    statistic = float(np.sum(kx.centered * ky.centered) / n)

    if config.pvalue_method == PValueMethod.PERMUTATION:
        rng = np.random.Generator(np.random.Philox(config.seed))
        exceed = 0
        for _ in range(config.permutations):
            p = rng.permutation(n)
            if np.sum(kx.centered * ky.centered[p][:, p]) / n >= statistic:
                exceed += 1
        return HsicResult(p_value=(1 + exceed) / (1 + config.permutations), statistic=statistic)

    if n < MIN_GAMMA_SAMPLES:
        raise TooFewSamples(n, MIN_GAMMA_SAMPLES)
    variance = (kx.centered * ky.centered / 6) ** 2
    variance = (variance.sum() - np.trace(variance)) / n / (n - 1)
    variance = variance * 72 * (n - 4) * (n - 5) / n / (n - 1) / (n - 2) / (n - 3)
    mu_x, mu_y = kx.off_diagonal_mean, ky.off_diagonal_mean
    mean = (1 + mu_x * mu_y - mu_x - mu_y) / n
    if variance <= 0 or mean <= 0:
        return HsicResult(p_value=1.0, statistic=statistic, degenerate=True)
    shape = mean**2 / variance
    scale = variance * n / mean
    return HsicResult(p_value=float(gamma.sf(statistic, shape, scale=scale)), statistic=statistic)


def hsic_pvalue(x: np.ndarray, y: np.ndarray, config: TestConfig) -> HsicResult:
    """
    HSIC test of the null "x is independent of y" with Gaussian kernels.

    Both arguments are standardized and get their own kernel width
    (`config.kernel_width`, or one chosen by `config.width_rule`). The null
    distribution is a two-moment gamma fit by default, or a permutation
    distribution of `config.permutations` shuffles of `y`.
    Arguments may be vectors or `N×d` matrices.
    """
    x, y = _as_columns(x), _as_columns(y)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"HSIC arguments differ in length: {x.shape[0]} and {y.shape[0]}")
    return hsic_from_summaries(kernel_summary(x, config), kernel_summary(y, config), config)


def fisher_combine(p_values: Sequence[float]) -> CombinedPValue:
    """Fisher's method: `-2 Σ ln pᵢ` against χ² with `2c` degrees of freedom."""
    if len(p_values) == 0:
        raise ValueError("no p-values to combine")
    tiny = np.finfo(float).tiny
    clamped = False
    logs = []
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value out of range: {p}")
        if p == 0.0:
            p, clamped = tiny, True
        logs.append(math.log(p))
    statistic = -2.0 * math.fsum(logs)
    return CombinedPValue(
        p_value=float(chi2.sf(statistic, 2 * len(p_values))),
        statistic=statistic,
        clamped=clamped,
    )


def ols_residual(data: DataMatrix, z_cols: Sequence[int], y_col: int) -> Regression:
    z = check_columns(data, z_cols, "Z")
    (y,) = check_columns(data, [y_col], "Y")
    centered = data.centered()
    zc, yc = centered[:, z], centered[:, y]
    szz = zc.T @ zc / (data.n_samples - 1)
    condition = float(np.linalg.cond(szz))
    if not np.isfinite(condition) or condition > MAX_CONDITION_NUMBER:
        raise SingularCovariance(condition)
    coefficients = np.linalg.solve(szz, zc.T @ yc / (data.n_samples - 1))
    return Regression(residual=yc - zc @ coefficients, coefficients=coefficients)


def numerical_rank(matrix: np.ndarray, tolerance: float = 1e-8, scale: Optional[float] = None) -> int:
    """Rank counting singular values above `tolerance·scale` (default scale: largest singular value)."""
    matrix = np.atleast_2d(matrix)
    if matrix.size == 0:
        return 0
    singular_values = np.linalg.svd(matrix, compute_uv=False)
    reference = singular_values[0] if scale is None else scale
    if reference <= 0:
        return 0
    return int(np.sum(singular_values > tolerance * reference))
