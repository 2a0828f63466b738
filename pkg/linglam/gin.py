import logging
from typing import Callable, Optional, Sequence

import numpy as np

from linglam.entities import DataMatrix, GinResult, TestConfig
from linglam.errors import OverlappingColumns
from linglam.stats import (
    KernelSummary,
    check_columns,
    estimate_omega,
    fisher_combine,
    hsic_from_summaries,
    kernel_summary,
    ols_residual,
)

logger = logging.getLogger(__name__)

KernelProvider = Callable[[int], KernelSummary]
""" Maps a column index to its kernel summary; lets callers cache Gram matrices. """

ZERO_RESIDUAL_TOLERANCE = 1e-10


def _column_kernels(data: DataMatrix, config: TestConfig) -> KernelProvider:
    centered = data.centered()
    return lambda column: kernel_summary(centered[:, column], config)


def _independence_verdict(
    data: DataMatrix,
    surrogate: np.ndarray,
    z: Sequence[int],
    config: TestConfig,
    kernel_of: Optional[KernelProvider],
):
    surrogate_kernel = kernel_summary(surrogate, config)
    if config.joint_hsic:
        joint = hsic_from_summaries(
            surrogate_kernel, kernel_summary(data.centered()[:, list(z)], config), config
        )
        label = ",".join(data.names[c] for c in z)
        pairwise = ((label, joint.p_value),)
        degenerate = joint.degenerate
    else:
        kernel_of = kernel_of or _column_kernels(data, config)
        results = [hsic_from_summaries(surrogate_kernel, kernel_of(c), config) for c in z]
        pairwise = tuple((data.names[c], r.p_value) for c, r in zip(z, results))
        degenerate = any(r.degenerate for r in results)
    combined = fisher_combine([p for _, p in pairwise])
    return pairwise, combined, degenerate or surrogate_kernel.degenerate


def gin_test(
    data: DataMatrix,
    z_cols: Sequence[int],
    y_cols: Sequence[int],
    config: TestConfig,
    kernel_of: Optional[KernelProvider] = None,
    allow_overlap: bool = False,
) -> GinResult:
    """
    Sample-level GIN test of `(Z, Y)`.

    Builds the surrogate `ωᵀY` from the smallest left singular vector of `Σ̂_YZ`
    and tests it against every Z column with HSIC, combining the p-values with
    Fisher's method.
    """
    z = check_columns(data, z_cols, "Z")
    y = check_columns(data, y_cols, "Y")
    if not allow_overlap and set(y) & set(z):
        raise OverlappingColumns(set(y) & set(z))
    omega = estimate_omega(data, y, z, config, allow_overlap=allow_overlap)
    surrogate = data.centered()[:, list(y)] @ omega.omega
    pairwise, combined, degenerate = _independence_verdict(data, surrogate, z, config, kernel_of)
    result = GinResult(
        satisfied=combined.p_value >= config.alpha,
        combined_p=combined.p_value,
        pairwise_p=pairwise,
        omega=omega,
        config_used=config,
        degenerate=degenerate or omega.degenerate,
        clamped=combined.clamped,
    )
    logger.debug(
        "GIN(Z=%s, Y=%s): p=%.4g, satisfied=%s",
        [data.names[c] for c in z],
        [data.names[c] for c in y],
        result.combined_p,
        result.satisfied,
    )
    return result


def in_test(
    data: DataMatrix,
    z_cols: Sequence[int],
    y_col: int,
    config: TestConfig,
    kernel_of: Optional[KernelProvider] = None,
) -> GinResult:
    """IN test: is the least-squares residual of Y on Z independent of Z?"""
    z = check_columns(data, z_cols, "Z")
    (y,) = check_columns(data, [y_col], "Y")
    if y in z:
        raise OverlappingColumns([y])
    regression = ols_residual(data, z, y)
    scale = float(np.linalg.norm(data.centered()[:, y]))
    if np.linalg.norm(regression.residual) <= ZERO_RESIDUAL_TOLERANCE * max(scale, 1.0):
        return GinResult(
            satisfied=True,
            combined_p=1.0,
            pairwise_p=tuple((data.names[c], 1.0) for c in z),
            omega=None,
            config_used=config,
            degenerate=True,
        )
    pairwise, combined, degenerate = _independence_verdict(
        data, regression.residual, z, config, kernel_of
    )
    return GinResult(
        satisfied=combined.p_value >= config.alpha,
        combined_p=combined.p_value,
        pairwise_p=pairwise,
        omega=None,
        config_used=config,
        degenerate=degenerate,
        clamped=combined.clamped,
    )


def gin_via_augmentation(
    data: DataMatrix, z_cols: Sequence[int], y_col: int, config: TestConfig
) -> GinResult:
    """GIN test of `(Z, Ÿ)` with `Ÿ = (Y, Z)`; its ω is proportional to `[1, -ω̃]`."""
    z = check_columns(data, z_cols, "Z")
    return gin_test(data, z, (int(y_col),) + z, config, allow_overlap=True)
