import math
from dataclasses import dataclass, field
from enum import Enum
from typing import FrozenSet, Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from linglam.errors import (
    DuplicateColumn,
    InvalidConfiguration,
    NonNumericCell,
    TooFewRows,
    UnknownVariable,
)


class VariableKind(str, Enum):
    """Enumeration describing whether a [variable][linglam.entities.VariableRef] is measured."""

    LATENT = "latent"
    OBSERVED = "observed"


@dataclass(frozen=True, order=True)
class VariableRef:
    """
    Reference to a single variable of a [graph][linglam.entities.LingLamGraph]
    or to a single column of a [data matrix][linglam.entities.DataMatrix].

    Attributes:
        index: position in the global index space. Within a graph latent variables
               come first, so `index < len(graph.latents)` iff the variable is latent.
               For variables referring to data columns it is the column position.
        name: identifier unique within a graph or data matrix.
        kind: latent or observed.
    """

    index: int
    name: str
    kind: VariableKind = VariableKind.OBSERVED


class NoiseFamily(str, Enum):
    """Enumeration describing the distribution family of an exogenous noise term."""

    UNIFORM_POWER = "uniform_power"
    """ sign(u)·|u|^p for u ~ U[-1, 1]. """
    UNIFORM = "uniform"
    """ U[-w, w]. """
    CUSTOM = "custom"
    """ Inverse-CDF interpolation of an evenly spaced quantile table. """
    GAUSSIAN = "gaussian"
    """ Only representable so that Gaussian models can be described and rejected. """


@dataclass(frozen=True)
class NoiseSpec:
    """
    Describes the distribution of one exogenous noise term.

    Every family yields a zero-mean variable; `scale` multiplies the base draw.

    Attributes:
        family: distribution family.
        exponent: exponent `p` of the `UNIFORM_POWER` family.
        width: half-range of the `UNIFORM` family, standard deviation of the `GAUSSIAN` one.
        quantiles: quantile table of the `CUSTOM` family, at probabilities
                   `0, 1/(q-1), ..., 1`.
        scale: positive multiplier applied to every draw.
    """

    family: NoiseFamily
    exponent: float = 5.0
    width: float = 1.0
    quantiles: Tuple[float, ...] = ()
    scale: float = 1.0

    def __post_init__(self):
        if self.exponent <= 0 or self.width <= 0 or self.scale <= 0:
            raise InvalidConfiguration(f"noise parameters must be positive, got {self}")
        if self.family == NoiseFamily.CUSTOM:
            table = np.asarray(self.quantiles, dtype=float)
            if table.size < 2 or np.any(np.diff(table) < 0) or table[0] == table[-1]:
                raise InvalidConfiguration(
                    "custom noise needs a non-decreasing, non-constant quantile table"
                )
            if abs(self.moment(1)) > 1e-9 * max(1.0, float(np.abs(table).max())):
                raise InvalidConfiguration("custom noise quantile table must have zero mean")

    @classmethod
    def uniform_power(cls, exponent: float = 5.0) -> "NoiseSpec":
        return cls(family=NoiseFamily.UNIFORM_POWER, exponent=exponent)

    @classmethod
    def uniform(cls, width: float = 1.0) -> "NoiseSpec":
        return cls(family=NoiseFamily.UNIFORM, width=width)

    @classmethod
    def gaussian(cls, sd: float = 1.0) -> "NoiseSpec":
        return cls(family=NoiseFamily.GAUSSIAN, width=sd)

    @classmethod
    def custom(cls, quantiles: Sequence[float]) -> "NoiseSpec":
        """Build a custom family from a quantile table, shifting it to zero mean."""
        table = np.asarray(quantiles, dtype=float)
        if table.size < 2:
            raise InvalidConfiguration("custom noise needs at least two quantiles")
        mean = _piecewise_linear_moment(table, 1)
        return cls(family=NoiseFamily.CUSTOM, quantiles=tuple(float(q) for q in table - mean))

    @property
    def is_gaussian(self) -> bool:
        return self.family == NoiseFamily.GAUSSIAN

    def moment(self, order: int) -> float:
        """Raw moment `E[x^order]` of the scaled distribution."""
        if order < 0:
            raise ValueError("moment order must be non-negative")
        if order == 0:
            return 1.0
        factor = self.scale**order
        if self.family == NoiseFamily.CUSTOM:
            return factor * _piecewise_linear_moment(np.asarray(self.quantiles), order)
        if order % 2 == 1:
            return 0.0
        if self.family == NoiseFamily.UNIFORM_POWER:
            return factor / (order * self.exponent + 1)
        if self.family == NoiseFamily.UNIFORM:
            return factor * self.width**order / (order + 1)
        double_factorial = math.prod(range(order - 1, 0, -2))
        return factor * self.width**order * double_factorial

    @property
    def variance(self) -> float:
        return self.moment(2) - self.moment(1) ** 2

    @property
    def excess_kurtosis(self) -> float:
        mean = self.moment(1)
        central4 = (
            self.moment(4)
            - 4 * mean * self.moment(3)
            + 6 * mean**2 * self.moment(2)
            - 3 * mean**4
        )
        return central4 / self.variance**2 - 3.0

    def rescaled(self, factor: float) -> "NoiseSpec":
        return NoiseSpec(
            family=self.family,
            exponent=self.exponent,
            width=self.width,
            quantiles=self.quantiles,
            scale=self.scale * factor,
        )


def _piecewise_linear_moment(table: np.ndarray, order: int) -> float:
    # Integral of q(t)^order over [0, 1] for q linear between evenly spaced knots.
    step = 1.0 / (table.size - 1)
    a, b = table[:-1], table[1:]
    flat = np.isclose(a, b, rtol=0.0, atol=1e-15)
    safe = np.where(flat, 1.0, b - a)
    sloped = (b ** (order + 1) - a ** (order + 1)) / ((order + 1) * safe)
    return float(step * np.sum(np.where(flat, a**order, sloped)))


@dataclass(frozen=True, eq=False)
class LingLamGraph:
    """
    Full generative model: an acyclic linear structural equation model over
    latent and observed variables with non-Gaussian noise.

    Graphs are immutable; the coefficient matrix is stored read-only.

    Attributes:
        latents: latent variables, occupying indices `0..n-1`.
        observed: observed variables, occupying indices `n..n+m-1`.
        coefficients: `(n+m)×(n+m)` matrix, entry `(i, j)` is the causal strength from `j` to `i`.
        noise: per-variable noise distribution, in index order.
        causal_order: permutation of all variable indices, causes before effects.
    """

    latents: Tuple[VariableRef, ...]
    observed: Tuple[VariableRef, ...]
    coefficients: np.ndarray
    noise: Tuple[NoiseSpec, ...]
    causal_order: Tuple[int, ...]

    def __post_init__(self):
        size = len(self.latents) + len(self.observed)
        matrix = np.array(self.coefficients, dtype=float)
        if matrix.shape != (size, size):
            raise InvalidConfiguration(
                f"coefficient matrix has shape {matrix.shape}, expected {(size, size)}"
            )
        if len(self.noise) != size:
            raise InvalidConfiguration(f"expected {size} noise specs, got {len(self.noise)}")
        if sorted(self.causal_order) != list(range(size)):
            raise InvalidConfiguration("causal order is not a permutation of the variables")
        for position, ref in enumerate(self.variables):
            expected = VariableKind.LATENT if position < len(self.latents) else VariableKind.OBSERVED
            if ref.index != position or ref.kind != expected:
                raise InvalidConfiguration(f"variable {ref} is misplaced at position {position}")
        names = [ref.name for ref in self.variables]
        if len(set(names)) != len(names):
            raise InvalidConfiguration(f"variable names are not unique: {names}")
        matrix.setflags(write=False)
        object.__setattr__(self, "coefficients", matrix)

    @property
    def variables(self) -> Tuple[VariableRef, ...]:
        return self.latents + self.observed

    @property
    def size(self) -> int:
        return len(self.latents) + len(self.observed)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(ref.name for ref in self.variables)

    def ref(self, variable: Union[str, int, VariableRef]) -> VariableRef:
        """Resolve a name, index or reference to the graph's own reference."""
        if isinstance(variable, VariableRef):
            candidate = self._lookup(variable.index)
            if candidate is None or candidate != variable:
                raise UnknownVariable(variable.name)
            return candidate
        if isinstance(variable, (int, np.integer)):
            candidate = self._lookup(int(variable))
            if candidate is None:
                raise UnknownVariable(variable)
            return candidate
        for ref in self.variables:
            if ref.name == variable:
                return ref
        raise UnknownVariable(variable)

    def _lookup(self, index: int) -> Optional[VariableRef]:
        if 0 <= index < self.size:
            return self.variables[index]
        return None

    def parents(self, variable: Union[str, int, VariableRef]) -> Tuple[VariableRef, ...]:
        index = self.ref(variable).index
        return tuple(self.variables[j] for j in np.flatnonzero(self.coefficients[index]))

    def edges(self) -> Iterator[Tuple[VariableRef, VariableRef, float]]:
        """Iterate over `(cause, effect, coefficient)` triples in index order."""
        for i, j in zip(*np.nonzero(self.coefficients)):
            yield self.variables[j], self.variables[i], float(self.coefficients[i, j])


@dataclass(frozen=True)
class CausalCluster:
    """
    Set of observed variables sharing the same set of latent direct causes.

    Attributes:
        members: observed variables of the cluster.
        latent_dim: number of latent variables behind the cluster.
    """

    members: FrozenSet[VariableRef]
    latent_dim: int

    def __post_init__(self):
        if self.latent_dim < 1:
            raise InvalidConfiguration(f"latent dimension must be positive, got {self.latent_dim}")
        if len(self.members) < self.latent_dim + 1:
            raise InvalidConfiguration(
                f"a cluster with {self.latent_dim} latent variables needs at least "
                f"{self.latent_dim + 1} members, got {len(self.members)}"
            )

    @property
    def sorted_members(self) -> Tuple[VariableRef, ...]:
        return tuple(sorted(self.members))

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(ref.name for ref in self.sorted_members)

    @property
    def indices(self) -> Tuple[int, ...]:
        return tuple(ref.index for ref in self.sorted_members)


@dataclass(frozen=True)
class CausalOrder:
    """Sequence of cluster identifiers, root latent set first."""

    sequence: Tuple[int, ...] = ()

    def __post_init__(self):
        if len(set(self.sequence)) != len(self.sequence):
            raise InvalidConfiguration(f"causal order repeats clusters: {self.sequence}")

    def __len__(self) -> int:
        return len(self.sequence)

    def __iter__(self) -> Iterator[int]:
        return iter(self.sequence)


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """
    `N×m` sample matrix with named columns.

    Attributes:
        values: finite real values, one row per sample; stored read-only.
        names: column identifiers.
    """

    values: np.ndarray
    names: Tuple[str, ...]

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise InvalidConfiguration(f"data must be two-dimensional, got shape {values.shape}")
        if values.shape[0] < 2:
            raise TooFewRows(values.shape[0])
        names = tuple(str(name) for name in self.names)
        if len(names) != values.shape[1]:
            raise InvalidConfiguration(
                f"got {len(names)} column names for {values.shape[1]} columns"
            )
        seen = set()
        for name in names:
            if name in seen:
                raise DuplicateColumn(name)
            seen.add(name)
        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            row, col = bad[0]
            raise NonNumericCell(int(row), names[col], str(values[row, col]))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownVariable(name)

    def indices(self, names: Sequence[str]) -> Tuple[int, ...]:
        return tuple(self.index_of(name) for name in names)

    def ref(self, index: int) -> VariableRef:
        return VariableRef(index=index, name=self.names[index], kind=VariableKind.OBSERVED)

    def centered(self) -> np.ndarray:
        return self.values - self.values.mean(axis=0)


@dataclass(frozen=True, eq=False)
class OmegaSolution:
    """
    Solution of `ωᵀ Σ_YZ ≈ 0`.

    Attributes:
        omega: unit vector of length `Dim(Y)`, first non-zero component positive.
        residual_singular_value: `‖ωᵀ Σ_YZ‖₂`.
        null_dim: number of singular values (including structural zeros when
                  `Dim(Y) > Dim(Z)`) at or below the tolerance.
        degenerate: whether `Σ_YZ` vanished entirely, making every unit vector a solution.
    """

    omega: np.ndarray
    residual_singular_value: float
    null_dim: int
    degenerate: bool = False


class PValueMethod(str, Enum):
    """How HSIC p-values are obtained."""

    GAMMA = "gamma"
    PERMUTATION = "permutation"


class KernelWidthRule(str, Enum):
    """How the Gaussian kernel width of a standardized HSIC argument is chosen."""

    EMPIRICAL = "empirical"
    """ 0.8, 0.5 or 0.3 standard deviations for fewer than 200, fewer than 1200 or more rows. """
    MEDIAN = "median"
    """ Median of pairwise distances over the leading rows. """


class ClusterContext(str, Enum):
    """Which variables act as Z when a candidate cluster is tested."""

    FULL = "full"
    """ Z = all observed variables outside the candidate. """
    POOL = "pool"
    """ Z = not yet clustered variables outside the candidate. """


@dataclass(frozen=True)
class TestConfig:
    """
    Configuration of statistical tests.

    Attributes:
        alpha: significance level; a GIN test is satisfied iff its combined p-value is at least `alpha`.
        kernel_width: fixed Gaussian kernel width in standard deviations, or `None`
                      to pick one per argument by `width_rule`.
        width_rule: rule choosing the kernel width when none is fixed.
        pvalue_method: gamma approximation of the HSIC null or a permutation test.
        permutations: number of permutations for the permutation test.
        svd_tolerance: singular values at or below `svd_tolerance·σ_max` count as zero.
        hsic_max_samples: HSIC uses at most this many leading rows; `None` uses all rows.
        joint_hsic: test the surrogate against all Z columns jointly instead of pairwise.
        cluster_context: Z used by cluster search.
        seed: seed for permutation draws.
    """

    __test__ = False

    alpha: float = 0.05
    kernel_width: Optional[float] = None
    width_rule: KernelWidthRule = KernelWidthRule.EMPIRICAL
    pvalue_method: PValueMethod = PValueMethod.GAMMA
    permutations: int = 500
    svd_tolerance: float = 1e-8
    hsic_max_samples: Optional[int] = 2000
    joint_hsic: bool = False
    cluster_context: ClusterContext = ClusterContext.FULL
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InvalidConfiguration(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.kernel_width is not None and self.kernel_width <= 0:
            raise InvalidConfiguration(f"kernel width must be positive, got {self.kernel_width}")
        if self.permutations < 1:
            raise InvalidConfiguration("at least one permutation is required")
        if self.svd_tolerance <= 0:
            raise InvalidConfiguration("SVD tolerance must be positive")
        if self.hsic_max_samples is not None and self.hsic_max_samples < 20:
            raise InvalidConfiguration("HSIC needs at least 20 samples")


@dataclass(frozen=True)
class GenConfig:
    """
    Configuration of synthetic graph and data generation.

    Attributes:
        coef_low: smallest absolute edge coefficient.
        coef_high: largest absolute edge coefficient.
        random_sign: draw coefficient signs uniformly from ±1.
        seed: master seed.
        sample_size: number of rows to draw.
        repetition: index of the repetition; every random stream is keyed by it.
        edge_probability: probability of each earlier-to-later latent edge in random graphs.
        noise: noise distribution of every variable.
        rescale_noise: rescale noise to unit variance.
    """

    coef_low: float = 0.5
    coef_high: float = 2.0
    random_sign: bool = True
    seed: int = 0
    sample_size: int = 1000
    repetition: int = 0
    edge_probability: float = 0.5
    noise: NoiseSpec = field(default_factory=NoiseSpec.uniform_power)
    rescale_noise: bool = False

    def __post_init__(self):
        if not 0 < self.coef_low < self.coef_high:
            raise InvalidConfiguration(
                f"need 0 < coef_low < coef_high, got {self.coef_low}, {self.coef_high}"
            )
        if self.sample_size < 1:
            raise InvalidConfiguration("sample size must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfiguration("seed must be a 64-bit unsigned integer")
        if self.repetition < 0:
            raise InvalidConfiguration("repetition index must be non-negative")
        if not 0 <= self.edge_probability <= 1:
            raise InvalidConfiguration("edge probability must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class GinResult:
    """
    Verdict of one GIN (or IN) test.

    Attributes:
        satisfied: whether the condition holds, i.e. `combined_p >= config_used.alpha`.
        combined_p: Fisher-combined p-value over all Z columns.
        pairwise_p: `(z column name, p-value)` for every Z column.
        omega: solution used to build the surrogate; `None` for IN tests.
        config_used: configuration the test ran with.
        degenerate: surrogate or residual vanished, or ω was not identified.
        clamped: a zero p-value was clamped before combining.
        certificate: for population verdicts, noise terms shared by the surrogate and Z.
    """

    satisfied: bool
    combined_p: float
    pairwise_p: Tuple[Tuple[str, float], ...]
    omega: Optional[OmegaSolution]
    config_used: TestConfig
    degenerate: bool = False
    clamped: bool = False
    certificate: Tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class TraceEntry:
    """One executed GIN test, as published by a [criterion][linglam.criterion.GinCriterion]."""

    description: str
    z: Tuple[str, ...]
    y: Tuple[str, ...]
    result: GinResult


@dataclass(frozen=True)
class RootSearchState:
    """
    Accumulated state of the causal-order search.

    Attributes:
        resolved: cluster identifiers already placed in the order.
        z_half: column indices of Z-side halves of resolved clusters.
        y_half: column indices of Y-side halves of resolved clusters.
    """

    resolved: Tuple[int, ...] = ()
    z_half: Tuple[int, ...] = ()
    y_half: Tuple[int, ...] = ()

    def __post_init__(self):
        if set(self.z_half) & set(self.y_half):
            raise InvalidConfiguration("Z and Y halves of resolved clusters overlap")

    def advance(
        self, cluster_id: int, y_side: Sequence[int], z_side: Sequence[int]
    ) -> "RootSearchState":
        return RootSearchState(
            resolved=self.resolved + (cluster_id,),
            z_half=self.z_half + tuple(z_side),
            y_half=self.y_half + tuple(y_side),
        )


@dataclass(frozen=True, eq=False)
class DiscoveryResult:
    """
    Output of the discovery pipeline.

    Attributes:
        clusters: discovered causal clusters; their positions serve as identifiers.
        order: causal order over cluster identifiers, root first.
        unclustered: observed variables that ended up in no cluster.
        trace: every GIN test executed, when tracing was requested.
        low_confidence: identifiers of clusters whose split or root choice was not
                        backed by the assumptions (too few members, no passing candidate).
        config: test configuration used.
    """

    clusters: Tuple[CausalCluster, ...]
    order: CausalOrder
    unclustered: FrozenSet[VariableRef]
    trace: Tuple[TraceEntry, ...] = ()
    low_confidence: Tuple[int, ...] = ()
    config: Optional[TestConfig] = None


@dataclass(frozen=True)
class MetricReport:
    """
    Accuracy of a discovery result against the ground truth.

    Attributes:
        latent_omission: `OL/TL`.
        latent_commission: `FL/TL`.
        mismeasurement: `MO/TO`.
        correct_ordering: the estimated order is a linear extension of the true latent-set order.
        omitted_latents: OL, true latent variables not covered by estimated clusters.
        false_latents: FL, estimated latent variables in excess of the truth.
        total_latents: TL.
        mismeasured_observed: MO, clustered observed variables attributed to a wrong latent set.
        total_observed: TO.
    """

    latent_omission: float
    latent_commission: float
    mismeasurement: float
    correct_ordering: bool
    omitted_latents: int
    false_latents: int
    total_latents: int
    mismeasured_observed: int
    total_observed: int

    @property
    def counts(self) -> Tuple[int, int, int, int, int]:
        return (
            self.omitted_latents,
            self.false_latents,
            self.total_latents,
            self.mismeasured_observed,
            self.total_observed,
        )


class Command(str, Enum):
    SIMULATE = "simulate"
    DISCOVER = "discover"
    GIN_TEST = "gin-test"
    ORACLE_CHECK = "oracle-check"
    BENCHMARK = "benchmark"


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI invocation ran with; embedded in its outputs for provenance."""

    command: Command
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    test_config: TestConfig = field(default_factory=TestConfig)
    gen_config: GenConfig = field(default_factory=GenConfig)
    loglevel: str = "INFO"
    threads: int = 1
