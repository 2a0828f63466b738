"""
Exact, sample-free ground truth for a known graph.

Every variable of a LiNGLaM is a linear combination of the independent noise
terms, so two linear combinations of variables are independent exactly when
their noise supports are disjoint (all noises are non-Gaussian). This turns
the GIN condition into a support computation on the mixing matrix.
"""

import functools
import itertools
import logging
from dataclasses import dataclass
from typing import FrozenSet, Iterable, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from linglam.entities import LingLamGraph, VariableKind, VariableRef
from linglam.errors import CyclicGraph, GraphTooLarge, OverlappingColumns, UnknownVariable
from linglam.graph import VariableLike, latent_parents, to_digraph
from linglam.stats import canonical_sign, numerical_rank

logger = logging.getLogger(__name__)

SUPPORT_THRESHOLD = 1e-9
NULL_SPACE_TOLERANCE = 1e-8
RANK_TOLERANCE = 1e-8
AMBIGUITY_BAND = (1e-9, 1e-6)
MAX_ENUMERATED_LATENTS = 8


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """
    Row `i` expresses variable `i` as a linear combination of all noise terms,
    i.e. `M = (I - B)⁻¹`.
    """

    matrix: np.ndarray
    names: Tuple[str, ...]

    def support(self, rows: Sequence[int], weights: Optional[np.ndarray] = None) -> Set[int]:
        """Noise indices with a non-negligible coefficient in `weightsᵀ·M[rows]`."""
        block = self.matrix[list(rows)]
        combined = np.abs(block).max(axis=0) if weights is None else np.abs(weights @ block)
        return set(int(i) for i in np.flatnonzero(combined > SUPPORT_THRESHOLD))


@dataclass(frozen=True, eq=False)
class PopulationCov:
    sigma: np.ndarray
    n_latent: int

    def block(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        return self.sigma[np.ix_(list(rows), list(cols))]

    @property
    def observed_block(self) -> np.ndarray:
        return self.sigma[self.n_latent :, self.n_latent :]


@dataclass(frozen=True, eq=False)
class ExactGinResult:
    """
    Attributes:
        satisfied: whether GIN holds for every vector of the null-space basis.
        certificate: names of noise terms shared by some surrogate and Z.
        null_dim: dimension of the left null space of `Σ_YZ`.
        omega: canonical null vector (smallest singular direction).
    """

    satisfied: bool
    certificate: Tuple[str, ...]
    null_dim: int
    omega: np.ndarray


@dataclass(frozen=True)
class GraphicalGinResult:
    satisfied: bool
    witness: Optional[Tuple[str, ...]] = None


def _check_acyclic(graph: LingLamGraph) -> None:
    digraph = to_digraph(graph)
    if not nx.is_directed_acyclic_graph(digraph):
        raise CyclicGraph([graph.names[u] for u, _ in nx.find_cycle(digraph)])


@functools.lru_cache(maxsize=64)
def mixing_matrix(graph: LingLamGraph) -> MixingMatrix:
    _check_acyclic(graph)
    size = graph.size
    matrix = np.zeros((size, size))
    for v in graph.causal_order:
        matrix[v] = graph.coefficients[v] @ matrix
        matrix[v, v] += 1.0
    matrix.setflags(write=False)
    return MixingMatrix(matrix=matrix, names=graph.names)


@functools.lru_cache(maxsize=64)
def population_covariance(graph: LingLamGraph) -> PopulationCov:
    """`Σ = M Ω Mᵀ` with `Ω` the diagonal of exact noise variances."""
    mixing = mixing_matrix(graph).matrix
    variances = np.array([spec.variance for spec in graph.noise])
    sigma = (mixing * variances) @ mixing.T
    sigma = (sigma + sigma.T) / 2
    sigma.setflags(write=False)
    return PopulationCov(sigma=sigma, n_latent=len(graph.latents))


def _indices(graph: LingLamGraph, variables: Iterable[VariableLike], kind=None) -> Tuple[int, ...]:
    result = []
    for variable in variables:
        ref = graph.ref(variable)
        if kind is not None and ref.kind != kind:
            raise UnknownVariable(ref.name)
        result.append(ref.index)
    return tuple(result)


def left_null_space(sigma: np.ndarray, tolerance: float = NULL_SPACE_TOLERANCE) -> np.ndarray:
    """Orthonormal basis (as columns) of `{ω : ωᵀΣ = 0}`, relative tolerance."""
    dim_y = sigma.shape[0]
    if not np.any(np.abs(sigma) > 0):
        return np.eye(dim_y)
    u, singular_values, _ = np.linalg.svd(sigma, full_matrices=True)
    spectrum = np.zeros(dim_y)
    spectrum[: singular_values.size] = singular_values
    return u[:, spectrum <= tolerance * spectrum[0]]


def exact_gin(
    graph: LingLamGraph,
    z_vars: Iterable[VariableLike],
    y_vars: Iterable[VariableLike],
    allow_overlap: bool = False,
) -> ExactGinResult:
    """
    Decide GIN for `(Z, Y)` from the graph alone.

    Holds iff the left null space of `Σ_YZ` is non-trivial and every basis vector
    `ω` gives a surrogate `ωᵀY` whose noise support is disjoint from that of Z.
    """
    z = _indices(graph, z_vars, VariableKind.OBSERVED)
    y = _indices(graph, y_vars, VariableKind.OBSERVED)
    if not allow_overlap and set(y) & set(z):
        raise OverlappingColumns(set(y) & set(z))
    mixing = mixing_matrix(graph)
    sigma = population_covariance(graph).block(y, z)
    basis = left_null_space(sigma)
    null_dim = basis.shape[1]
    if null_dim == 0:
        return ExactGinResult(
            satisfied=False, certificate=(), null_dim=0, omega=np.zeros(len(y))
        )
    z_support = mixing.support(z)
    shared: Set[int] = set()
    for omega in basis.T:
        shared |= mixing.support(y, omega) & z_support
    return ExactGinResult(
        satisfied=not shared,
        certificate=tuple(graph.names[i] for i in sorted(shared)),
        null_dim=null_dim,
        omega=canonical_sign(basis[:, -1]),
    )


def is_ambiguous(
    graph: LingLamGraph, z_vars: Iterable[VariableLike], y_vars: Iterable[VariableLike]
) -> bool:
    """Whether some singular value of `Σ_YZ` is too close to zero to classify reliably."""
    z = _indices(graph, z_vars)
    y = _indices(graph, y_vars)
    sigma = population_covariance(graph).block(y, z)
    singular_values = np.linalg.svd(sigma, compute_uv=False)
    if singular_values.size == 0 or singular_values[0] == 0:
        return False
    relative = singular_values / singular_values[0]
    low, high = AMBIGUITY_BAND
    return bool(np.any((relative >= low) & (relative <= high)))


def d_separated(
    graph: LingLamGraph,
    set_a: Iterable[VariableLike],
    set_b: Iterable[VariableLike],
    cond_set: Iterable[VariableLike] = (),
) -> bool:
    """Bayes-ball reachability: True iff no active path joins `set_a` and `set_b` given `cond_set`."""
    digraph = to_digraph(graph)
    a = set(_indices(graph, set_a))
    b = set(_indices(graph, set_b))
    conditioned = set(_indices(graph, cond_set))

    shaded = set(conditioned)
    for node in conditioned:
        shaded |= nx.ancestors(digraph, node)

    from_child, from_parent = "child", "parent"
    schedule = [(node, from_child) for node in a]
    visited = set()
    while schedule:
        node, direction = schedule.pop()
        if node in b:
            return False
        if (node, direction) in visited:
            continue
        visited.add((node, direction))

        if direction == from_child and node not in conditioned:
            schedule.extend((parent, from_child) for parent in digraph.predecessors(node))
            schedule.extend((child, from_parent) for child in digraph.successors(node))

        if direction == from_parent:
            # a shaded collider opens the v-structure
            if node in shaded:
                schedule.extend((parent, from_child) for parent in digraph.predecessors(node))
            if node not in conditioned:
                schedule.extend((child, from_parent) for child in digraph.successors(node))
    return True


def is_exogenous_set(
    graph: LingLamGraph, s1: Iterable[VariableLike], s2: Iterable[VariableLike]
) -> bool:
    """
    Whether `s1` is exogenous relative to `s2`.

    True if `s2 ⊆ s1`, or if every `V ∈ s2 \\ s1` neither causes a member of `s1`
    nor shares with one a common cause reachable without passing through `s1`.
    """
    digraph = to_digraph(graph)
    first = set(_indices(graph, s1))
    second = set(_indices(graph, s2))
    outside = second - first
    if not outside:
        return True

    pruned = digraph.subgraph(set(digraph.nodes) - first)
    parent_context = {}
    for s in first:
        parents = set(digraph.predecessors(s)) - first
        context = set(parents)
        for parent in parents:
            context |= nx.ancestors(pruned, parent)
        parent_context[s] = context

    for v in outside:
        if nx.descendants(digraph, v) & first:
            return False
        v_ancestry = nx.ancestors(pruned, v) | {v}
        if any(v_ancestry & context for context in parent_context.values()):
            return False
    return True


def graphical_gin(
    graph: LingLamGraph, z_vars: Iterable[VariableLike], y_vars: Iterable[VariableLike]
) -> GraphicalGinResult:
    """
    Graphical criterion for GIN of `(Z, Y)`: some latent subset `S` of size
    `k ≤ min(|Y|-1, |Z|)` is exogenous relative to the latent parents of Y,
    d-separates Y from Z, and has population covariance of rank `k` with both
    Z and Y. Subsets are enumerated exhaustively by increasing size.
    """
    if len(graph.latents) > MAX_ENUMERATED_LATENTS:
        raise GraphTooLarge(len(graph.latents), MAX_ENUMERATED_LATENTS)
    z = _indices(graph, z_vars, VariableKind.OBSERVED)
    y = _indices(graph, y_vars, VariableKind.OBSERVED)
    y_latents: FrozenSet[VariableRef] = frozenset().union(
        *(latent_parents(graph, i) for i in y)
    )
    sigma = population_covariance(graph)
    latent_indices = [ref.index for ref in graph.latents]

    for k in range(0, min(len(y) - 1, len(z)) + 1):
        for subset in itertools.combinations(latent_indices, k):
            if not is_exogenous_set(graph, subset, y_latents):
                continue
            if not d_separated(graph, y, z, subset):
                continue
            if k and (
                numerical_rank(sigma.block(subset, z), RANK_TOLERANCE) != k
                or numerical_rank(sigma.block(subset, y), RANK_TOLERANCE) != k
            ):
                continue
            return GraphicalGinResult(
                satisfied=True, witness=tuple(graph.names[i] for i in subset)
            )
    return GraphicalGinResult(satisfied=False)


def dependent(graph: LingLamGraph, first: VariableLike, second: VariableLike) -> bool:
    """Two variables are dependent iff their noise supports intersect."""
    mixing = mixing_matrix(graph)
    a, b = _indices(graph, [first, second])
    return bool(mixing.support([a]) & mixing.support([b]))

