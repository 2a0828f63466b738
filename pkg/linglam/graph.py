import logging
from dataclasses import dataclass
from enum import Enum
from typing import (
    Any,
    Dict,
    FrozenSet,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Set,
    Tuple,
    Union,
)

import networkx as nx
import numpy as np

from linglam.entities import (
    CausalCluster,
    LingLamGraph,
    NoiseFamily,
    NoiseSpec,
    VariableKind,
    VariableRef,
)
from linglam.errors import AssumptionViolated, DataFormatError, UnknownVariable

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

VariableLike = Union[str, int, VariableRef]


class Assumption(str, Enum):
    """Modelling assumptions checked by [validate_model][linglam.graph.validate_model]."""

    ACYCLIC = "acyclic"
    NO_OBSERVED_TO_LATENT = "no-observed-to-latent"
    """ No observed variable causes a latent variable. """
    NON_GAUSSIAN = "non-gaussian"
    PURE_CHILDREN = "pure-children"
    """ Every latent set has at least twice as many pure observed children as latents. """
    NO_OBSERVED_TO_OBSERVED = "no-observed-to-observed"


@dataclass(frozen=True)
class Violation:
    """
    One violated modelling assumption.

    Attributes:
        assumption: which assumption is violated.
        variables: names of the offending variables.
        message: human-readable description.
    """

    assumption: Assumption
    variables: Tuple[str, ...]
    message: str

    def __str__(self):
        return f"{self.assumption.value}: {self.message}"


def build_graph(
    latent_names: Sequence[str],
    observed_names: Sequence[str],
    edges: Iterable[Tuple[str, str, float]],
    noise: Union[NoiseSpec, Mapping[str, NoiseSpec], None] = None,
) -> LingLamGraph:
    """Assemble a graph from named edges `(cause, effect, coefficient)`.

    `noise` is either one spec shared by all variables or a per-name mapping;
    unnamed variables get `UniformPower(5)` noise. The causal order is the
    topological order with ties broken by index; a cyclic edge set falls back to
    index order and is reported by [validate_model][linglam.graph.validate_model].
    """
    latents = tuple(
        VariableRef(index=i, name=name, kind=VariableKind.LATENT)
        for i, name in enumerate(latent_names)
    )
    observed = tuple(
        VariableRef(index=len(latents) + i, name=name, kind=VariableKind.OBSERVED)
        for i, name in enumerate(observed_names)
    )
    index = {ref.name: ref.index for ref in latents + observed}
    size = len(index)
    coefficients = np.zeros((size, size))
    for cause, effect, coefficient in edges:
        if cause not in index:
            raise UnknownVariable(cause)
        if effect not in index:
            raise UnknownVariable(effect)
        coefficients[index[effect], index[cause]] = coefficient

    if noise is None or isinstance(noise, NoiseSpec):
        shared = noise or NoiseSpec.uniform_power()
        noise_specs = tuple(shared for _ in range(size))
    else:
        unknown = set(noise) - set(index)
        if unknown:
            raise UnknownVariable(sorted(unknown)[0])
        noise_specs = tuple(
            noise.get(ref.name, NoiseSpec.uniform_power()) for ref in latents + observed
        )

    return LingLamGraph(
        latents=latents,
        observed=observed,
        coefficients=coefficients,
        noise=noise_specs,
        causal_order=_causal_order(coefficients),
    )


def _causal_order(coefficients: np.ndarray) -> Tuple[int, ...]:
    digraph = nx.DiGraph()
    digraph.add_nodes_from(range(coefficients.shape[0]))
    digraph.add_edges_from((int(j), int(i)) for i, j in zip(*np.nonzero(coefficients)))
    try:
        return tuple(nx.lexicographical_topological_sort(digraph))
    except nx.NetworkXUnfeasible:
        return tuple(range(coefficients.shape[0]))


def to_digraph(graph: LingLamGraph) -> nx.DiGraph:
    """Graph structure as a networkx digraph over variable indices."""
    digraph = nx.DiGraph()
    for ref in graph.variables:
        digraph.add_node(ref.index, name=ref.name, kind=ref.kind)
    for cause, effect, coefficient in graph.edges():
        digraph.add_edge(cause.index, effect.index, weight=coefficient)
    return digraph


def validate_model(graph: LingLamGraph) -> List[Violation]:
    """Check acyclicity and the measurement assumptions; returns an empty list iff all hold."""
    violations: List[Violation] = []
    digraph = to_digraph(graph)
    names = graph.names
    n_latent = len(graph.latents)
    coefficients = graph.coefficients

    if not nx.is_directed_acyclic_graph(digraph):
        cycle = [names[u] for u, _ in nx.find_cycle(digraph)]
        violations.append(
            Violation(Assumption.ACYCLIC, tuple(cycle), f"directed cycle {' -> '.join(cycle)}")
        )
    else:
        position = {v: k for k, v in enumerate(graph.causal_order)}
        misordered = [
            (names[j], names[i])
            for i, j in zip(*np.nonzero(coefficients))
            if position[j] >= position[i]
        ]
        for cause, effect in misordered:
            violations.append(
                Violation(
                    Assumption.ACYCLIC,
                    (cause, effect),
                    f"edge {cause} -> {effect} contradicts the stored causal order",
                )
            )

    for i, j in zip(*np.nonzero(coefficients[:n_latent, n_latent:])):
        latent, observed = names[i], names[n_latent + j]
        violations.append(
            Violation(
                Assumption.NO_OBSERVED_TO_LATENT,
                (observed, latent),
                f"observed {observed} causes latent {latent}",
            )
        )

    for i, j in zip(*np.nonzero(coefficients[n_latent:, n_latent:])):
        cause, effect = names[n_latent + j], names[n_latent + i]
        violations.append(
            Violation(
                Assumption.NO_OBSERVED_TO_OBSERVED,
                (cause, effect),
                f"observed {cause} causes observed {effect}",
            )
        )

    gaussian = [ref.name for ref, spec in zip(graph.variables, graph.noise) if spec.is_gaussian]
    if gaussian:
        violations.append(
            Violation(
                Assumption.NON_GAUSSIAN, tuple(gaussian), f"Gaussian noise on {', '.join(gaussian)}"
            )
        )

    violations.extend(_pure_children_violations(graph))
    return violations


def _pure_children_violations(graph: LingLamGraph) -> List[Violation]:
    n_latent = len(graph.latents)
    observed_block = graph.coefficients[n_latent:, n_latent:]
    has_observed_parent = np.any(observed_block != 0, axis=1)

    groups: Dict[FrozenSet[int], List[VariableRef]] = {}
    for latent in graph.latents:
        children = frozenset(
            int(n_latent + i)
            for i in np.flatnonzero(graph.coefficients[n_latent:, latent.index])
        )
        groups.setdefault(children, []).append(latent)

    violations = []
    for children, latents in groups.items():
        pure = [c for c in children if not has_observed_parent[c - n_latent]]
        needed = 2 * len(latents)
        if len(pure) < needed:
            latent_names = tuple(ref.name for ref in latents)
            violations.append(
                Violation(
                    Assumption.PURE_CHILDREN,
                    latent_names,
                    f"latent set {{{', '.join(latent_names)}}} has {len(pure)} pure "
                    f"observed children, needs {needed}",
                )
            )
    return violations


def _resolve_latents(graph: LingLamGraph, latent_set: Iterable[VariableLike]) -> Set[int]:
    indices = set()
    for variable in latent_set:
        ref = graph.ref(variable)
        if ref.kind != VariableKind.LATENT:
            raise UnknownVariable(ref.name)
        indices.add(ref.index)
    return indices


def children_of(graph: LingLamGraph, latent_set: Iterable[VariableLike]) -> FrozenSet[VariableRef]:
    """Observed variables with at least one direct parent in `latent_set`."""
    indices = sorted(_resolve_latents(graph, latent_set))
    if not indices:
        return frozenset()
    n_latent = len(graph.latents)
    block = graph.coefficients[n_latent:, indices]
    return frozenset(graph.observed[i] for i in np.flatnonzero(np.any(block != 0, axis=1)))


def latent_parents(graph: LingLamGraph, variable: VariableLike) -> FrozenSet[VariableRef]:
    return frozenset(p for p in graph.parents(variable) if p.kind == VariableKind.LATENT)


def true_clusters(graph: LingLamGraph) -> List[CausalCluster]:
    """Group observed variables by identical latent parent sets.

    Observed variables without latent parents belong to no cluster. Clusters are
    ordered by their smallest member index.
    """
    violations = validate_model(graph)
    if violations:
        raise AssumptionViolated(violations)
    groups: Dict[FrozenSet[VariableRef], Set[VariableRef]] = {}
    for ref in graph.observed:
        parents = latent_parents(graph, ref)
        if parents:
            groups.setdefault(parents, set()).add(ref)
    clusters = [
        CausalCluster(members=frozenset(members), latent_dim=len(parents))
        for parents, members in groups.items()
    ]
    return sorted(clusters, key=lambda cluster: cluster.indices[0])


def cluster_latents(graph: LingLamGraph, cluster: CausalCluster) -> FrozenSet[VariableRef]:
    """True latent parent set of a cluster, as long as all members agree."""
    parent_sets = {latent_parents(graph, member.name) for member in cluster.members}
    if len(parent_sets) != 1:
        return frozenset()
    return parent_sets.pop()


def latent_precedence(graph: LingLamGraph) -> FrozenSet[Tuple[int, int]]:
    """
    True partial order over the latent sets behind [true clusters][linglam.graph.true_clusters].

    Returns pairs `(a, b)` of positions in `true_clusters(graph)`: the latent set of
    cluster `a` must come before that of `b` because some latent in `a`'s set but not
    in `b`'s is a proper ancestor of some latent in `b`'s set but not in `a`'s.
    Sets with no such relation may appear in either order.
    """
    digraph = to_digraph(graph)
    latent_sets = [
        {ref.index for ref in cluster_latents(graph, cluster)} for cluster in true_clusters(graph)
    ]
    ancestors = {ref.index: nx.ancestors(digraph, ref.index) for ref in graph.latents}
    pairs = set()
    for a, set_a in enumerate(latent_sets):
        for b, set_b in enumerate(latent_sets):
            if a == b:
                continue
            if any(u in ancestors[v] for u in set_a - set_b for v in set_b - set_a):
                pairs.add((a, b))
    return frozenset(pairs)


def _noise_params(spec: NoiseSpec) -> Dict[str, Any]:
    if spec.family == NoiseFamily.UNIFORM_POWER:
        params: Dict[str, Any] = {"exponent": spec.exponent}
    elif spec.family == NoiseFamily.UNIFORM:
        params = {"width": spec.width}
    elif spec.family == NoiseFamily.GAUSSIAN:
        params = {"sd": spec.width}
    else:
        params = {"quantiles": list(spec.quantiles)}
    params["scale"] = spec.scale
    return params


def noise_to_dict(spec: NoiseSpec) -> Dict[str, Any]:
    return {"family": spec.family.value, "params": _noise_params(spec)}


def noise_from_dict(doc: Mapping[str, Any]) -> NoiseSpec:
    try:
        family = NoiseFamily(doc["family"])
        params = dict(doc.get("params", {}))
    except (KeyError, ValueError, TypeError) as exc:
        raise DataFormatError(f"malformed noise description {doc!r}") from exc
    scale = float(params.pop("scale", 1.0))
    if family == NoiseFamily.UNIFORM_POWER:
        spec = NoiseSpec.uniform_power(float(params.get("exponent", 5.0)))
    elif family == NoiseFamily.UNIFORM:
        spec = NoiseSpec.uniform(float(params.get("width", 1.0)))
    elif family == NoiseFamily.GAUSSIAN:
        spec = NoiseSpec.gaussian(float(params.get("sd", 1.0)))
    else:
        spec = NoiseSpec.custom([float(q) for q in params.get("quantiles", [])])
    return spec.rescaled(scale) if scale != 1.0 else spec


def graph_to_dict(graph: LingLamGraph) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "variables": [{"name": ref.name, "kind": ref.kind.value} for ref in graph.variables],
        "edges": [
            {"from": cause.name, "to": effect.name, "coef": coefficient}
            for cause, effect, coefficient in graph.edges()
        ],
        "noise": [
            {"var": ref.name, **noise_to_dict(spec)}
            for ref, spec in zip(graph.variables, graph.noise)
        ],
    }


def graph_from_dict(doc: Mapping[str, Any]) -> LingLamGraph:
    try:
        variables = list(doc["variables"])
        latent_names = [v["name"] for v in variables if v["kind"] == VariableKind.LATENT.value]
        observed_names = [
            v["name"] for v in variables if v["kind"] == VariableKind.OBSERVED.value
        ]
        if len(latent_names) + len(observed_names) != len(variables):
            raise DataFormatError("variable kind must be 'latent' or 'observed'")
        edges = [(e["from"], e["to"], float(e["coef"])) for e in doc.get("edges", [])]
        noise = {n["var"]: noise_from_dict(n) for n in doc.get("noise", [])}
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"malformed graph document: {exc}") from exc
    return build_graph(latent_names, observed_names, edges, noise)


def graph_to_dot(graph: LingLamGraph, name: Optional[str] = None) -> str:
    lines = [f"digraph {name or 'linglam'} {{"]
    for ref in graph.latents:
        lines.append(f'  "{ref.name}" [shape=circle];')
    for ref in graph.observed:
        lines.append(f'  "{ref.name}" [shape=plaintext];')
    for cause, effect, coefficient in graph.edges():
        lines.append(f'  "{cause.name}" -> "{effect.name}" [label="{coefficient:.3g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
