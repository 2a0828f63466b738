import itertools
from typing import Iterator, List, Sequence, Tuple

import networkx as nx
import numpy as np
import pytest

from linglam.entities import GenConfig, LingLamGraph
from linglam.errors import CyclicGraph, GraphTooLarge, OverlappingColumns
from linglam.graph import build_graph, cluster_latents, latent_precedence, to_digraph, true_clusters
from linglam.oracle import (
    d_separated,
    dependent,
    exact_gin,
    graphical_gin,
    is_ambiguous,
    is_exogenous_set,
    mixing_matrix,
    population_covariance,
)
from linglam.synthesis import case_graph, random_graph
from tests.reference import ALPHA, BETA, SIGMA


def test_mixing_matrix_of_edgeless_graph():
    graph = build_graph(["L1", "L2"], ["X1"], [])
    assert np.array_equal(mixing_matrix(graph).matrix, np.eye(3))


def test_mixing_matrix_of_chain():
    graph = build_graph(["L1", "L2"], [], [("L1", "L2", 0.7)])
    assert mixing_matrix(graph).matrix[1] == pytest.approx([0.7, 1.0])


def test_mixing_matrix_of_reference_graph(reference_graph):
    row = mixing_matrix(reference_graph).matrix[2]
    assert row[:3] == pytest.approx([BETA + ALPHA * SIGMA, SIGMA, 1.0])
    assert np.all(row[3:] == 0)


def test_mixing_matrix_inverts_structure(reference_graph):
    identity = mixing_matrix(reference_graph).matrix @ (np.eye(reference_graph.size) - reference_graph.coefficients)
    assert np.abs(identity - np.eye(reference_graph.size)).max() < 1e-12


def test_mixing_matrix_of_cyclic_graph():
    graph = build_graph(["L1", "L2"], [], [("L1", "L2", 1.0), ("L2", "L1", 0.5)])
    with pytest.raises(CyclicGraph):
        mixing_matrix(graph)


def test_population_covariance_without_edges():
    graph = build_graph(["L1"], ["X1", "X2"], [])
    assert population_covariance(graph).sigma == pytest.approx(np.eye(3) / 11)


def test_population_covariance_is_symmetric_psd(reference_graph):
    sigma = population_covariance(reference_graph).sigma
    assert np.array_equal(sigma, sigma.T)
    assert np.linalg.eigvalsh(sigma).min() > -1e-10
    assert population_covariance(reference_graph).observed_block.shape == (8, 8)


def test_exact_gin_on_reference_graph(reference_graph):
    satisfied = exact_gin(reference_graph, ["X4", "X5"], ["X1", "X2", "X3"])
    assert satisfied.satisfied
    assert satisfied.null_dim == 1
    assert satisfied.omega == pytest.approx(np.array([1.0, 1.0, -1.0]) / np.sqrt(3))

    violated = exact_gin(reference_graph, ["X3", "X6"], ["X1", "X2", "X5"])
    assert not violated.satisfied
    assert "L3" in violated.certificate


def test_exact_gin_with_isolated_noise():
    graph = build_graph(
        ["L1"], ["X1", "X2", "X3", "X4"], [("L1", "X1", 1.0), ("L1", "X2", 1.5)]
    )
    result = exact_gin(graph, ["X1"], ["X3", "X4"])
    assert result.satisfied
    assert result.null_dim == 2


def test_exact_gin_rejects_overlap(reference_graph):
    with pytest.raises(OverlappingColumns):
        exact_gin(reference_graph, ["X1", "X4"], ["X1", "X2"])


def test_d_separation_basics():
    chain = build_graph([], ["A", "B", "C"], [("A", "B", 1.0), ("B", "C", 1.0)])
    assert d_separated(chain, ["A"], ["C"], ["B"])
    assert not d_separated(chain, ["A"], ["C"])

    collider = build_graph([], ["A", "B", "C"], [("A", "B", 1.0), ("C", "B", 1.0)])
    assert d_separated(collider, ["A"], ["C"])
    assert not d_separated(collider, ["A"], ["C"], ["B"])


def test_d_separation_through_collider_descendant():
    graph = build_graph([], ["A", "B", "C", "D"], [("A", "B", 1.0), ("C", "B", 1.0), ("B", "D", 1.0)])
    assert not d_separated(graph, ["A"], ["C"], ["D"])


def test_d_separation_on_reference_graph(reference_graph):
    assert d_separated(reference_graph, ["X1", "X2", "X3"], ["X4", "X5"], ["L1", "L2"])
    assert not d_separated(reference_graph, ["X1", "X2", "X3"], ["X4", "X5"], ["L1"])


def test_exogenous_sets(reference_graph):
    assert is_exogenous_set(reference_graph, ["L1"], ["L3", "L4"])
    assert not is_exogenous_set(reference_graph, ["L2", "L3"], ["L3", "L4"])
    assert is_exogenous_set(reference_graph, ["L1", "L2", "L3"], ["L2", "L3"])
    assert not is_exogenous_set(reference_graph, ["L2"], ["L1"])


def test_graphical_gin_on_reference_graph(reference_graph):
    result = graphical_gin(reference_graph, ["X1", "X2"], ["X3", "X4", "X5"])
    assert result.satisfied
    assert result.witness == ("L1", "L2")
    assert not graphical_gin(reference_graph, ["X1", "X6"], ["X3", "X4", "X5"]).satisfied


def test_graphical_gin_with_isolated_noise():
    graph = build_graph(["L1"], ["X1", "X2", "X3", "X4"], [("L1", "X1", 1.0), ("L1", "X2", 1.5)])
    result = graphical_gin(graph, ["X1"], ["X3", "X4"])
    assert result.satisfied
    assert result.witness == ()


def test_graphical_gin_limits_enumeration():
    graph = random_graph(9, 2, GenConfig())
    with pytest.raises(GraphTooLarge):
        graphical_gin(graph, ["X1"], ["X2", "X3"])


def test_dependence_via_noise_supports(reference_graph):
    assert dependent(reference_graph, "X1", "X8")
    graph = build_graph(["L1"], ["X1", "X2", "X3"], [("L1", "X1", 1.0), ("L1", "X2", 1.0)])
    assert dependent(graph, "X1", "X2")
    assert not dependent(graph, "X1", "X3")


def test_augmented_y_matches_in_condition():
    independent = build_graph(
        [], ["Z1", "Z2", "Y"], [("Z1", "Y", 0.7), ("Z2", "Y", -1.2)]
    )
    assert exact_gin(independent, ["Z1", "Z2"], ["Y", "Z1", "Z2"], allow_overlap=True).satisfied

    confounded = build_graph(
        ["L1"],
        ["Z1", "Z2", "Y"],
        [("L1", "Z1", 1.0), ("L1", "Y", 1.0), ("Z1", "Y", 0.5), ("Z2", "Y", 0.9)],
    )
    assert not exact_gin(confounded, ["Z1", "Z2"], ["Y", "Z1", "Z2"], allow_overlap=True).satisfied


def _pairs(graph: LingLamGraph, max_z: int) -> Iterator[Tuple[Sequence[str], Sequence[str]]]:
    names = [ref.name for ref in graph.observed]
    for y_size in (2, 3):
        for y in itertools.combinations(names, y_size):
            rest = [name for name in names if name not in y]
            for z_size in range(1, min(max_z, len(rest)) + 1):
                for z in itertools.combinations(rest, z_size):
                    yield z, y


def _has_satisfying_subset(graph: LingLamGraph, z: Sequence[str], y: Sequence[str]) -> bool:
    return any(
        exact_gin(graph, z, subset).satisfied
        for size in range(2, len(y))
        for subset in itertools.combinations(y, size)
    )


def _mismatches(graph: LingLamGraph, max_z: int):
    mismatches = []
    for z, y in _pairs(graph, max_z):
        if is_ambiguous(graph, z, y) or _has_satisfying_subset(graph, z, y):
            continue
        exact = exact_gin(graph, z, y).satisfied
        if exact != graphical_gin(graph, z, y).satisfied:
            mismatches.append((z, y, exact))
    return mismatches


@pytest.mark.parametrize("case_id", [1, 2, 3, 4])
def test_exact_and_graphical_criteria_agree(case_id):
    graph = case_graph(case_id, GenConfig(seed=case_id))
    assert _mismatches(graph, max_z=2) == []


@pytest.mark.slow
@pytest.mark.parametrize("case_id", [1, 2, 3, 4])
def test_exact_and_graphical_criteria_agree_exhaustively(case_id):
    graph = case_graph(case_id, GenConfig(seed=100 + case_id))
    assert _mismatches(graph, max_z=len(graph.observed)) == []


@pytest.mark.slow
def test_exact_and_graphical_criteria_agree_on_random_graphs():
    for seed in range(200):
        num_latents = 2 + seed % 3
        graph = random_graph(num_latents, 2, GenConfig(seed=seed))
        assert _mismatches(graph, max_z=3) == [], f"seed {seed}"


def _population_in(graph: LingLamGraph, z: Sequence[str], y: str) -> bool:
    """IN condition read off the graph: the regression residual shares no noise with Z."""
    y_index, z_indices = graph.ref(y).index, [graph.ref(name).index for name in z]
    sigma = population_covariance(graph)
    coefficients = np.linalg.solve(sigma.block(z_indices, z_indices), sigma.block(z_indices, [y_index]))
    weights = np.concatenate([[1.0], -coefficients[:, 0]])
    mixing = mixing_matrix(graph)
    residual = mixing.support([y_index] + z_indices, weights / np.linalg.norm(weights))
    return not residual & mixing.support(z_indices)


def _random_regression_graph(seed: int) -> Tuple[LingLamGraph, List[str]]:
    rng = np.random.default_rng(seed)
    z = [f"Z{i + 1}" for i in range(int(rng.integers(1, 4)))]
    edges = []
    for name in z:
        if rng.random() < 0.7:
            edges.append((name, "Y", float(rng.uniform(0.5, 2.0) * rng.choice([-1, 1]))))
        if rng.random() < 0.4:
            edges.append(("L1", name, float(rng.uniform(0.5, 2.0))))
    if len(z) > 1 and rng.random() < 0.5:
        edges.append((z[0], z[1], float(rng.uniform(0.5, 2.0))))
    if rng.random() < 0.5:
        edges.append(("L1", "Y", float(rng.uniform(0.5, 2.0))))
    return build_graph(["L1"], z + ["Y"], edges), z


def test_augmented_gin_equals_in_condition_on_random_graphs():
    outcomes = set()
    for seed in range(200):
        graph, z = _random_regression_graph(seed)
        expected = _population_in(graph, z, "Y")
        augmented = exact_gin(graph, z, ["Y"] + z, allow_overlap=True)
        assert augmented.satisfied == expected, f"seed {seed}"
        assert augmented.null_dim == 1
        outcomes.add(expected)
    assert outcomes == {True, False}


def _confounder_free(graph: LingLamGraph, first, second) -> bool:
    digraph = to_digraph(graph)
    a, b = {ref.index for ref in first}, {ref.index for ref in second}
    ancestors_a = set().union(*(nx.ancestors(digraph, v) for v in a))
    ancestors_b = set().union(*(nx.ancestors(digraph, v) for v in b))
    return not (ancestors_a & ancestors_b) - a - b


@pytest.mark.parametrize("case_id", [3, 4])
def test_half_split_holds_only_in_causal_direction(case_id):
    for seed in range(5):
        graph = case_graph(case_id, GenConfig(seed=seed))
        clusters = true_clusters(graph)
        latents = [cluster_latents(graph, cluster) for cluster in clusters]
        precedence = latent_precedence(graph)
        checked = 0
        for p, q in itertools.permutations(range(len(clusters)), 2):
            if not _confounder_free(graph, latents[p], latents[q]):
                continue
            k = clusters[p].latent_dim
            members = clusters[p].names
            z = members[k : 2 * k]
            y = members[:k] + clusters[q].names[: clusters[q].latent_dim]
            assert exact_gin(graph, z, y).satisfied == ((p, q) in precedence), (seed, p, q)
            checked += 1
        assert checked == 4
