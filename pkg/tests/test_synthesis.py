import numpy as np
import pytest

from linglam.entities import GenConfig, NoiseSpec
from linglam.errors import AssumptionViolated, InvalidCase, InvalidConfiguration, TooFewRows
from linglam.graph import true_clusters, validate_model
from linglam.oracle import population_covariance
from linglam.synthesis import (
    case_graph,
    draw_noise,
    random_graph,
    rng_stream,
    sample,
    scenario_graph,
)


def _edge_set(graph):
    return {(cause.name, effect.name) for cause, effect, _ in graph.edges()}


def test_case_1_structure():
    graph = case_graph(1, GenConfig())
    assert _edge_set(graph) == {
        ("L1", "L2"),
        ("L1", "X1"),
        ("L1", "X2"),
        ("L2", "X3"),
        ("L2", "X4"),
    }


def test_case_2_adds_shared_children():
    edges = _edge_set(case_graph(2, GenConfig()))
    assert {("L1", "X3"), ("L1", "X4"), ("L1", "X5"), ("L2", "X5"), ("L1", "X6"), ("L2", "X6")} <= edges
    assert [(c.names, c.latent_dim) for c in true_clusters(case_graph(2, GenConfig()))] == [
        (("X1", "X2"), 1),
        (("X3", "X4", "X5", "X6"), 2),
    ]


def test_case_3_structure():
    graph = case_graph(3, GenConfig())
    latent_edges = {(a, b) for a, b in _edge_set(graph) if b.startswith("L")}
    assert latent_edges == {("L1", "L2"), ("L1", "L3"), ("L2", "L3")}
    assert len(graph.observed) == 9


def test_case_4_has_reference_shape():
    graph = case_graph(4, GenConfig())
    assert (len(graph.latents), len(graph.observed)) == (4, 8)
    assert [c.latent_dim for c in true_clusters(graph)] == [2, 1, 1]


@pytest.mark.parametrize("case_id", [1, 2, 3, 4])
def test_coefficients_follow_config(case_id):
    config = GenConfig(seed=11, coef_low=0.5, coef_high=2.0)
    graph = case_graph(case_id, config)
    magnitudes = np.abs([coefficient for _, _, coefficient in graph.edges()])
    assert np.all((magnitudes >= 0.5) & (magnitudes <= 2.0))
    assert validate_model(graph) == []


def test_unsigned_coefficients():
    graph = case_graph(4, GenConfig(random_sign=False))
    assert all(coefficient > 0 for _, _, coefficient in graph.edges())


def test_unknown_case():
    with pytest.raises(InvalidCase):
        case_graph(5, GenConfig())
    with pytest.raises(InvalidCase):
        scenario_graph("five", GenConfig())


def test_gaussian_noise_is_refused():
    with pytest.raises(AssumptionViolated):
        case_graph(1, GenConfig(noise=NoiseSpec.gaussian()))


def test_coefficients_are_keyed_by_seed_and_repetition():
    first = case_graph(3, GenConfig(seed=5))
    again = case_graph(3, GenConfig(seed=5))
    other_rep = case_graph(3, GenConfig(seed=5, repetition=1))
    assert np.array_equal(first.coefficients, again.coefficients)
    assert not np.array_equal(first.coefficients, other_rep.coefficients)


def test_random_graph():
    graph = random_graph(5, 3, GenConfig(seed=2))
    assert (len(graph.latents), len(graph.observed)) == (5, 15)
    assert validate_model(graph) == []
    for latent in graph.latents[1:]:
        assert any(p.name.startswith("L") for p in graph.parents(latent))
    assert [c.latent_dim for c in true_clusters(graph)] == [1] * 5


def test_random_graph_arguments():
    with pytest.raises(InvalidConfiguration):
        random_graph(0, 3, GenConfig())
    with pytest.raises(InvalidConfiguration):
        random_graph(3, 1, GenConfig())


def test_random_scenario_name():
    graph = scenario_graph("random:3x2", GenConfig())
    assert (len(graph.latents), len(graph.observed)) == (3, 6)


def test_uniform_power_draws():
    draws = draw_noise(NoiseSpec.uniform_power(5), 200_000, rng_stream(0, 0))
    assert draws.var() == pytest.approx(1 / 11, abs=3e-3)
    assert np.abs(draws).max() <= 1.0


def test_custom_draws_stay_in_range():
    draws = draw_noise(NoiseSpec.custom([0.0, 0.5, 3.0]), 10_000, rng_stream(0, 1))
    assert draws.min() >= -1.0 - 1e-12
    assert draws.max() <= 2.0 + 1e-12


def test_sample_is_centered_and_reproducible(reference_graph):
    config = GenConfig(seed=3, sample_size=500)
    data = sample(reference_graph, config)
    assert data.names == tuple(f"X{i}" for i in range(1, 9))
    assert data.values.shape == (500, 8)
    assert np.abs(data.values.mean(axis=0)).max() < 1e-12
    assert np.array_equal(sample(reference_graph, config).values, data.values)
    other = sample(reference_graph, GenConfig(seed=3, sample_size=500, repetition=1))
    assert not np.array_equal(other.values, data.values)


def test_sample_needs_two_rows(reference_graph):
    with pytest.raises(TooFewRows):
        sample(reference_graph, GenConfig(sample_size=1))


def test_rescaled_noise_has_unit_variance():
    graph = case_graph(1, GenConfig(rescale_noise=True))
    assert all(spec.variance == pytest.approx(1.0) for spec in graph.noise)


def test_sample_covariance_matches_population():
    config = GenConfig(seed=4, sample_size=100_000)
    graph = case_graph(1, config)
    data = sample(graph, config)
    expected = population_covariance(graph).observed_block
    observed = np.cov(data.values, rowvar=False)
    assert np.abs(observed - expected).max() < 0.05 * np.abs(expected).max()
