"""Synthetic LiNGLaM structures and samples.

Every random quantity is drawn from its own counter-based stream keyed by
`(seed, repetition, purpose[, variable])`, so repetitions can run in any order
or in parallel and still reproduce bit-identically.
"""

import logging
import re
from typing import List, Sequence, Tuple

import numpy as np

from linglam.entities import DataMatrix, GenConfig, LingLamGraph, NoiseFamily, NoiseSpec
from linglam.errors import AssumptionViolated, InvalidCase, InvalidConfiguration
from linglam.graph import build_graph, validate_model

logger = logging.getLogger(__name__)

CASE_IDS = (1, 2, 3, 4)

_COEFFICIENT_STREAM = 0
_NOISE_STREAM = 1
_STRUCTURE_STREAM = 2

_RANDOM_SCENARIO = re.compile(r"^random:(\d+)x(\d+)$")

Edge = Tuple[str, str]


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox stream for the given key path under a master seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def _children(latent: str, observed: Sequence[str]) -> List[Edge]:
    return [(latent, x) for x in observed]


def _case_structure(case_id: int) -> Tuple[List[str], List[str], List[Edge]]:
    xs = [f"X{i}" for i in range(1, 10)]
    if case_id == 1:
        edges = [("L1", "L2")] + _children("L1", xs[0:2]) + _children("L2", xs[2:4])
        return ["L1", "L2"], xs[:4], edges
    if case_id == 2:
        edges = (
            [("L1", "L2")]
            + _children("L1", xs[0:2])
            + _children("L2", xs[2:4])
            + _children("L1", xs[2:4])
            + _children("L1", xs[4:6])
            + _children("L2", xs[4:6])
        )
        return ["L1", "L2"], xs[:6], edges
    if case_id == 3:
        edges = (
            [("L1", "L2"), ("L1", "L3"), ("L2", "L3")]
            + _children("L1", xs[0:3])
            + _children("L2", xs[3:6])
            + _children("L3", xs[6:9])
        )
        return ["L1", "L2", "L3"], xs[:9], edges
    if case_id == 4:
        edges = (
            [("L1", "L2"), ("L1", "L3"), ("L1", "L4"), ("L2", "L3"), ("L2", "L4"), ("L3", "L4")]
            + _children("L1", xs[0:4])
            + _children("L2", xs[0:4])
            + _children("L3", xs[4:6])
            + _children("L4", xs[6:8])
        )
        return ["L1", "L2", "L3", "L4"], xs[:8], edges
    raise InvalidCase(case_id)


def _noise_for(config: GenConfig) -> NoiseSpec:
    if config.rescale_noise:
        return config.noise.rescaled(1.0 / np.sqrt(config.noise.variance))
    return config.noise


def _with_coefficients(
    latents: Sequence[str], observed: Sequence[str], edges: Sequence[Edge], config: GenConfig
) -> LingLamGraph:
    rng = rng_stream(config.seed, config.repetition, _COEFFICIENT_STREAM)
    magnitudes = rng.uniform(config.coef_low, config.coef_high, size=len(edges))
    if config.random_sign:
        magnitudes = magnitudes * rng.choice([-1.0, 1.0], size=len(edges))
    graph = build_graph(
        latents,
        observed,
        [(cause, effect, float(b)) for (cause, effect), b in zip(edges, magnitudes)],
        _noise_for(config),
    )
    violations = validate_model(graph)
    if violations:
        raise AssumptionViolated(violations)
    return graph


def case_graph(case_id: int, config: GenConfig) -> LingLamGraph:
    """One of the four benchmark structures, with coefficients drawn from `config`.

    Case 1 is a latent chain with two pure children per latent, Case 2 adds
    children shared by both latents, Case 3 is a three-latent triangle with
    three children each and Case 4 is a four-latent structure with a cluster
    of four variables driven by two latents.
    """
    latents, observed, edges = _case_structure(case_id)
    return _with_coefficients(latents, observed, edges, config)


def random_graph(num_latents: int, children_per_latent: int, config: GenConfig) -> LingLamGraph:
    if num_latents < 1:
        raise InvalidConfiguration(f"need at least one latent variable, got {num_latents}")
    if children_per_latent < 2:
        raise InvalidConfiguration(
            f"every latent needs at least two pure children, got {children_per_latent}"
        )
    rng = rng_stream(config.seed, config.repetition, _STRUCTURE_STREAM)
    latents = [f"L{i + 1}" for i in range(num_latents)]
    observed = [f"X{i + 1}" for i in range(num_latents * children_per_latent)]
    edges: List[Edge] = []
    for j in range(1, num_latents):
        parents = [i for i in range(j) if rng.random() < config.edge_probability]
        if not parents:
            parents = [int(rng.integers(j))]
        edges.extend((latents[i], latents[j]) for i in parents)
    for j, latent in enumerate(latents):
        block = observed[j * children_per_latent : (j + 1) * children_per_latent]
        edges.extend(_children(latent, block))
    return _with_coefficients(latents, observed, edges, config)


def scenario_graph(scenario: str, config: GenConfig) -> LingLamGraph:
    """Resolve a benchmark scenario name: a case number or `random:<latents>x<children>`."""
    match = _RANDOM_SCENARIO.match(scenario.strip())
    if match:
        return random_graph(int(match.group(1)), int(match.group(2)), config)
    try:
        case_id = int(scenario)
    except ValueError:
        raise InvalidCase(scenario)
    return case_graph(case_id, config)


def draw_noise(spec: NoiseSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise InvalidConfiguration(f"need at least one draw, got {n}")
    if spec.family == NoiseFamily.UNIFORM_POWER:
        u = rng.uniform(-1.0, 1.0, size=n)
        base = np.sign(u) * np.abs(u) ** spec.exponent
    elif spec.family == NoiseFamily.UNIFORM:
        base = rng.uniform(-spec.width, spec.width, size=n)
    elif spec.family == NoiseFamily.CUSTOM:
        grid = np.linspace(0.0, 1.0, len(spec.quantiles))
        base = np.interp(rng.random(size=n), grid, spec.quantiles)
    else:
        base = rng.normal(0.0, spec.width, size=n)
    return spec.scale * base


def sample(graph: LingLamGraph, config: GenConfig) -> DataMatrix:
    """Forward-simulate `config.sample_size` rows and return the centered observed columns."""
    violations = validate_model(graph)
    if violations:
        raise AssumptionViolated(violations)
    n = config.sample_size
    values = np.zeros((n, graph.size))
    for v in graph.causal_order:
        rng = rng_stream(config.seed, config.repetition, _NOISE_STREAM, v)
        values[:, v] = values @ graph.coefficients[v] + draw_noise(graph.noise[v], n, rng)
    observed = values[:, len(graph.latents) :]
    observed = observed - observed.mean(axis=0)
    logger.debug("drew %d samples of %d observed variables", n, observed.shape[1])
    return DataMatrix(values=observed, names=tuple(ref.name for ref in graph.observed))
