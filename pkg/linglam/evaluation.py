import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

import pandas as pd

from linglam.discovery import discover
from linglam.entities import (
    CausalCluster,
    DiscoveryResult,
    GenConfig,
    LingLamGraph,
    MetricReport,
    TestConfig,
)
from linglam.graph import latent_parents, latent_precedence, true_clusters
from linglam.helpers import parallel_map
from linglam.synthesis import sample, scenario_graph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClusterMatching:
    """
    Assignment of estimated clusters to true clusters by maximal Jaccard overlap.

    Attributes:
        truth: true clusters, in the order of [true_clusters][linglam.graph.true_clusters].
        assignment: for every estimated cluster, the position of its true cluster, or `None`
                    when it shares no member with any.
        unmatched_truth: positions of true clusters no estimated cluster maps to.
        surplus_latents: latent dimension of unmatched estimated clusters plus excess
                         dimension estimated for matched true clusters.
    """

    truth: Tuple[CausalCluster, ...]
    assignment: Tuple[Optional[int], ...]
    unmatched_truth: Tuple[int, ...]
    surplus_latents: int


@dataclass(frozen=True)
class BenchmarkRow:
    scenario: str
    sample_size: int
    repetitions: int

    latent_omission: float
    latent_omission_failures: int
    latent_commission: float
    latent_commission_failures: int
    mismeasurement: float
    mismeasurement_failures: int
    ordering_rate: float


ProgressCallback = Callable[[float], None]


def _jaccard(a: FrozenSet[str], b: FrozenSet[str]) -> float:
    union = a | b
    return len(a & b) / len(union) if union else 0.0


def match_clusters(estimated: Sequence[CausalCluster], truth: LingLamGraph) -> ClusterMatching:
    true = tuple(true_clusters(truth))
    true_names = [frozenset(t.names) for t in true]
    assignment: List[Optional[int]] = []
    for cluster in estimated:
        names = frozenset(cluster.names)
        overlaps = [_jaccard(names, t) for t in true_names]
        best = max(range(len(true)), key=lambda i: (overlaps[i], -i), default=None)
        assignment.append(best if best is not None and overlaps[best] > 0 else None)

    covered: Dict[int, int] = {}
    surplus = 0
    for cluster, matched in zip(estimated, assignment):
        if matched is None:
            surplus += cluster.latent_dim
        else:
            covered[matched] = covered.get(matched, 0) + cluster.latent_dim
    for i, dim in covered.items():
        surplus += max(0, dim - true[i].latent_dim)
    return ClusterMatching(
        truth=true,
        assignment=tuple(assignment),
        unmatched_truth=tuple(i for i in range(len(true)) if i not in covered),
        surplus_latents=surplus,
    )


def score(estimated: DiscoveryResult, truth: LingLamGraph) -> MetricReport:
    """Latent omission, latent commission, mismeasurement and ordering correctness.

    Latent counts are taken per true cluster, so a latent shared by two true
    latent sets counts once for each. Ratios are capped at 1.
    """
    matching = match_clusters(estimated.clusters, truth)
    covered: Dict[int, int] = {}
    for cluster, matched in zip(estimated.clusters, matching.assignment):
        if matched is not None:
            covered[matched] = covered.get(matched, 0) + cluster.latent_dim
    omitted = sum(
        max(0, t.latent_dim - covered.get(i, 0)) for i, t in enumerate(matching.truth)
    )
    total_latents = sum(t.latent_dim for t in matching.truth)

    true_parents = {ref.name: latent_parents(truth, ref) for ref in truth.observed}
    cluster_parents = [
        latent_parents(truth, next(iter(t.members))) for t in matching.truth
    ]
    mismeasured = 0
    for cluster, matched in zip(estimated.clusters, matching.assignment):
        for name in cluster.names:
            if matched is None or true_parents.get(name) != cluster_parents[matched]:
                mismeasured += 1
    total_observed = len(truth.observed)

    return MetricReport(
        latent_omission=min(1.0, omitted / total_latents) if total_latents else 0.0,
        latent_commission=(
            min(1.0, matching.surplus_latents / total_latents) if total_latents else 0.0
        ),
        mismeasurement=min(1.0, mismeasured / total_observed) if total_observed else 0.0,
        correct_ordering=_ordering_is_correct(estimated, matching, truth),
        omitted_latents=omitted,
        false_latents=matching.surplus_latents,
        total_latents=total_latents,
        mismeasured_observed=mismeasured,
        total_observed=total_observed,
    )


def _ordering_is_correct(
    estimated: DiscoveryResult, matching: ClusterMatching, truth: LingLamGraph
) -> bool:
    if matching.unmatched_truth:
        return False
    precedence = latent_precedence(truth)
    sequence = [matching.assignment[c] for c in estimated.order]
    for i, earlier in enumerate(sequence):
        for later in sequence[i + 1 :]:
            if earlier is not None and later is not None and (later, earlier) in precedence:
                return False
    return True


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


class Benchmark:
    """Repeated simulate → discover → score runs over scenarios and sample sizes."""

    def __init__(
        self,
        test_config: TestConfig,
        gen_config: GenConfig,
        threads: Optional[int] = 1,
    ):
        self._test_config = test_config
        self._gen_config = gen_config
        self._threads = threads

    def run_once(self, scenario: str, sample_size: int, repetition: int) -> MetricReport:
        config = replace(self._gen_config, sample_size=sample_size, repetition=repetition)
        graph = scenario_graph(scenario, config)
        result = discover(sample(graph, config), self._test_config)
        report = score(result, graph)
        logger.debug(
            "scenario %s, N=%d, repetition %d: %s", scenario, sample_size, repetition, report
        )
        return report

    def run(
        self,
        scenarios: Sequence[str],
        sample_sizes: Sequence[int],
        repetitions: int,
        progress_callback: Optional[ProgressCallback] = None,
    ) -> List[BenchmarkRow]:
        if repetitions < 1:
            raise ValueError(f"need at least one repetition, got {repetitions}")
        cells = [(s, n) for s in scenarios for n in sample_sizes]
        rows = []
        for step, (scenario, n) in enumerate(cells):
            if progress_callback is not None:
                progress_callback(step / len(cells))
            reports = parallel_map(
                lambda rep: self.run_once(scenario, n, rep), range(repetitions), self._threads
            )
            rows.append(_fold(scenario, n, reports))
            logger.info("scenario %s, N=%d: %s", scenario, n, rows[-1])
        if progress_callback is not None:
            progress_callback(1.0)
        return rows


def _fold(scenario: str, sample_size: int, reports: Sequence[MetricReport]) -> BenchmarkRow:
    return BenchmarkRow(
        scenario=scenario,
        sample_size=sample_size,
        repetitions=len(reports),
        latent_omission=_mean([r.latent_omission for r in reports]),
        latent_omission_failures=sum(r.omitted_latents > 0 for r in reports),
        latent_commission=_mean([r.latent_commission for r in reports]),
        latent_commission_failures=sum(r.false_latents > 0 for r in reports),
        mismeasurement=_mean([r.mismeasurement for r in reports]),
        mismeasurement_failures=sum(r.mismeasured_observed > 0 for r in reports),
        ordering_rate=_mean([1.0 if r.correct_ordering else 0.0 for r in reports]),
    )


def benchmark(
    scenarios: Sequence[str],
    sample_sizes: Sequence[int],
    repetitions: int,
    test_config: TestConfig,
    gen_config: Optional[GenConfig] = None,
    threads: Optional[int] = 1,
) -> List[BenchmarkRow]:
    return Benchmark(test_config, gen_config or GenConfig(), threads).run(
        scenarios, sample_sizes, repetitions
    )


def benchmark_frame(rows: Sequence[BenchmarkRow]) -> pd.DataFrame:
    """Table with one row per (scenario, N) and every metric next to its failure count."""
    return pd.DataFrame(
        [
            {
                "scenario": row.scenario,
                "n": row.sample_size,
                "reps": row.repetitions,
                "latent_omission": row.latent_omission,
                "latent_omission_failures": row.latent_omission_failures,
                "latent_commission": row.latent_commission,
                "latent_commission_failures": row.latent_commission_failures,
                "mismeasurement": row.mismeasurement,
                "mismeasurement_failures": row.mismeasurement_failures,
                "ordering_rate": row.ordering_rate,
            }
            for row in rows
        ]
    )
