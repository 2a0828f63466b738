"""
Structure discovery: causal clusters first, then the causal order of their latent sets.

Both stages only ask a [GinCriterion][linglam.criterion.GinCriterion] whether
the GIN condition holds for given column subsets, so they run unchanged on
sampled data and on a known graph.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple, Union

from networkx.utils import UnionFind

from linglam.criteria.sample import SampleGinCriterion
from linglam.criterion import GinCriterion, GinRequest
from linglam.entities import (
    CausalCluster,
    CausalOrder,
    ClusterContext,
    DataMatrix,
    DiscoveryResult,
    RootSearchState,
    TestConfig,
    TraceEntry,
    VariableKind,
    VariableRef,
)

logger = logging.getLogger(__name__)

Source = Union[DataMatrix, GinCriterion]


@dataclass(frozen=True)
class RootChoice:
    cluster_id: int
    low_confidence: bool
    min_p: float


@dataclass(frozen=True)
class HalfSplit:
    y_side: Tuple[int, ...]
    z_side: Tuple[int, ...]
    short: bool


def as_criterion(source: Source, config: Optional[TestConfig] = None) -> GinCriterion:
    if isinstance(source, GinCriterion):
        return source
    return SampleGinCriterion(source, config or TestConfig())


class StructureLearner:
    """Runs cluster search and order learning against one criterion."""

    def __init__(self, criterion: GinCriterion, threads: Optional[int] = 1):
        self.criterion = criterion
        self.threads = threads
        self._dependence: Dict[Tuple[int, int], bool] = {}

    @property
    def config(self) -> TestConfig:
        return self.criterion.config

    def _ref(self, column: int) -> VariableRef:
        return VariableRef(index=column, name=self.criterion.names[column], kind=VariableKind.OBSERVED)

    def _dependent(self, first: int, second: int) -> bool:
        key = (min(first, second), max(first, second))
        if key not in self._dependence:
            self._dependence[key] = self.criterion.dependent(*key)
        return self._dependence[key]

    def _cohesive(self, subset: Sequence[int]) -> bool:
        # Independent variables satisfy GIN vacuously; a cluster needs a common cause.
        return all(
            any(self._dependent(member, other) for other in subset if other != member)
            for member in subset
        )

    def find_clusters(self) -> Tuple[List[CausalCluster], FrozenSet[VariableRef]]:
        width = self.criterion.width
        pool = list(range(width))
        clusters: List[CausalCluster] = []
        length = 1
        while pool and len(pool) > length + 1:
            requests = []
            for subset in itertools.combinations(pool, length + 1):
                context = range(width) if self.config.cluster_context == ClusterContext.FULL else pool
                z = tuple(c for c in context if c not in subset)
                if z:
                    requests.append(GinRequest(z, subset, f"cluster search, Len={length}"))
            results = self.criterion.check_many(requests, self.threads)
            accepted = [
                request.y
                for request, result in zip(requests, results)
                if result.satisfied and self._cohesive(request.y)
            ]

            groups = UnionFind()
            for subset in accepted:
                groups.union(*subset)
            merged = sorted((sorted(group) for group in groups.to_sets()), key=lambda g: g[0])
            for group in merged:
                clusters.append(
                    CausalCluster(members=frozenset(self._ref(c) for c in group), latent_dim=length)
                )
            removed: Set[int] = set().union(*merged) if merged else set()
            pool = [c for c in pool if c not in removed]
            logger.info(
                "Len=%d: tested %d subsets, accepted %d, merged into %d clusters, %d variables left",
                length,
                len(requests),
                len(accepted),
                len(merged),
                len(pool),
            )
            length += 1
        return clusters, frozenset(self._ref(c) for c in pool)

    def split(self, cluster: CausalCluster) -> HalfSplit:
        """First `k` members (by column) go to the Y side, the next `k` to the Z side."""
        members = cluster.indices
        k = cluster.latent_dim
        if len(members) >= 2 * k:
            return HalfSplit(y_side=members[:k], z_side=members[k : 2 * k], short=False)
        return HalfSplit(y_side=members[:k], z_side=members[k:], short=True)

    def find_root(
        self,
        clusters: Sequence[CausalCluster],
        candidates: Sequence[int],
        state: RootSearchState,
    ) -> RootChoice:
        if not candidates:
            raise ValueError("no candidate clusters left")
        if len(candidates) == 1:
            return RootChoice(cluster_id=candidates[0], low_confidence=False, min_p=1.0)

        requests: List[GinRequest] = []
        owners: List[int] = []
        for r in candidates:
            halves = self.split(clusters[r])
            for k in candidates:
                if k == r:
                    continue
                others = clusters[k].indices[: clusters[k].latent_dim]
                requests.append(
                    GinRequest(
                        z=halves.z_side + state.z_half,
                        y=halves.y_side + others + state.y_half,
                        description=f"root search, candidate {r} against {k}",
                    )
                )
                owners.append(r)
        results = self.criterion.check_many(requests, self.threads)

        passes = {r: True for r in candidates}
        min_p = {r: 1.0 for r in candidates}
        for owner, result in zip(owners, results):
            passes[owner] = passes[owner] and result.satisfied
            min_p[owner] = min(min_p[owner], result.combined_p)

        passing = [r for r in candidates if passes[r]]
        pick_from = passing or list(candidates)
        best = max(pick_from, key=lambda r: (min_p[r], -r))
        if not passing:
            logger.warning(
                "no cluster passed the root test among %s; picked %d (min p=%.3g)",
                list(candidates),
                best,
                min_p[best],
            )
        elif len(passing) > 1:
            logger.debug("clusters %s all passed the root test; picked %d", passing, best)
        return RootChoice(cluster_id=best, low_confidence=not passing, min_p=min_p[best])

    def learn_order(self, clusters: Sequence[CausalCluster]) -> Tuple[CausalOrder, FrozenSet[int]]:
        state = RootSearchState()
        remaining = list(range(len(clusters)))
        low_confidence: Set[int] = set()
        for cluster_id, cluster in enumerate(clusters):
            if self.split(cluster).short:
                logger.warning(
                    "cluster %s has fewer than %d members; its root tests are unreliable",
                    list(cluster.names),
                    2 * cluster.latent_dim,
                )
                low_confidence.add(cluster_id)
        while remaining:
            choice = self.find_root(clusters, remaining, state)
            if choice.low_confidence:
                low_confidence.add(choice.cluster_id)
            halves = self.split(clusters[choice.cluster_id])
            state = state.advance(choice.cluster_id, halves.y_side, halves.z_side)
            remaining.remove(choice.cluster_id)
        return CausalOrder(sequence=state.resolved), frozenset(low_confidence)

    def discover(self, trace: bool = False) -> DiscoveryResult:
        entries: List[TraceEntry] = []
        handler = self.criterion.on_test.add_handler(entries.append) if trace else None
        try:
            clusters, unclustered = self.find_clusters()
            order, low_confidence = self.learn_order(clusters)
        finally:
            if handler is not None:
                self.criterion.on_test.remove_handler(handler)
        logger.info(
            "discovered %d clusters, order %s, %d unclustered variables",
            len(clusters),
            list(order),
            len(unclustered),
        )
        return DiscoveryResult(
            clusters=tuple(clusters),
            order=order,
            unclustered=unclustered,
            trace=tuple(entries),
            low_confidence=tuple(sorted(low_confidence)),
            config=self.config,
        )


def find_clusters(
    source: Source, config: Optional[TestConfig] = None, threads: Optional[int] = 1
) -> Tuple[List[CausalCluster], FrozenSet[VariableRef]]:
    """Identify causal clusters; returns the clusters and the variables left unclustered."""
    return StructureLearner(as_criterion(source, config), threads).find_clusters()


def find_root(
    source: Source,
    clusters: Sequence[CausalCluster],
    candidates: Sequence[int],
    state: RootSearchState,
    config: Optional[TestConfig] = None,
    threads: Optional[int] = 1,
) -> int:
    """Identifier of the cluster whose latent set is a root among `candidates`."""
    learner = StructureLearner(as_criterion(source, config), threads)
    return learner.find_root(clusters, candidates, state).cluster_id


def learn_order(
    source: Source,
    clusters: Sequence[CausalCluster],
    config: Optional[TestConfig] = None,
    threads: Optional[int] = 1,
) -> CausalOrder:
    order, _ = StructureLearner(as_criterion(source, config), threads).learn_order(clusters)
    return order


def discover(
    source: Source,
    config: Optional[TestConfig] = None,
    threads: Optional[int] = 1,
    trace: bool = False,
) -> DiscoveryResult:
    return StructureLearner(as_criterion(source, config), threads).discover(trace=trace)
