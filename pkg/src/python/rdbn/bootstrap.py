"""
rdbn Bootstrap Model Averaging

Edge-inclusion strengths from hill-climbing on row resamples, and the
thresholded consensus network built from them.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd

from rdbn.config import (
    MAX_OUTCOME_THRESHOLD,
    OUTCOME,
    BootstrapConfig,
    SearchConfig,
    ThresholdType,
    validate_threshold,
)
from rdbn.dag import Dag, Edge
from rdbn.exceptions import DeserializationError, NumericalError, ValidationError
from rdbn.network import as_complete_frame
from rdbn.search import EdgeConstraintSet, hill_climb

logger = logging.getLogger(__name__)

MAX_REDRAWS = 10

STRENGTH_COLUMNS = ("parent", "child", "strength", "direction")


@dataclass(frozen=True)
class EdgeStrengthTable:
    """
    Inclusion counts of directed edges over ``replicates`` bootstrap searches.

    ``strength(u, v)`` is the fraction of replicates containing ``u -> v``.
    ``direction(u, v)`` is the share of those replicates, among the ones
    linking ``u`` and ``v`` in either direction, that used ``u -> v``.
    """

    nodes: Tuple[str, ...]
    counts: Mapping[Edge, int]
    replicates: int

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ValidationError(f"replicates must be >= 1, got {self.replicates}")
        known = set(self.nodes)
        for (u, v), c in self.counts.items():
            if u not in known or v not in known:
                raise ValidationError(f"Edge {u}->{v} references an unknown node")
            if not 0 <= c <= self.replicates:
                raise ValidationError(f"Count {c} for {u}->{v} outside [0, {self.replicates}]")

    def strength(self, parent: str, child: str) -> float:
        return self.counts.get((parent, child), 0) / self.replicates

    def direction(self, parent: str, child: str) -> float:
        forward = self.counts.get((parent, child), 0)
        total = forward + self.counts.get((child, parent), 0)
        return forward / total if total else 0.0

    def strengths(self) -> Dict[Edge, float]:
        """Nonzero strengths keyed by edge."""
        return {e: c / self.replicates for e, c in self.counts.items() if c > 0}

    def edges_into(self, child: str) -> List[Tuple[str, float]]:
        """(parent, strength) pairs into ``child``, strongest first, ties by node order."""
        index = {v: i for i, v in enumerate(self.nodes)}
        pairs = [(u, c / self.replicates) for (u, v), c in self.counts.items() if v == child and c > 0]
        return sorted(pairs, key=lambda p: (-p[1], index[p[0]]))

    def to_frame(self) -> pd.DataFrame:
        index = {v: i for i, v in enumerate(self.nodes)}
        rows = [
            (u, v, c / self.replicates, self.direction(u, v))
            for (u, v), c in sorted(self.counts.items(), key=lambda kv: (index[kv[0][1]], index[kv[0][0]]))
            if c > 0
        ]
        return pd.DataFrame(rows, columns=list(STRENGTH_COLUMNS))

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "replicates": self.replicates,
            "counts": [[u, v, c] for (u, v), c in sorted(self.counts.items()) if c > 0],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EdgeStrengthTable":
        try:
            counts = {(str(u), str(v)): int(c) for u, v, c in data["counts"]}
            return cls(tuple(data["nodes"]), counts, int(data["replicates"]))
        except (KeyError, TypeError, ValueError) as e:
            raise DeserializationError(f"Malformed edge strength table: {e}")


def _is_degenerate(values: np.ndarray) -> bool:
    return bool(np.any(np.ptp(values, axis=0) == 0))


def _run_replicate(
    values: np.ndarray,
    columns: Sequence[str],
    constraints: EdgeConstraintSet,
    search: SearchConfig,
    seed: int,
    replicate: int,
) -> List[Edge]:
    """One bootstrap replicate; seeded by ``(seed, replicate)`` alone."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate,)))
    n = values.shape[0]
    for attempt in range(MAX_REDRAWS + 1):
        sample = values[rng.integers(0, n, size=n)]
        if not _is_degenerate(sample):
            break
        logger.debug("Replicate %d: degenerate resample, redraw %d", replicate, attempt + 1)
    else:
        raise NumericalError(
            f"Replicate {replicate}: every resample had a constant column after {MAX_REDRAWS} redraws"
        )
    frame = pd.DataFrame(sample, columns=list(columns))
    config = search.with_seed(int(rng.integers(0, 2**32)))
    result = hill_climb(frame, constraints, config)
    return sorted(result.dag.edges)


def bootstrap_strength(
    data: pd.DataFrame,
    constraints: Optional[EdgeConstraintSet] = None,
    config: Optional[BootstrapConfig] = None,
    replicates: Optional[int] = None,
    seed: Optional[int] = None,
    jobs: Optional[int] = None,
) -> EdgeStrengthTable:
    """
    Nonparametric bootstrap of the hill-climbing structure.

    Each replicate resamples the rows with replacement and runs
    ``hill_climb``. Replicate ``i`` draws from ``SeedSequence(seed,
    spawn_key=(i,))``, so tables are identical for any ``jobs``.

    Args:
        data: Complete frame, one column per node
        constraints: Black/whitelists shared by every replicate
        config: Bootstrap settings; ``replicates``, ``seed`` and ``jobs``
                override the corresponding fields
        replicates: R
        seed: Master seed
        jobs: Worker processes (1 runs in-process)

    Raises:
        ValidationError: Invalid data or R < 1
        NumericalError: A replicate kept drawing constant columns
    """
    config = config or BootstrapConfig()
    replicates = config.replicates if replicates is None else replicates
    seed = config.seed if seed is None else seed
    jobs = config.jobs if jobs is None else jobs
    if replicates < 1:
        raise ValidationError(f"replicates must be >= 1, got {replicates}")
    if jobs < 1:
        raise ValidationError(f"jobs must be >= 1, got {jobs}")
    frame = as_complete_frame(data)
    constraints = constraints or EdgeConstraintSet()
    constraints.check_labels(frame.columns)
    values = frame.to_numpy()
    columns = tuple(str(c) for c in frame.columns)

    logger.info("Bootstrapping %d replicates on %d rows (jobs=%d)", replicates, len(frame), jobs)
    args = [(values, columns, constraints, config.search, seed, i) for i in range(replicates)]
    if jobs == 1:
        results = [_run_replicate(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_replicate, *zip(*args)))

    counts: Dict[Edge, int] = {}
    for edges in results:
        for e in edges:
            counts[e] = counts.get(e, 0) + 1
    return EdgeStrengthTable(columns, counts, replicates)


def resolve_threshold(
    strengths: EdgeStrengthTable, threshold: ThresholdType, outcome: str = OUTCOME
) -> float:
    """
    Numeric threshold for ``average_network``.

    ``max-outcome`` resolves to the largest strength among edges into the
    outcome node.
    """
    validate_threshold(threshold)
    if threshold != MAX_OUTCOME_THRESHOLD:
        return float(threshold)
    into = strengths.edges_into(outcome)
    if not into:
        raise ValidationError(f"No bootstrap edge into '{outcome}'; cannot use '{MAX_OUTCOME_THRESHOLD}'")
    return into[0][1]


def average_network(
    strengths: EdgeStrengthTable, threshold: ThresholdType, outcome: str = OUTCOME
) -> Dag:
    """
    Consensus DAG of the edges with strength >= threshold.

    Edges are admitted strongest first (ties by child then parent node
    order); an edge that would close a cycle is skipped and reported.

    Args:
        strengths: Bootstrap table
        threshold: Fraction in (0, 1] or ``max-outcome``
        outcome: Outcome node for ``max-outcome``
    """
    cut = resolve_threshold(strengths, threshold, outcome)
    index = {v: i for i, v in enumerate(strengths.nodes)}
    selected = sorted(
        ((e, s) for e, s in strengths.strengths().items() if s >= cut),
        key=lambda es: (-es[1], index[es[0][1]], index[es[0][0]]),
    )
    graph = nx.DiGraph()
    graph.add_nodes_from(strengths.nodes)
    skipped = []
    for (u, v), s in selected:
        if graph.has_edge(v, u) or nx.has_path(graph, v, u):
            skipped.append(f"{u}->{v} ({s:.3f})")
            continue
        graph.add_edge(u, v)
    if skipped:
        logger.warning("Skipped cycle-creating edges in the averaged network: %s", ", ".join(skipped))
    return Dag(strengths.nodes, graph.edges())
