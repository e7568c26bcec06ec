"""
rdbn Structure Search

Hill-climbing with random restarts over DAGs that respect an edge blacklist
and whitelist, maximizing the decomposable Gaussian BIC.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np
import pandas as pd

from rdbn.config import OUTCOME, SearchConfig, year_label
from rdbn.dag import Dag, Edge
from rdbn.exceptions import (
    ConstraintError,
    FitError,
    InsufficientDataError,
    NumericalError,
    ValidationError,
)
from rdbn.network import LocalScorer, as_complete_frame

logger = logging.getLogger(__name__)

MIN_ROWS = 3

ADD, DELETE, REVERSE = "add", "delete", "reverse"
_KIND_RANK = {ADD: 0, DELETE: 1, REVERSE: 2}


@dataclass(frozen=True)
class EdgeConstraintSet:
    """Forbidden and required directed edges."""

    blacklist: FrozenSet[Edge] = frozenset()
    whitelist: FrozenSet[Edge] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "blacklist", frozenset(tuple(e) for e in self.blacklist))
        object.__setattr__(self, "whitelist", frozenset(tuple(e) for e in self.whitelist))
        clash = self.blacklist & self.whitelist
        if clash:
            raise ConstraintError(f"Edges both required and forbidden: {sorted(clash)}")
        if not nx.is_directed_acyclic_graph(nx.DiGraph(list(self.whitelist))):
            raise ConstraintError("Whitelist edges form a cycle")

    def allows(self, parent: str, child: str) -> bool:
        return (parent, child) not in self.blacklist

    def check_labels(self, labels: Iterable[str]) -> None:
        """Raise ConstraintError if a constraint names an unknown node."""
        known = set(labels)
        for u, v in sorted(self.blacklist | self.whitelist):
            if u not in known or v not in known:
                raise ConstraintError(f"Constraint edge {u}->{v} references an unknown node")

    def union(self, other: "EdgeConstraintSet") -> "EdgeConstraintSet":
        return EdgeConstraintSet(self.blacklist | other.blacklist, self.whitelist | other.whitelist)

    def to_dict(self) -> dict:
        return {
            "blacklist": [list(e) for e in sorted(self.blacklist)],
            "whitelist": [list(e) for e in sorted(self.whitelist)],
        }


def temporal_blacklist(years: Sequence[int], outcome: str = OUTCOME) -> EdgeConstraintSet:
    """
    Forbid effects backward in time and from the outcome to any year.

    The blacklist holds every ``X_t' -> X_t`` with ``t' > t`` and every
    ``outcome -> X_t``; the whitelist is empty.

    Raises:
        ValidationError: If years are duplicated or not increasing
    """
    years = [int(y) for y in years]
    if len(set(years)) != len(years):
        raise ValidationError(f"Duplicate years in {years}")
    if any(b <= a for a, b in zip(years, years[1:])):
        raise ValidationError(f"Years must be strictly increasing, got {years}")
    blacklist = set()
    for i, early in enumerate(years):
        for late in years[i + 1:]:
            blacklist.add((year_label(late), year_label(early)))
        blacklist.add((outcome, year_label(early)))
    return EdgeConstraintSet(frozenset(blacklist))


def constraints_for_columns(columns: Sequence[str], outcome: str = OUTCOME) -> EdgeConstraintSet:
    """Temporal blacklist derived from ``X<year>`` column labels."""
    years = []
    for c in columns:
        if c == outcome:
            continue
        if not (c.startswith("X") and c[1:].isdigit()):
            raise ValidationError(f"Column '{c}' is not a year label like X1997")
        years.append(int(c[1:]))
    return temporal_blacklist(years, outcome)


@dataclass(frozen=True)
class TraceStep:
    """One accepted move."""

    restart: int
    iteration: int
    move: str
    parent: str
    child: str
    delta: float
    score: float

    def to_dict(self) -> dict:
        return {
            "restart": self.restart,
            "iteration": self.iteration,
            "move": self.move,
            "edge": [self.parent, self.child],
            "delta": self.delta,
            "score": self.score,
        }


@dataclass
class SearchResult:
    """Best DAG over all climbs with its score and the accepted-move trace."""

    dag: Dag
    score: float
    trace: List[TraceStep] = field(default_factory=list)
    best_restart: int = 0


class _Climber:
    """Greedy add/delete/reverse climber over a fixed scorer and constraint set."""

    def __init__(
        self,
        scorer: LocalScorer,
        constraints: EdgeConstraintSet,
        config: SearchConfig,
    ) -> None:
        self.scorer = scorer
        self.labels = scorer.labels
        self.constraints = constraints
        self.config = config
        self.pairs = sorted(
            (u, v)
            for u in self.labels
            for v in self.labels
            if u != v and constraints.allows(u, v)
        )

    def _try_local(self, child: str, parents: Set[str]) -> Optional[float]:
        try:
            return self.scorer.local_score(child, parents)
        except (FitError, NumericalError):
            return None

    def _room_for_parent(self, parents: Dict[str, Set[str]], child: str) -> bool:
        bound = self.config.max_parents
        return bound is None or len(parents[child]) < bound

    def _candidates(
        self, graph: nx.DiGraph, parents: Dict[str, Set[str]], local: Dict[str, float]
    ) -> List[Tuple[float, Tuple[str, str, int], str, str, str]]:
        desc = {v: nx.descendants(graph, v) for v in self.labels}
        whitelist = self.constraints.whitelist
        out = []
        for u, v in self.pairs:
            if graph.has_edge(u, v) or graph.has_edge(v, u):
                continue
            if u in desc[v] or not self._room_for_parent(parents, v):
                continue
            new = self._try_local(v, parents[v] | {u})
            if new is not None:
                out.append((new - local[v], (v, u, _KIND_RANK[ADD]), ADD, u, v))
        for u, v in sorted(graph.edges()):
            if (u, v) in whitelist:
                continue
            new_v = self._try_local(v, parents[v] - {u})
            if new_v is not None:
                out.append((new_v - local[v], (v, u, _KIND_RANK[DELETE]), DELETE, u, v))
            if not self.constraints.allows(v, u) or not self._room_for_parent(parents, u):
                continue
            if any(v in desc[w] for w in graph.successors(u) if w != v):
                continue
            new_u = self._try_local(u, parents[u] | {v})
            if new_v is None or new_u is None:
                continue
            delta = new_v + new_u - local[v] - local[u]
            out.append((delta, (u, v, _KIND_RANK[REVERSE]), REVERSE, u, v))
        return out

    def climb(
        self,
        parents: Dict[str, Set[str]],
        restart: int,
        trace: List[TraceStep],
    ) -> Tuple[Dict[str, Set[str]], float]:
        """Climb from ``parents`` until no move improves beyond the tolerance."""
        parents = {v: set(ps) for v, ps in parents.items()}
        graph = nx.DiGraph()
        graph.add_nodes_from(self.labels)
        graph.add_edges_from((p, v) for v, ps in parents.items() for p in ps)
        local = {v: self.scorer.local_score(v, parents[v]) for v in self.labels}
        score = sum(local.values())
        tol = self.config.tie_tolerance

        for iteration in range(self.config.max_iterations):
            candidates = self._candidates(graph, parents, local)
            if not candidates:
                break
            best = max(c[0] for c in candidates)
            if best <= tol:
                break
            delta, _, kind, u, v = min(
                (c for c in candidates if c[0] >= best - tol), key=lambda c: c[1]
            )
            if kind == ADD:
                parents[v].add(u)
                graph.add_edge(u, v)
            elif kind == DELETE:
                parents[v].discard(u)
                graph.remove_edge(u, v)
            else:
                parents[v].discard(u)
                parents[u].add(v)
                graph.remove_edge(u, v)
                graph.add_edge(v, u)
                local[u] = self.scorer.local_score(u, parents[u])
            local[v] = self.scorer.local_score(v, parents[v])
            score += delta
            trace.append(TraceStep(restart, iteration, kind, u, v, float(delta), float(score)))
        return parents, sum(local.values())

    def perturb(
        self, parents: Dict[str, Set[str]], rng: np.random.Generator
    ) -> Dict[str, Set[str]]:
        """Toggle ``config.perturbation`` random legal edges."""
        parents = {v: set(ps) for v, ps in parents.items()}
        graph = nx.DiGraph()
        graph.add_nodes_from(self.labels)
        graph.add_edges_from((p, v) for v, ps in parents.items() for p in ps)
        for _ in range(self.config.perturbation):
            toggles = []
            for u, v in self.pairs:
                if graph.has_edge(u, v):
                    if (u, v) not in self.constraints.whitelist:
                        toggles.append((u, v))
                elif (
                    not graph.has_edge(v, u)
                    and self._room_for_parent(parents, v)
                    and not nx.has_path(graph, v, u)
                ):
                    toggles.append((u, v))
            if not toggles:
                break
            u, v = toggles[int(rng.integers(len(toggles)))]
            if graph.has_edge(u, v):
                graph.remove_edge(u, v)
                parents[v].discard(u)
            else:
                graph.add_edge(u, v)
                parents[v].add(u)
        return parents


def _edge_key(parents: Dict[str, Set[str]]) -> List[Edge]:
    return sorted((p, v) for v, ps in parents.items() for p in ps)


def hill_climb(
    data: pd.DataFrame,
    constraints: Optional[EdgeConstraintSet] = None,
    config: Optional[SearchConfig] = None,
) -> SearchResult:
    """
    Hill-climbing with random restarts under edge constraints.

    The first climb starts from the whitelist-only graph. Each restart
    perturbs the best graph found so far and climbs again; a restart
    replaces the incumbent only if it scores higher beyond the tie
    tolerance, or ties and has the lexicographically smaller edge list.

    Args:
        data: Complete frame, one column per node
        constraints: Black/whitelists (default: none)
        config: Search knobs (default: SearchConfig())

    Returns:
        SearchResult with the best DAG, its BIC and the move trace

    Raises:
        InsufficientDataError: Fewer than 3 rows
        ConstraintError: Constraints referencing unknown nodes or a cyclic whitelist
    """
    frame = as_complete_frame(data)
    if len(frame) < MIN_ROWS:
        raise InsufficientDataError(f"Structure search needs at least {MIN_ROWS} rows, got {len(frame)}")
    constraints = constraints or EdgeConstraintSet()
    config = config or SearchConfig()
    constraints.check_labels(frame.columns)

    scorer = LocalScorer(frame)
    climber = _Climber(scorer, constraints, config)
    start = {v: set() for v in scorer.labels}
    for u, v in constraints.whitelist:
        start[v].add(u)

    trace: List[TraceStep] = []
    best, best_score = climber.climb(start, 0, trace)
    best_restart = 0
    rng = np.random.default_rng(config.seed)
    if config.max_iterations > 0:
        for restart in range(1, config.restarts + 1):
            perturbed = climber.perturb(best, rng)
            try:
                candidate, score = climber.climb(perturbed, restart, trace)
            except (FitError, NumericalError) as e:
                logger.debug("Restart %d skipped: %s", restart, e)
                continue
            if score > best_score + config.tie_tolerance or (
                abs(score - best_score) <= config.tie_tolerance
                and _edge_key(candidate) < _edge_key(best)
            ):
                best, best_score, best_restart = candidate, score, restart

    dag = Dag(scorer.labels, _edge_key(best))
    logger.debug("Hill-climb finished: %d edges, score %.6f (restart %d)", len(dag.edges), best_score, best_restart)
    return SearchResult(dag=dag, score=scorer.score(dag), trace=trace, best_restart=best_restart)
