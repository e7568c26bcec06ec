"""
rdbn Synthetic Data

Ground-truth linear-Gaussian scenarios, forward sampling, MCAR masking and
exhaustive DAG enumeration for small node sets.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from rdbn.config import OUTCOME, YEARS, predictor_labels, year_label
from rdbn.dag import Dag, Edge
from rdbn.data_pipeline import MergedDataset
from rdbn.exceptions import (
    DeserializationError,
    FitError,
    NumericalError,
    StructuralError,
    ValidationError,
)
from rdbn.network import FittedNetwork, LinearGaussianNode, LocalScorer, as_complete_frame
from rdbn.search import EdgeConstraintSet

logger = logging.getLogger(__name__)

MAX_ENUMERATION_NODES = 4
OVERRIDE_ENUMERATION_NODES = 5
MAX_ROW_REDRAWS = 100

# Generator truth for the study-shaped scenario.
MIMIC_ROOT_MEAN = 11.0
MIMIC_ROOT_VARIANCE = 1.0
MIMIC_CHAIN_INTERCEPT = 0.55
MIMIC_CHAIN_COEFFICIENT = 0.95
MIMIC_CHAIN_VARIANCE = 0.02
MIMIC_CHAIN_END = 2005
MIMIC_OUTCOME_INTERCEPT = 192.0
MIMIC_OUTCOME_SLOPE = 25.0
MIMIC_R_SQUARED = 0.35


@dataclass(frozen=True)
class ScenarioSpec:
    """A true network plus how to sample from it."""

    truth: FittedNetwork
    n: int
    missing_rate: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError(f"n must be >= 1, got {self.n}")
        if not 0 <= self.missing_rate < 1:
            raise ValidationError(f"missing_rate must be in [0, 1), got {self.missing_rate}")

    @property
    def nodes(self) -> Tuple[str, ...]:
        return self.truth.nodes

    @property
    def dag(self) -> Dag:
        return self.truth.dag

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "missing_rate": self.missing_rate,
            "seed": self.seed,
            "truth": self.truth.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScenarioSpec":
        try:
            truth = FittedNetwork.from_dict(data["truth"])
            return cls(truth, int(data["n"]), float(data.get("missing_rate", 0.0)), int(data.get("seed", 0)))
        except (KeyError, TypeError) as e:
            raise DeserializationError(f"Malformed scenario: {e}")
        except StructuralError as e:
            raise DeserializationError(f"Scenario truth is not a DAG: {e}")


def generate_from_network(net: FittedNetwork, n: int, seed: Optional[int] = None) -> pd.DataFrame:
    """
    Forward-sample ``n`` rows in topological order.

    Returns:
        Frame with one column per node, in node order
    """
    if n < 0:
        raise ValidationError(f"n must be >= 0, got {n}")
    rng = np.random.default_rng(seed)
    columns = {}
    for v in net.dag.topological_order():
        model = net[v]
        parents = np.column_stack([columns[p] for p in model.parents]) if model.parents else np.empty((n, 0))
        mean = model.predict(parents)
        noise = rng.standard_normal(n) * math.sqrt(model.residual_variance)
        columns[v] = mean + noise
    return pd.DataFrame({v: columns[v] for v in net.nodes})


def apply_mcar(
    data: pd.DataFrame,
    rate: float,
    seed: Optional[int] = None,
    outcome: str = OUTCOME,
    subject: str = "reading",
) -> MergedDataset:
    """
    Mask every predictor cell independently with probability ``rate``.

    The outcome column is never masked and comes first in the result. A
    row that would lose all its predictors is redrawn.

    Raises:
        ValidationError: rate outside [0, 1), no outcome column, or a row
            still fully masked after 100 redraws
    """
    if not 0 <= rate < 1:
        raise ValidationError(f"rate must be in [0, 1), got {rate}")
    frame = as_complete_frame(data)
    if outcome not in frame.columns:
        raise ValidationError(f"data has no outcome column '{outcome}'")
    predictors = [c for c in frame.columns if c != outcome]
    frame = frame.loc[:, [outcome] + predictors]
    if isinstance(frame.index, pd.RangeIndex):
        frame.index = [f"C{i + 1:03d}" for i in range(len(frame))]
    rng = np.random.default_rng(seed)

    values = frame.to_numpy(dtype=float).copy()
    p = len(predictors)
    for r in range(len(frame)):
        for _ in range(MAX_ROW_REDRAWS):
            row_mask = rng.random(p) < rate
            if p == 0 or not row_mask.all():
                break
        else:
            raise ValidationError(f"Row {r} lost every predictor after {MAX_ROW_REDRAWS} redraws")
        values[r, 1:][row_mask] = np.nan

    masked = pd.DataFrame(values, index=frame.index, columns=frame.columns)
    return MergedDataset.from_frame(masked, subject=subject)


def study_mimic_scenario(n: int = 57, missing_rate: float = 0.0, seed: int = 0) -> ScenarioSpec:
    """
    Study-shaped truth over ``Y, X1997 ... X2014``.

    X1997 is N(11, 1); each year up to 2005 follows the previous one with
    intercept 0.55, coefficient 0.95 and residual variance 0.02; later
    years are independent N(11, 1). ``Y = 192 + 25 X2005 + e`` with the
    noise variance giving R^2 = 0.35.
    """
    models = {}
    edges: List[Edge] = []
    variance = MIMIC_ROOT_VARIANCE
    for year in YEARS:
        v = year_label(year)
        if year == YEARS[0] or year > MIMIC_CHAIN_END:
            models[v] = LinearGaussianNode(v, (), MIMIC_ROOT_MEAN, (), MIMIC_ROOT_VARIANCE)
            continue
        prev = year_label(year - 1)
        models[v] = LinearGaussianNode(
            v, (prev,), MIMIC_CHAIN_INTERCEPT, (MIMIC_CHAIN_COEFFICIENT,), MIMIC_CHAIN_VARIANCE
        )
        edges.append((prev, v))
        variance = MIMIC_CHAIN_COEFFICIENT ** 2 * variance + MIMIC_CHAIN_VARIANCE

    signal = MIMIC_OUTCOME_SLOPE ** 2 * variance
    noise = signal * (1.0 - MIMIC_R_SQUARED) / MIMIC_R_SQUARED
    end = year_label(MIMIC_CHAIN_END)
    models[OUTCOME] = LinearGaussianNode(
        OUTCOME, (end,), MIMIC_OUTCOME_INTERCEPT, (MIMIC_OUTCOME_SLOPE,), noise
    )
    edges.append((end, OUTCOME))

    dag = Dag((OUTCOME,) + predictor_labels(), edges)
    return ScenarioSpec(FittedNetwork(dag, models, n), n, missing_rate, seed)


def random_network(
    labels: Sequence[str],
    seed: Optional[int] = None,
    edge_probability: float = 0.5,
) -> FittedNetwork:
    """
    Random linear-Gaussian truth whose edges follow the label order.

    Coefficients are drawn with magnitude in [0.5, 1.5] and random sign;
    residual variances in [0.5, 1.5].
    """
    rng = np.random.default_rng(seed)
    edges = [
        (u, v)
        for i, v in enumerate(labels)
        for u in labels[:i]
        if rng.random() < edge_probability
    ]
    dag = Dag(labels, edges)
    models = {}
    for v in labels:
        parents = dag.parents(v)
        coefficients = tuple(
            float(rng.uniform(0.5, 1.5) * rng.choice([-1.0, 1.0])) for _ in parents
        )
        models[v] = LinearGaussianNode(
            v, parents, float(rng.normal()), coefficients, float(rng.uniform(0.5, 1.5))
        )
    return FittedNetwork(dag, models, 0)


def simulate_scenario(spec: ScenarioSpec) -> Tuple[pd.DataFrame, MergedDataset]:
    """Sample the complete ground truth and its MCAR-masked dataset from one seed."""
    seeds = np.random.SeedSequence(spec.seed).spawn(2)
    complete = generate_from_network(spec.truth, spec.n, np.random.default_rng(seeds[0]))
    dataset = apply_mcar(complete, spec.missing_rate, np.random.default_rng(seeds[1]))
    complete = complete.loc[:, list(dataset.columns)]
    complete.index = list(dataset.countries)
    complete.index.name = "country"
    return complete, dataset


# ----------------------------------------------------------------------
# Exhaustive enumeration
# ----------------------------------------------------------------------


@dataclass
class EnumerationResult:
    """Best admissible DAG and the score of every candidate."""

    dag: Dag
    score: float
    scores: List[Tuple[Dag, float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.scores)


def admissible_dags(labels: Sequence[str], constraints: Optional[EdgeConstraintSet] = None) -> List[Dag]:
    """Every DAG over ``labels`` that avoids the blacklist and contains the whitelist."""
    constraints = constraints or EdgeConstraintSet()
    pairs = list(itertools.combinations(labels, 2))
    dags = []
    for states in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = []
        for (u, v), s in zip(pairs, states):
            if s == 1:
                edges.append((u, v))
            elif s == 2:
                edges.append((v, u))
        chosen = set(edges)
        if any(e in constraints.blacklist for e in chosen) or not constraints.whitelist <= chosen:
            continue
        try:
            dags.append(Dag(labels, edges))
        except StructuralError:
            continue
    return dags


def enumerate_dags(
    data: pd.DataFrame,
    constraints: Optional[EdgeConstraintSet] = None,
    jobs: int = 1,
    allow_five: bool = False,
) -> EnumerationResult:
    """
    Score every admissible DAG over the columns of ``data`` by BIC.

    Candidates whose score is undefined (rank-deficient or exact fits)
    are left out. Ties go to the lexicographically smallest edge list.

    Args:
        data: Complete frame with at most 4 columns (5 with ``allow_five``)
        constraints: Black/whitelists
        jobs: Scoring threads
        allow_five: Lift the node cap to 5

    Raises:
        ValidationError: Too many nodes, or no scorable candidate
    """
    frame = as_complete_frame(data)
    labels = tuple(str(c) for c in frame.columns)
    cap = OVERRIDE_ENUMERATION_NODES if allow_five else MAX_ENUMERATION_NODES
    if len(labels) > cap:
        raise ValidationError(f"Enumeration is limited to {cap} nodes, got {len(labels)}")
    if jobs < 1:
        raise ValidationError(f"jobs must be >= 1, got {jobs}")
    constraints = constraints or EdgeConstraintSet()
    constraints.check_labels(labels)

    scorer = LocalScorer(frame)
    candidates = admissible_dags(labels, constraints)

    def score(dag: Dag) -> Optional[float]:
        try:
            return scorer.score(dag)
        except (FitError, NumericalError):
            return None

    if jobs == 1:
        values = [score(g) for g in candidates]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(score, candidates))

    scored = [(g, s) for g, s in zip(candidates, values) if s is not None]
    if not scored:
        raise ValidationError("No admissible DAG has a defined score")
    best, best_score = scored[0]
    for g, s in scored[1:]:
        if s > best_score or (s == best_score and sorted(g.edges) < sorted(best.edges)):
            best, best_score = g, s
    logger.debug("Enumerated %d DAGs over %d nodes; best score %.6f", len(scored), len(labels), best_score)
    return EnumerationResult(best, best_score, scored)
