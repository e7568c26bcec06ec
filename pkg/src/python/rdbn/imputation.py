"""
rdbn Imputation

KNN seed completion of the missing predictor cells followed by iterative
Bayesian-network imputation: each iteration hides a random batch of
observed cells, re-learns the network on the current completion, imputes
the hidden and missing cells by Gaussian conditioning and scores the
result by its squared gap on the hidden cells.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from rdbn.config import ImputationConfig
from rdbn.data_pipeline import CellIndex, MergedDataset
from rdbn.exceptions import ImputationError, ValidationError
from rdbn.network import FittedNetwork, conditional_mean, fit_network, joint_distribution
from rdbn.search import EdgeConstraintSet, constraints_for_columns, hill_climb

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.Generator, None]


# ----------------------------------------------------------------------
# KNN seed
# ----------------------------------------------------------------------


def _column_scales(matrix: np.ndarray) -> np.ndarray:
    observed = ~np.isnan(matrix)
    counts = np.maximum(observed.sum(axis=0), 1)
    means = np.where(observed, matrix, 0.0).sum(axis=0) / counts
    spread = np.where(observed, matrix - means, 0.0)
    scales = np.sqrt((spread * spread).sum(axis=0) / counts)
    return np.where(scales > 0, scales, 1.0)


def knn_distances(matrix: np.ndarray, row: int) -> np.ndarray:
    """
    Distances from ``row`` to every row of ``matrix`` (NaN = missing).

    Each column is scaled by its observed standard deviation; the distance
    is the root mean squared scaled difference over co-observed columns.
    Rows sharing no observed column with ``row``, and ``row`` itself, are
    at infinity.
    """
    scaled = matrix / _column_scales(matrix)
    diff = scaled - scaled[row]
    both = ~np.isnan(diff)
    overlap = both.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_sq = np.where(both, diff * diff, 0.0).sum(axis=1) / overlap
    dist = np.where(overlap > 0, np.sqrt(mean_sq), np.inf)
    dist[row] = np.inf
    return dist


def knn_impute(d: MergedDataset, k: int = 10) -> np.ndarray:
    """
    Fill each missing predictor cell with the median of its column over
    the ``k`` nearest rows observed there (ties by row index).

    Args:
        d: Dataset with missing predictor cells
        k: Number of neighbours

    Returns:
        Completed ``n x p`` predictor matrix

    Raises:
        ImputationError: A row without observed predictors, or a cell with
            no candidate neighbour
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    matrix = d.predictor_matrix()
    missing = d.predictor_mask()
    completed = matrix.copy()
    empty = np.nonzero(missing.all(axis=1))[0]
    if empty.size:
        raise ImputationError(f"Country '{d.countries[empty[0]]}' has no observed predictor")

    for r in np.nonzero(missing.any(axis=1))[0]:
        dist = knn_distances(matrix, int(r))
        for c in np.nonzero(missing[r])[0]:
            candidates = [j for j in np.argsort(dist, kind="stable") if np.isfinite(dist[j]) and not missing[j, c]]
            if not candidates:
                raise ImputationError(
                    f"No neighbour observed at ({d.countries[r]}, {d.predictor_columns[c]})"
                )
            if len(candidates) < k:
                logger.warning(
                    "Only %d neighbours for (%s, %s); using all of them",
                    len(candidates), d.countries[r], d.predictor_columns[c],
                )
            completed[r, c] = float(np.median(matrix[candidates[:k], c]))
    return completed


# ----------------------------------------------------------------------
# Masking and gap
# ----------------------------------------------------------------------


def mask_random_cells(d: MergedDataset, m: int, seed: SeedLike = None) -> List[CellIndex]:
    """
    Uniform sample without replacement of ``m`` observed predictor cells.

    Args:
        d: Dataset whose mask defines S_NA
        m: Number of cells to hide
        seed: Integer seed or a numpy Generator

    Returns:
        Sorted (row, column) predictor indexes, disjoint from S_NA

    Raises:
        ValidationError: If ``m`` exceeds the number of observed cells
    """
    observed = d.observed_indexes()
    if m < 0 or m > len(observed):
        raise ValidationError(f"Cannot hide {m} cells: only {len(observed)} are observed")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(observed), size=m, replace=False)
    return sorted(observed[i] for i in picks)


def gap(original: np.ndarray, imputed: np.ndarray, s_r: Sequence[CellIndex]) -> float:
    """Sum of squared differences of two matrices over ``s_r``."""
    original = np.asarray(original, dtype=float)
    imputed = np.asarray(imputed, dtype=float)
    if original.shape != imputed.shape:
        raise ValidationError(f"Shape mismatch: {original.shape} vs {imputed.shape}")
    if not s_r:
        return 0.0
    rows, cols = (np.array(a) for a in zip(*s_r))
    diff = original[rows, cols] - imputed[rows, cols]
    return float(np.sum(diff * diff))


def impute_cells(
    net: FittedNetwork,
    values: np.ndarray,
    columns: Sequence[str],
    targets: np.ndarray,
) -> np.ndarray:
    """
    Replace the ``targets`` cells of each row by their conditional mean
    given the remaining cells of that row.

    Args:
        net: Fitted network over ``columns``
        values: ``n x len(columns)`` matrix; target cells may hold anything
        columns: Column labels of ``values``
        targets: Boolean mask of the cells to impute

    Returns:
        Copy of ``values`` with the target cells imputed
    """
    joint = joint_distribution(net)
    out = values.copy()
    labels = list(columns)
    for r in np.nonzero(targets.any(axis=1))[0]:
        hidden = [labels[c] for c in np.nonzero(targets[r])[0]]
        evidence = {labels[c]: values[r, c] for c in np.nonzero(~targets[r])[0]}
        out[r, targets[r]] = conditional_mean(joint, evidence, hidden)
    return out


# ----------------------------------------------------------------------
# Iterative imputation
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ImputationStep:
    iteration: int
    gap: float
    masked: int
    accepted: bool


@dataclass
class ImputationTrace:
    """
    Per-iteration gaps of one imputation run.

    Iterations are numbered from 1. In sweep mode a step is accepted when
    it lowers the best gap so far; in faithful mode when it does not
    exceed the previous accepted gap.
    """

    mode: str
    seed: int
    steps: List[ImputationStep] = field(default_factory=list)

    @property
    def best_gap(self) -> float:
        accepted = [s.gap for s in self.steps if s.accepted]
        return min(accepted) if accepted else math.inf

    @property
    def best_iteration(self) -> int:
        """Rank of the minimum gap (0 when nothing was accepted)."""
        best = None
        for s in self.steps:
            if s.accepted and (best is None or s.gap < best.gap):
                best = s
        return best.iteration if best else 0

    @property
    def final_iteration(self) -> int:
        return self.steps[-1].iteration if self.steps else 0

    def __len__(self) -> int:
        return len(self.steps)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "iteration": [s.iteration for s in self.steps],
                "D": [s.gap for s in self.steps],
                "accepted": [s.accepted for s in self.steps],
            }
        )

    def summary(self) -> Dict[str, object]:
        best = self.best_gap
        return {
            "mode": self.mode,
            "seed": self.seed,
            "iterations": len(self.steps),
            "final_iteration": self.final_iteration,
            "best_gap": best if math.isfinite(best) else None,
            "best_iteration": self.best_iteration,
        }


def bnii(
    d: MergedDataset,
    config: Optional[ImputationConfig] = None,
    constraints: Optional[EdgeConstraintSet] = None,
) -> Tuple[MergedDataset, ImputationTrace]:
    """
    Bayesian-network iterative imputation.

    Starting from the KNN completion, every iteration:

    1. hides ``mask_size`` observed cells (S_r),
    2. learns a structure by hill-climbing on the current completion and
       fits it,
    3. imputes S_r and S_NA row by row from the fitted joint Gaussian,
    4. scores the gap D on S_r.

    The next completion takes the new S_NA values; observed cells keep
    their data. ``faithful`` mode stops at the first D above the last
    accepted one and returns the last accepted completion. ``sweep`` mode
    runs all iterations and returns the completion with the minimum D.

    Args:
        d: Merged dataset
        config: Iteration settings (default: ImputationConfig())
        constraints: Search constraints (default: temporal blacklist of
                     the dataset's columns)

    Returns:
        (completed dataset, trace); a complete input comes back unchanged
        with an empty trace

    Raises:
        ImputationError: KNN failure or a non-finite gap
        ValidationError: mask_size larger than the observed cells
    """
    config = config or ImputationConfig()
    trace = ImputationTrace(mode=config.mode, seed=config.seed)
    if d.is_complete:
        logger.info("No missing predictor cells; skipping imputation")
        return d, trace
    if config.mask_size > len(d.observed_indexes()):
        raise ValidationError(
            f"mask_size {config.mask_size} exceeds the {len(d.observed_indexes())} observed cells"
        )
    constraints = constraints or constraints_for_columns(d.columns)

    original = d.predictor_matrix()
    missing = d.predictor_mask()
    current = knn_impute(d, config.k)
    best = current.copy()
    last_accepted_gap = math.inf
    best_gap = math.inf
    rng = np.random.default_rng(config.seed)
    targets = np.zeros(d.values.shape, dtype=bool)

    logger.info(
        "BNII %s mode: N=%d m=%d k=%d, %d missing cells",
        config.mode, config.iterations, config.mask_size, config.k, d.n_missing,
    )
    for iteration in range(1, config.iterations + 1):
        s_r = mask_random_cells(d, config.mask_size, rng)
        search = config.search.with_seed(int(rng.integers(0, 2**32)))

        full = np.column_stack([d.values[:, 0], current])
        frame = pd.DataFrame(full, columns=list(d.columns))
        structure = hill_climb(frame, constraints, search)
        net = fit_network(structure.dag, frame)

        targets[:, 1:] = missing
        for r, c in s_r:
            targets[r, c + 1] = True
        candidate = impute_cells(net, full, d.columns, targets)[:, 1:]
        d_gap = gap(original, candidate, s_r)
        if not math.isfinite(d_gap):
            raise ImputationError(
                f"Non-finite gap at iteration {iteration} ({len(structure.dag.edges)} edges learned)"
            )

        if config.mode == "faithful":
            accepted = d_gap <= last_accepted_gap
            trace.steps.append(ImputationStep(iteration, d_gap, len(s_r), accepted))
            if not accepted:
                logger.info("Stopping at iteration %d: D=%.6g > %.6g", iteration, d_gap, last_accepted_gap)
                break
            last_accepted_gap = d_gap
            current = np.where(missing, candidate, original)
            best = current
        else:
            accepted = d_gap < best_gap
            trace.steps.append(ImputationStep(iteration, d_gap, len(s_r), accepted))
            current = np.where(missing, candidate, original)
            if accepted:
                best_gap = d_gap
                best = current
        logger.debug("Iteration %d: D=%.6g accepted=%s", iteration, d_gap, accepted)

    logger.info(
        "BNII finished after %d iterations; best D=%.6g at rank %d",
        trace.final_iteration, trace.best_gap, trace.best_iteration,
    )
    return d.with_predictors(best), trace
