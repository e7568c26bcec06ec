"""
rdbn Configuration

Study-wide constants and the frozen configuration objects for the search,
bootstrap and imputation stages. Every config validates itself on
construction and raises ValidationError on out-of-range values.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Optional, Tuple, Union

from rdbn.exceptions import ValidationError

FIRST_YEAR = 1997
LAST_YEAR = 2014
YEARS: Tuple[int, ...] = tuple(range(FIRST_YEAR, LAST_YEAR + 1))

OUTCOME = "Y"
SUBJECTS = ("math", "reading", "science")
DEFAULT_SUBJECT = "reading"

# Display labels used for the outcome node in DOT files and tables.
SUBJECT_LABELS = {"math": "Math", "reading": "Read", "science": "Science"}

OUTPUT_DIR_ENV = "RDBN_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "./rdbn_output"

DEFAULT_THRESHOLD = 0.6
MAX_OUTCOME_THRESHOLD = "max-outcome"

ThresholdType = Union[float, str]


def year_label(year: int) -> str:
    """Column label of the predictor for ``year`` (``X1997`` ...)."""
    return f"X{year}"


def predictor_labels(years: Tuple[int, ...] = YEARS) -> Tuple[str, ...]:
    return tuple(year_label(y) for y in years)


def default_output_dir() -> str:
    """Output directory from ``RDBN_OUTPUT_DIR`` or the built-in default."""
    return os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR


def _check_nonnegative(name: str, value: int) -> None:
    if value < 0:
        raise ValidationError(f"{name} must be >= 0, got {value}")


@dataclass(frozen=True)
class SearchConfig:
    """
    Knobs for hill-climbing with random restarts.

    Args:
        restarts: Number of perturb-and-climb rounds after the first climb
        perturbation: Random legal edges toggled per restart
        max_iterations: Accepted-move budget per climb
        seed: Master seed for the restart perturbations
        tie_tolerance: Score deltas within this distance are ties
        max_parents: Optional in-degree bound (None = unbounded)
    """

    restarts: int = 10
    perturbation: int = 4
    max_iterations: int = 10_000
    seed: int = 0
    tie_tolerance: float = 1e-9
    max_parents: Optional[int] = None

    def __post_init__(self) -> None:
        _check_nonnegative("restarts", self.restarts)
        _check_nonnegative("perturbation", self.perturbation)
        _check_nonnegative("max_iterations", self.max_iterations)
        if self.tie_tolerance < 0:
            raise ValidationError(f"tie_tolerance must be >= 0, got {self.tie_tolerance}")
        if self.max_parents is not None and self.max_parents < 0:
            raise ValidationError(f"max_parents must be >= 0, got {self.max_parents}")

    def with_seed(self, seed: int) -> "SearchConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class BootstrapConfig:
    """
    Bootstrap model-averaging settings.

    The inner searches default to a single climb per replicate; the
    replicates themselves supply the variability.
    """

    replicates: int = 500
    threshold: ThresholdType = DEFAULT_THRESHOLD
    seed: int = 0
    jobs: int = 1
    search: SearchConfig = field(default_factory=lambda: SearchConfig(restarts=0))

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ValidationError(f"replicates must be >= 1, got {self.replicates}")
        if self.jobs < 1:
            raise ValidationError(f"jobs must be >= 1, got {self.jobs}")
        validate_threshold(self.threshold)


@dataclass(frozen=True)
class ImputationConfig:
    """
    Settings of the iterative Bayesian-network imputation.

    Args:
        iterations: N, the iteration budget
        mask_size: m, observed cells hidden per iteration to measure the gap
        k: Neighbours used by the KNN seed completion
        mode: 'sweep' (fixed N iterations, keep the minimum gap) or
              'faithful' (stop at the first non-improving gap)
        seed: Master seed
        search: Hill-climbing settings used to re-learn the network
    """

    VALID_MODES = ("sweep", "faithful")

    iterations: int = 500
    mask_size: int = 50
    k: int = 10
    mode: str = "sweep"
    seed: int = 0
    search: SearchConfig = field(default_factory=lambda: SearchConfig(restarts=0))

    def __post_init__(self) -> None:
        _check_nonnegative("iterations", self.iterations)
        _check_nonnegative("mask_size", self.mask_size)
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.mode not in self.VALID_MODES:
            raise ValidationError(
                f"Invalid mode '{self.mode}'. Must be one of: {self.VALID_MODES}"
            )


def validate_threshold(threshold: ThresholdType) -> ThresholdType:
    """Accept a fraction in (0, 1] or the ``max-outcome`` keyword."""
    if isinstance(threshold, str):
        if threshold != MAX_OUTCOME_THRESHOLD:
            raise ValidationError(
                f"threshold must be a fraction in (0, 1] or '{MAX_OUTCOME_THRESHOLD}'"
            )
        return threshold
    if not 0 < threshold <= 1:
        raise ValidationError(f"threshold must be in (0, 1], got {threshold}")
    return threshold


def config_to_dict(config: Any) -> Dict[str, Any]:
    """Plain-dict form of a config dataclass for manifests."""
    return asdict(config)
