"""
rdbn Study - Main API Layer

Runs the pipeline stages against one output directory and records every
run in a manifest. Orchestrates the data, search, bootstrap, imputation,
analysis and persistence modules.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from rdbn._version import __version__
from rdbn.analysis import (
    AnalysisReport,
    RegressionTable,
    build_report,
    correlations,
    regression_table,
    render_regression_table,
)
from rdbn.bootstrap import EdgeStrengthTable, average_network, bootstrap_strength
from rdbn.config import (
    OUTCOME,
    SUBJECT_LABELS,
    BootstrapConfig,
    ImputationConfig,
    SearchConfig,
    default_output_dir,
)
from rdbn.dag import Dag
from rdbn.data_pipeline import (
    MergedDataset,
    merge,
    missingness_summary,
    read_indicator_csv,
    read_score_csv,
    score_correlations,
)
from rdbn.exceptions import DeserializationError, PipelineError, ValidationError
from rdbn.imputation import ImputationTrace, bnii
from rdbn.network import FittedNetwork, fit_network
from rdbn.persistence import ArtifactStore, PathLike, file_digest
from rdbn.search import EdgeConstraintSet, SearchResult, constraints_for_columns, hill_climb
from rdbn.synthetic import ScenarioSpec, simulate_scenario

logger = logging.getLogger(__name__)


def draw_seed() -> int:
    """Fresh 32-bit seed from OS entropy, for runs started without one."""
    return int(np.random.SeedSequence().entropy % (2**32))


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """Everything needed to replay a command."""

    command: str
    argv: List[str]
    flags: Dict[str, Any]
    seed: Optional[int]
    inputs: Dict[str, str] = field(default_factory=dict)
    rdbn_version: str = __version__
    started: str = field(default_factory=_now)
    finished: Optional[str] = None

    def record_input(self, path: PathLike) -> None:
        if not Path(path).is_file():
            raise PipelineError(f"File not found: {path}")
        self.inputs[str(path)] = file_digest(path)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunManifest":
        try:
            return cls(
                command=str(data["command"]),
                argv=[str(a) for a in data["argv"]],
                flags=dict(data.get("flags", {})),
                seed=data.get("seed"),
                inputs=dict(data.get("inputs", {})),
                rdbn_version=str(data.get("rdbn_version", __version__)),
                started=str(data.get("started", "")),
                finished=data.get("finished"),
            )
        except (KeyError, TypeError) as e:
            raise DeserializationError(f"Malformed manifest: {e}")

    def changed_inputs(self) -> List[str]:
        """Inputs whose current digest differs from the recorded one."""
        changed = []
        for path, digest in self.inputs.items():
            if not Path(path).exists() or file_digest(path) != digest:
                changed.append(path)
        return changed


def _node_labels(subject: str) -> Dict[str, str]:
    return {OUTCOME: SUBJECT_LABELS.get(subject, OUTCOME)}


class Study:
    """
    A study run bound to one output directory.

    Every stage returns its in-memory results and writes its artifacts to
    the directory. The manifest set with ``begin`` is saved on ``close``.

    Args:
        out_dir: Output directory (default: ``$RDBN_OUTPUT_DIR`` or
                 ``./rdbn_output``). Created if missing.
        jobs: Worker cap for bootstrap replicates and enumeration

    Example:
        >>> from rdbn import Study
        >>>
        >>> with Study('./run') as study:
        ...     data = study.ingest('scores.csv', 'indicators.csv', 'reading')
        ...     completed, trace = study.impute(data)
        ...     strengths, consensus = study.bootstrap(completed)
        ...     report, table = study.analyze(completed, consensus, strengths)
    """

    def __init__(self, out_dir: Optional[PathLike] = None, jobs: int = 1) -> None:
        if jobs < 1:
            raise ValidationError(f"jobs must be >= 1, got {jobs}")
        self._store = ArtifactStore(out_dir or default_output_dir())
        self.jobs = jobs
        self.manifest: Optional[RunManifest] = None

    @property
    def store(self) -> ArtifactStore:
        return self._store

    @property
    def out_dir(self) -> Path:
        return self._store.out_dir

    def begin(self, manifest: RunManifest) -> None:
        self.manifest = manifest

    def record_inputs(self, *paths: PathLike) -> None:
        if self.manifest is not None:
            for p in paths:
                self.manifest.record_input(p)

    # ------------------------------------------------------------------
    # Stages
    # ------------------------------------------------------------------

    def ingest(self, score_csv: PathLike, indicator_csv: PathLike, subject: str) -> MergedDataset:
        """Read, derive and merge the inputs; write ``merged.*`` and summaries."""
        self.record_inputs(score_csv, indicator_csv)
        scores = read_score_csv(score_csv)
        indicators = read_indicator_csv(indicator_csv)
        dataset = merge(scores, indicators, subject)
        summary = missingness_summary(dataset)

        self._store.write_dataset("merged", dataset)
        self._store.write_frame("missingness.csv", summary.to_frame())
        self._store.write_frame("score_correlations.csv", score_correlations(scores), index=True)
        if summary.worst_countries:
            logger.info(
                "Most incomplete countries: %s",
                ", ".join(f"{c} ({k})" for c, k in summary.worst_countries),
            )
        return dataset

    def impute(
        self,
        dataset: MergedDataset,
        config: Optional[ImputationConfig] = None,
        constraints: Optional[EdgeConstraintSet] = None,
    ) -> Tuple[MergedDataset, ImputationTrace]:
        """Run BNII; write ``completed.*``, ``imputation_trace.csv`` and the summary."""
        config = config or ImputationConfig()
        completed, trace = bnii(dataset, config, constraints)
        self._store.write_dataset("completed", completed)
        self._store.write_frame("imputation_trace.csv", trace.to_frame())
        summary = trace.summary()
        summary.update(
            {"iterations_requested": config.iterations, "mask_size": config.mask_size, "k": config.k}
        )
        self._store.write_json("imputation_summary.json", summary)
        return completed, trace

    def learn(
        self,
        dataset: MergedDataset,
        config: Optional[SearchConfig] = None,
        trace: bool = False,
    ) -> Tuple[SearchResult, FittedNetwork]:
        """Hill-climb on complete data; write ``dag.*``, ``network.json`` and optionally the move log."""
        frame = self._complete_frame(dataset)
        result = hill_climb(frame, constraints_for_columns(dataset.columns), config or SearchConfig())
        net = fit_network(result.dag, frame)
        self._store.write_dag("dag", result.dag, labels=_node_labels(dataset.subject))
        self._store.write_network("network.json", net)
        if trace:
            self._store.write_jsonl("search_trace.jsonl", (s.to_dict() for s in result.trace))
        logger.info("Learned %d edges, BIC %.4f", len(result.dag.edges), result.score)
        return result, net

    def bootstrap(
        self, dataset: MergedDataset, config: Optional[BootstrapConfig] = None
    ) -> Tuple[EdgeStrengthTable, Dag]:
        """Bootstrap strengths and the consensus DAG; write ``strengths.*`` and ``consensus.*``."""
        config = config or BootstrapConfig(jobs=self.jobs)
        frame = self._complete_frame(dataset)
        strengths = bootstrap_strength(frame, constraints_for_columns(dataset.columns), config)
        consensus = average_network(strengths, config.threshold, dataset.columns[0])
        net = fit_network(consensus, frame)

        self._store.write_strengths("strengths", strengths)
        self._store.write_dag(
            "consensus", consensus, strengths=strengths.strengths(), labels=_node_labels(dataset.subject)
        )
        self._store.write_network("consensus_network.json", net)
        return strengths, consensus

    def analyze(
        self, dataset: MergedDataset, consensus: Dag, strengths: EdgeStrengthTable
    ) -> Tuple[AnalysisReport, Optional[RegressionTable]]:
        """Fit the consensus network; write the report, regression table and correlations."""
        frame = self._complete_frame(dataset)
        net = fit_network(consensus, frame)
        report = build_report(net, strengths, dataset)
        report.verify()

        table = None
        path = report.path
        outcome_parents = consensus.parents(dataset.columns[0])
        if path is None and outcome_parents:
            path = [outcome_parents[0], dataset.columns[0]]
        if path is not None:
            table = regression_table(net, path)
            labels = _node_labels(dataset.subject)
            self._store.write_text("regression_table.txt", render_regression_table(table, labels))
            self._store.write_frame("regression_table.csv", table.to_frame())
        self._store.write_frame("report.csv", report.to_frame())
        self._store.write_json("report.json", report.to_dict())
        self._store.write_frame("correlations.csv", correlations(dataset))
        for note in report.notes:
            logger.warning("Report: %s", note)
        return report, table

    def simulate(self, spec: ScenarioSpec) -> Tuple[pd.DataFrame, MergedDataset]:
        """Sample a scenario; write ``scenario.json``, ``truth.*`` and ``simulated.*``."""
        complete, dataset = simulate_scenario(spec)
        self._store.write_json("scenario.json", {"scenario": spec.to_dict()})
        self._store.write_frame("truth.csv", complete, index=True)
        self._store.write_dag("truth", spec.dag)
        self._store.write_dataset("simulated", dataset)
        return complete, dataset

    def pipeline(
        self,
        score_csv: PathLike,
        indicator_csv: PathLike,
        subject: str,
        imputation: Optional[ImputationConfig] = None,
        bootstrap: Optional[BootstrapConfig] = None,
    ) -> AnalysisReport:
        """ingest, impute, bootstrap and analyze in one directory."""
        dataset = self.ingest(score_csv, indicator_csv, subject)
        completed, _ = self.impute(dataset, imputation)
        strengths, consensus = self.bootstrap(completed, bootstrap)
        report, _ = self.analyze(completed, consensus, strengths)
        return report

    # ------------------------------------------------------------------

    @staticmethod
    def _complete_frame(dataset: MergedDataset) -> pd.DataFrame:
        if not dataset.is_complete:
            raise ValidationError(
                f"Dataset has {dataset.n_missing} missing predictor cells; impute it first"
            )
        return dataset.to_frame()

    def close(self) -> None:
        """Stamp and save the manifest, if one was begun."""
        if self.manifest is not None:
            self.manifest.finished = _now()
            self._store.save_manifest(self.manifest.to_dict())

    def __enter__(self) -> "Study":
        """Context manager entry."""
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        """Context manager exit - saves the manifest even on failure."""
        self.close()
        return None  # Don't suppress exceptions

    def __repr__(self) -> str:
        return f"Study(out_dir='{self.out_dir}', jobs={self.jobs})"
