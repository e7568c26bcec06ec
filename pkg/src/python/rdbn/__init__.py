"""
rdbn - Gaussian Bayesian networks for R&D investment and education scores

Temporal structure learning under ordering constraints, bootstrap model
averaging, iterative Bayesian-network imputation and the contribution and
efficiency indexes of each country.
"""

from rdbn._version import __version__
from rdbn.analysis import (
    AnalysisReport,
    RegressionTable,
    build_report,
    contribution_index,
    correlations,
    efficiency_index,
    extract_path,
    regression_table,
    render_regression_table,
    strongest_edge_to_outcome,
)
from rdbn.bootstrap import EdgeStrengthTable, average_network, bootstrap_strength
from rdbn.config import BootstrapConfig, ImputationConfig, SearchConfig
from rdbn.dag import Dag, validate_dag
from rdbn.data_pipeline import (
    IndicatorTable,
    MergedDataset,
    ScoreTable,
    merge,
    missingness_summary,
    read_indicator_csv,
    read_score_csv,
)
from rdbn.exceptions import (
    RDBNError,
    ValidationError,
    SchemaError,
    PipelineError,
    StructuralError,
    ConstraintError,
    FitError,
    NumericalError,
    InsufficientDataError,
    ImputationError,
    DeserializationError,
)
from rdbn.imputation import ImputationTrace, bnii, gap, knn_impute, mask_random_cells
from rdbn.network import (
    FittedNetwork,
    LinearGaussianNode,
    bic_score,
    fit_network,
    joint_distribution,
    log_likelihood,
    predict_expectation,
)
from rdbn.search import EdgeConstraintSet, SearchResult, hill_climb, temporal_blacklist
from rdbn.study import Study
from rdbn.synthetic import (
    ScenarioSpec,
    apply_mcar,
    enumerate_dags,
    generate_from_network,
    study_mimic_scenario,
)

__all__ = [
    "__version__",
    "Study",
    "Dag",
    "validate_dag",
    "IndicatorTable",
    "ScoreTable",
    "MergedDataset",
    "read_indicator_csv",
    "read_score_csv",
    "merge",
    "missingness_summary",
    "LinearGaussianNode",
    "FittedNetwork",
    "fit_network",
    "log_likelihood",
    "bic_score",
    "joint_distribution",
    "predict_expectation",
    "EdgeConstraintSet",
    "SearchResult",
    "temporal_blacklist",
    "hill_climb",
    "EdgeStrengthTable",
    "bootstrap_strength",
    "average_network",
    "ImputationTrace",
    "knn_impute",
    "mask_random_cells",
    "gap",
    "bnii",
    "RegressionTable",
    "AnalysisReport",
    "strongest_edge_to_outcome",
    "extract_path",
    "regression_table",
    "render_regression_table",
    "contribution_index",
    "efficiency_index",
    "build_report",
    "correlations",
    "ScenarioSpec",
    "generate_from_network",
    "apply_mcar",
    "enumerate_dags",
    "study_mimic_scenario",
    "SearchConfig",
    "BootstrapConfig",
    "ImputationConfig",
    "RDBNError",
    "ValidationError",
    "SchemaError",
    "PipelineError",
    "StructuralError",
    "ConstraintError",
    "FitError",
    "NumericalError",
    "InsufficientDataError",
    "ImputationError",
    "DeserializationError",
]
