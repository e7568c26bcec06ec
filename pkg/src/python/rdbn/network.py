"""
rdbn Linear-Gaussian Networks

Per-node least-squares fits, the decomposable BIC score, the closed-form
joint Gaussian of a fitted network and Gaussian conditioning for prediction
and imputation.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import statsmodels.api as sm
from scipy import stats

from rdbn.dag import Dag
from rdbn.exceptions import FitError, NumericalError, ValidationError

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)

# Relative eigenvalue below which an evidence covariance block is singular.
SINGULAR_TOLERANCE = 1e-10

# Residual variances this small relative to the raw variance count as zero.
ZERO_VARIANCE_TOLERANCE = 1e-12


def is_zero_variance(variance: float, reference: float) -> bool:
    return variance <= ZERO_VARIANCE_TOLERANCE * max(reference, 1e-300)


def as_complete_frame(data: pd.DataFrame) -> pd.DataFrame:
    """Validate that ``data`` is a numeric frame without missing cells."""
    if not isinstance(data, pd.DataFrame):
        raise ValidationError("data must be a pandas DataFrame with one column per node")
    frame = data.astype(float)
    if frame.isna().to_numpy().any():
        raise ValidationError("data must be complete (no missing cells)")
    return frame


# ----------------------------------------------------------------------
# Ordinary least squares
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OLSResult:
    """
    Least-squares fit of ``y`` on an intercept plus regressors.

    ``coefficients``, ``standard_errors``, ``t_values`` and ``p_values`` are
    ordered intercept first. Standard errors use the unbiased residual
    variance ``rss / (n - k - 1)``; ``ml_variance`` is ``rss / n``.
    """

    coefficients: np.ndarray
    standard_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    residuals: np.ndarray
    rss: float
    n: int
    df_resid: int
    r_squared: float
    adj_r_squared: float
    f_statistic: float
    f_p_value: float

    @property
    def n_regressors(self) -> int:
        return len(self.coefficients) - 1

    @property
    def ml_variance(self) -> float:
        return self.rss / self.n

    @property
    def unbiased_variance(self) -> float:
        return self.rss / self.df_resid

    @property
    def residual_std_error(self) -> float:
        return math.sqrt(self.unbiased_variance)

    @property
    def f_df(self) -> Tuple[int, int]:
        return (self.n_regressors, self.df_resid)


def ols(y: np.ndarray, X: np.ndarray, node: Optional[str] = None) -> OLSResult:
    """
    Fit ``y = a + X b + e`` by least squares with statsmodels.

    Args:
        y: Response, shape (n,)
        X: Regressors, shape (n, k); k may be 0
        node: Name used in error messages

    Raises:
        FitError: If the design is rank deficient or leaves no residual df
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(len(y), 1)
    n, k = X.shape
    label = node or "response"
    df_resid = n - k - 1
    if df_resid < 1:
        raise FitError(f"Node '{label}' needs more than {k + 1} rows, got {n}", node=node)

    design = sm.add_constant(X, prepend=True, has_constant="add") if k else np.ones((n, 1))
    if np.linalg.matrix_rank(design) < k + 1:
        raise FitError(f"Rank-deficient parent design for node '{label}'", node=node)

    # exact fits divide by a zero residual variance inside statsmodels
    with np.errstate(divide="ignore", invalid="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit = sm.OLS(y, design).fit()

    coefficients = np.asarray(fit.params, dtype=float)
    standard_errors = np.asarray(fit.bse, dtype=float)
    rss = float(fit.ssr)
    if rss > 0:
        t_values = np.asarray(fit.tvalues, dtype=float)
        p_values = np.asarray(fit.pvalues, dtype=float)
    else:
        t_values = np.where(coefficients == 0, 0.0, np.sign(coefficients) * np.inf)
        p_values = np.where(coefficients == 0, 1.0, 0.0)

    centered = y - y.mean()
    tss = float(centered @ centered)
    if tss > 0:
        r_squared, adj_r_squared = float(fit.rsquared), float(fit.rsquared_adj)
    else:
        r_squared = adj_r_squared = float("nan")
    if k == 0 or tss == 0:
        f_statistic = f_p_value = float("nan")
    elif rss == 0:
        f_statistic, f_p_value = float("inf"), 0.0
    else:
        f_statistic, f_p_value = float(fit.fvalue), float(fit.f_pvalue)

    return OLSResult(
        coefficients=coefficients,
        standard_errors=standard_errors,
        t_values=t_values,
        p_values=p_values,
        residuals=np.asarray(fit.resid, dtype=float),
        rss=rss,
        n=n,
        df_resid=int(fit.df_resid),
        r_squared=r_squared,
        adj_r_squared=adj_r_squared,
        f_statistic=f_statistic,
        f_p_value=f_p_value,
    )


# ----------------------------------------------------------------------
# Fitted networks
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class RegressionSummary:
    """Goodness-of-fit statistics kept with a fitted node for reporting."""

    intercept_se: float
    coefficient_se: Tuple[float, ...]
    intercept_p: float
    coefficient_p: Tuple[float, ...]
    n: int
    df_resid: int
    r_squared: float
    adj_r_squared: float
    residual_std_error: float
    f_statistic: float
    f_p_value: float

    @classmethod
    def from_ols(cls, result: OLSResult) -> "RegressionSummary":
        return cls(
            intercept_se=float(result.standard_errors[0]),
            coefficient_se=tuple(float(s) for s in result.standard_errors[1:]),
            intercept_p=float(result.p_values[0]),
            coefficient_p=tuple(float(p) for p in result.p_values[1:]),
            n=result.n,
            df_resid=result.df_resid,
            r_squared=result.r_squared,
            adj_r_squared=result.adj_r_squared,
            residual_std_error=result.residual_std_error,
            f_statistic=result.f_statistic,
            f_p_value=result.f_p_value,
        )


@dataclass(frozen=True)
class LinearGaussianNode:
    """
    ``node = intercept + sum(coefficients * parents) + e``, ``e ~ N(0, residual_variance)``.
    """

    node: str
    parents: Tuple[str, ...]
    intercept: float
    coefficients: Tuple[float, ...]
    residual_variance: float
    summary: Optional[RegressionSummary] = None

    def __post_init__(self) -> None:
        if len(self.coefficients) != len(self.parents):
            raise ValidationError(
                f"Node '{self.node}' has {len(self.parents)} parents but "
                f"{len(self.coefficients)} coefficients"
            )
        if self.residual_variance < 0:
            raise ValidationError(f"Node '{self.node}' has negative residual variance")

    @property
    def is_degenerate(self) -> bool:
        return self.residual_variance == 0

    def coefficient(self, parent: str) -> float:
        return self.coefficients[self.parents.index(parent)]

    def predict(self, parent_values: np.ndarray) -> np.ndarray:
        """Linear predictor for rows of parent values (columns in parent order)."""
        parent_values = np.asarray(parent_values, dtype=float)
        if not self.parents:
            return np.full(parent_values.shape[0] if parent_values.ndim else 1, self.intercept)
        parent_values = parent_values.reshape(-1, len(self.parents))
        return self.intercept + parent_values @ np.asarray(self.coefficients, dtype=float)

    def to_dict(self) -> dict:
        data = {
            "parents": list(self.parents),
            "intercept": self.intercept,
            "coefficients": list(self.coefficients),
            "residual_variance": self.residual_variance,
        }
        if self.summary is not None:
            data["standard_errors"] = {
                "intercept": self.summary.intercept_se,
                "coefficients": list(self.summary.coefficient_se),
            }
        return data


@dataclass(frozen=True)
class FittedNetwork:
    """A Dag with one linear-Gaussian model per node."""

    dag: Dag
    node_models: Dict[str, LinearGaussianNode]
    sample_size: int

    def __post_init__(self) -> None:
        if set(self.node_models) != set(self.dag.nodes):
            raise ValidationError("Node models must cover exactly the DAG's nodes")
        for v, model in self.node_models.items():
            if set(model.parents) != set(self.dag.parents(v)):
                raise ValidationError(f"Node '{v}' model parents differ from the DAG")

    def __getitem__(self, node: str) -> LinearGaussianNode:
        return self.node_models[node]

    @property
    def nodes(self) -> Tuple[str, ...]:
        return self.dag.nodes

    def to_dict(self) -> dict:
        return {
            "sample_size": self.sample_size,
            "dag": self.dag.to_dict(),
            "nodes": {v: self.node_models[v].to_dict() for v in self.dag.nodes},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "FittedNetwork":
        dag = Dag.from_dict(data["dag"])
        models = {}
        for v, spec in data["nodes"].items():
            models[v] = LinearGaussianNode(
                node=v,
                parents=tuple(spec["parents"]),
                intercept=float(spec["intercept"]),
                coefficients=tuple(float(c) for c in spec["coefficients"]),
                residual_variance=float(spec["residual_variance"]),
            )
        return cls(dag, models, int(data.get("sample_size", 0)))


def fit_node(child: str, parents: Sequence[str], frame: pd.DataFrame) -> LinearGaussianNode:
    """Least-squares fit of one node on its parents (ML residual variance)."""
    parents = tuple(parents)
    result = ols(frame[child].to_numpy(), frame.loc[:, list(parents)].to_numpy(), node=child)
    model = LinearGaussianNode(
        node=child,
        parents=parents,
        intercept=float(result.coefficients[0]),
        coefficients=tuple(float(c) for c in result.coefficients[1:]),
        residual_variance=max(result.ml_variance, 0.0),
        summary=RegressionSummary.from_ols(result),
    )
    if is_zero_variance(model.residual_variance, float(np.var(frame[child].to_numpy()))):
        logger.warning("Node '%s' is fitted exactly (zero residual variance)", child)
        model = LinearGaussianNode(
            child, parents, model.intercept, model.coefficients, 0.0, model.summary
        )
    return model


def fit_network(dag: Dag, data: pd.DataFrame) -> FittedNetwork:
    """
    Fit every node of ``dag`` by least squares on its parents.

    Args:
        dag: Structure; node labels must be columns of ``data``
        data: Complete frame, one column per node

    Raises:
        ValidationError: If data is incomplete or lacks a node column
        FitError: If a parent design matrix is rank deficient
    """
    frame = as_complete_frame(data)
    missing = [v for v in dag.nodes if v not in frame.columns]
    if missing:
        raise ValidationError(f"data lacks columns for nodes {missing}")
    models = {v: fit_node(v, dag.parents(v), frame) for v in dag.nodes}
    return FittedNetwork(dag, models, len(frame))


def log_likelihood(net: FittedNetwork, data: pd.DataFrame) -> float:
    """
    Log of the factorized density ``prod_v g(x_v | x_pa(v))`` summed over rows.

    Raises:
        NumericalError: If any residual variance is zero
    """
    frame = as_complete_frame(data)
    total = 0.0
    for v in net.nodes:
        model = net[v]
        if model.residual_variance <= 0:
            raise NumericalError(f"Zero residual variance at node '{v}': log-likelihood is unbounded")
        mean = model.predict(frame.loc[:, list(model.parents)].to_numpy())
        r = frame[v].to_numpy() - mean
        s2 = model.residual_variance
        total += float(-0.5 * np.sum(LOG_2PI + math.log(s2) + r * r / s2))
    return total


# ----------------------------------------------------------------------
# BIC
# ----------------------------------------------------------------------


class LocalScorer:
    """
    Cached Gaussian BIC local scores over one complete dataset.

    Residual sums of squares come from the centered cross-product matrix,
    so each local score is one small linear solve. The score of a node with
    parent set P is ``-n/2 (log(2 pi rss/n) + 1) - (|P| + 2)/2 log n``.
    """

    def __init__(self, data: pd.DataFrame) -> None:
        frame = as_complete_frame(data)
        self.labels: Tuple[str, ...] = tuple(str(c) for c in frame.columns)
        self._index = {v: i for i, v in enumerate(self.labels)}
        values = frame.to_numpy()
        self.n = values.shape[0]
        centered = values - values.mean(axis=0)
        self._gram = centered.T @ centered
        self._log_n = math.log(self.n) if self.n > 0 else 0.0
        self._cache: Dict[Tuple[str, frozenset], float] = {}

    def rss(self, child: str, parents: Sequence[str]) -> float:
        c = self._index[child]
        if not parents:
            return float(self._gram[c, c])
        idx = [self._index[p] for p in parents]
        block = self._gram[np.ix_(idx, idx)]
        cross = self._gram[idx, c]
        scale = np.sqrt(np.diag(block))
        if np.any(scale == 0) or self.n <= len(idx) + 1:
            raise FitError(f"Rank-deficient parent design for node '{child}'", node=child)
        normalized = block / np.outer(scale, scale)
        if np.linalg.cond(normalized) > 1e12:
            raise FitError(f"Rank-deficient parent design for node '{child}'", node=child)
        beta = np.linalg.solve(block, cross)
        return float(self._gram[c, c] - cross @ beta)

    def local_score(self, child: str, parents: Sequence[str]) -> float:
        """
        BIC contribution of ``child`` given ``parents``.

        Raises:
            FitError: Rank-deficient parents
            NumericalError: Zero residual variance
        """
        key = (child, frozenset(parents))
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        rss = self.rss(child, sorted(parents, key=self._index.__getitem__))
        variance = rss / self.n
        c = self._index[child]
        if is_zero_variance(variance, float(self._gram[c, c]) / self.n):
            raise NumericalError(f"Zero residual variance at node '{child}'")
        loglik = -0.5 * self.n * (LOG_2PI + math.log(variance) + 1.0)
        score = loglik - 0.5 * (len(parents) + 2) * self._log_n
        self._cache[key] = score
        return score

    def score(self, dag: Dag) -> float:
        return sum(self.local_score(v, dag.parents(v)) for v in dag.nodes)


def local_bic(child: str, parents: Sequence[str], data: pd.DataFrame) -> float:
    """BIC contribution of one node (see ``LocalScorer.local_score``)."""
    return LocalScorer(data).local_score(child, parents)


def bic_score(dag: Dag, data: pd.DataFrame) -> float:
    """
    Gaussian BIC: ML log-likelihood minus ``k/2 log n`` with
    ``k = sum_v (|pa(v)| + 2)``. Higher is better; decomposes over nodes.
    """
    frame = as_complete_frame(data)
    return LocalScorer(frame.loc[:, list(dag.nodes)]).score(dag)


# ----------------------------------------------------------------------
# Joint distribution and conditioning
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JointGaussian:
    """Multivariate normal over ``variables`` (in that order)."""

    variables: Tuple[str, ...]
    mean: np.ndarray
    covariance: np.ndarray
    _index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        d = len(self.variables)
        if self.mean.shape != (d,) or self.covariance.shape != (d, d):
            raise ValidationError("Joint Gaussian dimensions do not match its variables")
        scale = max(1.0, float(np.max(np.abs(self.covariance)))) if d else 1.0
        if not np.allclose(self.covariance, self.covariance.T, rtol=0.0, atol=1e-9 * scale):
            raise ValidationError("Joint Gaussian covariance must be symmetric")
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.variables)})

    def index(self, variable: str) -> int:
        return self._index[variable]

    def indexes(self, variables: Sequence[str]) -> List[int]:
        return [self._index[v] for v in variables]

    def logpdf(self, rows: np.ndarray) -> np.ndarray:
        """Log density of each row (columns in ``variables`` order)."""
        return stats.multivariate_normal(self.mean, self.covariance).logpdf(rows)


def joint_distribution(net: FittedNetwork) -> JointGaussian:
    """
    Closed-form joint of a linear-Gaussian network.

    Nodes are visited in topological order; each node's mean and its
    covariances with already visited nodes follow from its linear recursion.
    """
    order = net.dag.topological_order()
    pos = {v: i for i, v in enumerate(order)}
    d = len(order)
    mean = np.zeros(d)
    cov = np.zeros((d, d))
    for i, v in enumerate(order):
        model = net[v]
        pa = [pos[p] for p in model.parents]
        beta = np.asarray(model.coefficients, dtype=float)
        mean[i] = model.intercept + (beta @ mean[pa] if pa else 0.0)
        if pa:
            cross = beta @ cov[pa, :i]
            cov[i, :i] = cross
            cov[:i, i] = cross
            cov[i, i] = beta @ cov[np.ix_(pa, pa)] @ beta + model.residual_variance
        else:
            cov[i, i] = model.residual_variance

    # Reorder from topological to node order.
    perm = [pos[v] for v in net.nodes]
    cov = cov[np.ix_(perm, perm)]
    return JointGaussian(tuple(net.nodes), mean[perm], (cov + cov.T) / 2.0)


def conditional_mean(
    joint: JointGaussian, evidence: Mapping[str, float], targets: Sequence[str]
) -> np.ndarray:
    """
    ``E[targets | evidence]`` under ``joint``.

    A singular evidence block falls back to the pseudo-inverse (with a
    warning) when the evidence lies in its range; otherwise the
    conditioning is undefined and NumericalError is raised.
    """
    t_idx = joint.indexes(targets)
    if not evidence:
        return joint.mean[t_idx].copy()
    names = list(evidence)
    e_idx = joint.indexes(names)
    values = np.array([float(evidence[v]) for v in names])
    delta = values - joint.mean[e_idx]
    s_ee = joint.covariance[np.ix_(e_idx, e_idx)]
    s_te = joint.covariance[np.ix_(t_idx, e_idx)]

    eigvals = np.linalg.eigvalsh(s_ee)
    top = float(eigvals.max()) if eigvals.size else 0.0
    if top > 0 and float(eigvals.min()) > SINGULAR_TOLERANCE * top:
        weights = np.linalg.solve(s_ee, delta)
    else:
        pinv = np.linalg.pinv(s_ee, rcond=SINGULAR_TOLERANCE, hermitian=True)
        weights = pinv @ delta
        residual = delta - s_ee @ weights
        scale = max(1.0, float(np.linalg.norm(delta)))
        if float(np.linalg.norm(residual)) > 1e-6 * scale:
            raise NumericalError(
                f"Evidence on {names} is inconsistent with a singular covariance block"
            )
        logger.warning("Singular evidence covariance on %s; using pseudo-inverse", names)
    return joint.mean[t_idx] + s_te @ weights


def predict_expectation(
    net: FittedNetwork,
    evidence: Mapping[str, float],
    target: str,
    joint: Optional[JointGaussian] = None,
) -> float:
    """
    Conditional expectation of ``target`` given a partial assignment.

    Args:
        net: Fitted network
        evidence: Observed values keyed by node label
        target: Node to predict (must not be in ``evidence``)
        joint: Precomputed ``joint_distribution(net)`` to reuse

    Raises:
        ValidationError: Unknown variables or target among the evidence
        NumericalError: Singular, inconsistent evidence block
    """
    if target not in net.dag:
        raise ValidationError(f"Unknown target '{target}'")
    if target in evidence:
        raise ValidationError(f"Target '{target}' is part of the evidence")
    unknown = [v for v in evidence if v not in net.dag]
    if unknown:
        raise ValidationError(f"Unknown evidence variables {unknown}")
    joint = joint or joint_distribution(net)
    return float(conditional_mean(joint, evidence, [target])[0])
