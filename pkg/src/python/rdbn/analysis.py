"""
rdbn Analysis

Reads the fitted consensus network: the strongest investment edge into
the outcome, the investment path to it, the chained regression table and
the per-country contribution and efficiency indexes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from rdbn.bootstrap import EdgeStrengthTable
from rdbn.config import OUTCOME, YEARS, year_label
from rdbn.dag import Dag, node_display_label
from rdbn.data_pipeline import MergedDataset
from rdbn.exceptions import ValidationError
from rdbn.network import (
    FittedNetwork,
    RegressionSummary,
    as_complete_frame,
    conditional_mean,
    joint_distribution,
    ols,
)

logger = logging.getLogger(__name__)

RECOMPUTE_TOLERANCE = 1e-12

_YEAR_OF_LABEL = {year_label(y): y for y in YEARS}


# ----------------------------------------------------------------------
# Edges and paths
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class StrongestEdge:
    parent: str
    strength: float

    @property
    def year(self) -> Optional[int]:
        return _YEAR_OF_LABEL.get(self.parent)


def strongest_edge_to_outcome(
    strengths: EdgeStrengthTable, outcome: str = OUTCOME
) -> Optional[StrongestEdge]:
    """Strongest bootstrap edge into ``outcome``; ties go to the earliest node. None if no edge."""
    into = strengths.edges_into(outcome)
    if not into:
        return None
    parent, strength = into[0]
    return StrongestEdge(parent, strength)


def extract_path(dag: Dag, source: str, target: str) -> Optional[List[str]]:
    """
    Directed path from ``source`` to ``target``, or None.

    From each node the walk steps straight to ``target`` when it is a
    child, otherwise to the earliest child (in node order) that still
    reaches ``target``.
    """
    for v in (source, target):
        if v not in dag:
            raise ValidationError(f"Unknown node '{v}'")
    if source == target:
        return [source]
    if not dag.has_path(source, target):
        return None
    path = [source]
    node = source
    while node != target:
        children = dag.children(node)
        if target in children:
            node = target
        else:
            node = next(c for c in children if dag.has_path(c, target))
        path.append(node)
    return path


# ----------------------------------------------------------------------
# Regression table
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class RegressionTerm:
    name: str
    coefficient: float
    standard_error: float
    p_value: float


@dataclass(frozen=True)
class RegressionColumn:
    """OLS summary of one dependent node on its parents."""

    dependent: str
    terms: Tuple[RegressionTerm, ...]
    intercept: RegressionTerm
    n: int
    df_resid: int
    r_squared: float
    adj_r_squared: float
    residual_std_error: float
    f_statistic: float
    f_p_value: float

    @property
    def f_df(self) -> Tuple[int, int]:
        return (len(self.terms), self.df_resid)

    def term(self, name: str) -> Optional[RegressionTerm]:
        return next((t for t in self.terms if t.name == name), None)


@dataclass(frozen=True)
class RegressionTable:
    """One column per dependent node along a path."""

    columns: Tuple[RegressionColumn, ...]

    @property
    def regressors(self) -> List[str]:
        seen: List[str] = []
        for col in self.columns:
            for t in col.terms:
                if t.name not in seen:
                    seen.append(t.name)
        return seen

    def column(self, dependent: str) -> RegressionColumn:
        for col in self.columns:
            if col.dependent == dependent:
                return col
        raise KeyError(dependent)

    def to_frame(self) -> pd.DataFrame:
        """Long form: one row per (dependent, term) including the intercept."""
        rows = []
        for col in self.columns:
            for t in col.terms + (col.intercept,):
                rows.append(
                    {
                        "dependent": col.dependent,
                        "term": t.name,
                        "coefficient": t.coefficient,
                        "standard_error": t.standard_error,
                        "p_value": t.p_value,
                        "n": col.n,
                        "r_squared": col.r_squared,
                        "adj_r_squared": col.adj_r_squared,
                        "residual_std_error": col.residual_std_error,
                        "f_statistic": col.f_statistic,
                    }
                )
        return pd.DataFrame(rows)


def _column_from_summary(node: str, parents: Sequence[str], intercept: float,
                         coefficients: Sequence[float], summary: RegressionSummary) -> RegressionColumn:
    terms = tuple(
        RegressionTerm(p, float(b), se, pv)
        for p, b, se, pv in zip(parents, coefficients, summary.coefficient_se, summary.coefficient_p)
    )
    return RegressionColumn(
        dependent=node,
        terms=terms,
        intercept=RegressionTerm("Constant", intercept, summary.intercept_se, summary.intercept_p),
        n=summary.n,
        df_resid=summary.df_resid,
        r_squared=summary.r_squared,
        adj_r_squared=summary.adj_r_squared,
        residual_std_error=summary.residual_std_error,
        f_statistic=summary.f_statistic,
        f_p_value=summary.f_p_value,
    )


def regression_table(
    net: FittedNetwork, path: Sequence[str], data: Optional[pd.DataFrame] = None
) -> RegressionTable:
    """
    Regression summaries of every path node after the first.

    Coefficients come from the fitted node models. A network loaded from
    JSON has no stored summaries; ``data`` is then used to recompute them.

    Raises:
        ValidationError: Unknown path node, or no summary and no data
    """
    columns = []
    for v in list(path)[1:]:
        if v not in net.dag:
            raise ValidationError(f"Path node '{v}' is not in the network")
        model = net[v]
        summary = model.summary
        if summary is None:
            if data is None:
                raise ValidationError(f"Node '{v}' has no regression summary; pass the data")
            frame = as_complete_frame(data)
            summary = RegressionSummary.from_ols(
                ols(frame[v].to_numpy(), frame.loc[:, list(model.parents)].to_numpy(), node=v)
            )
        columns.append(
            _column_from_summary(v, model.parents, model.intercept, model.coefficients, summary)
        )
    return RegressionTable(tuple(columns))


def significance_stars(p_value: float) -> str:
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.1:
        return "*"
    return ""


def render_regression_table(table: RegressionTable, labels: Optional[Dict[str, str]] = None) -> str:
    """Aligned plain-text table: coefficients with stars over standard errors in parentheses."""
    labels = labels or {}

    def name(v: str) -> str:
        return labels.get(v, node_display_label(v))

    header = [""] + [f"{name(c.dependent)}" for c in table.columns]
    numbers = [""] + [f"({i})" for i in range(1, len(table.columns) + 1)]
    body: List[List[str]] = []
    for reg in table.regressors + ["Constant"]:
        coef_row, se_row = [name(reg) if reg != "Constant" else reg], [""]
        for col in table.columns:
            t = col.intercept if reg == "Constant" else col.term(reg)
            if t is None:
                coef_row.append("")
                se_row.append("")
            else:
                coef_row.append(f"{t.coefficient:.3f}{significance_stars(t.p_value)}")
                se_row.append(f"({t.standard_error:.3f})")
        body.extend([coef_row, se_row])
    stats_rows = [
        ["Observations"] + [str(c.n) for c in table.columns],
        ["R2"] + [f"{c.r_squared:.3f}" for c in table.columns],
        ["Adjusted R2"] + [f"{c.adj_r_squared:.3f}" for c in table.columns],
        ["Residual Std. Error"] + [f"{c.residual_std_error:.3f} (df = {c.df_resid})" for c in table.columns],
        ["F Statistic"] + [
            f"{c.f_statistic:.3f}{significance_stars(c.f_p_value)} (df = {c.f_df[0]}; {c.f_df[1]})"
            for c in table.columns
        ],
    ]
    rows = [header, numbers] + body + stats_rows
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    rule = "-" * (sum(widths) + 2 * (len(widths) - 1))

    def fmt(r: List[str]) -> str:
        return "  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(r, widths))).rstrip()

    lines = ["Dependent variable:", rule, fmt(header), fmt(numbers), rule]
    lines += [fmt(r) for r in body]
    lines.append(rule)
    lines += [fmt(r) for r in stats_rows]
    lines.append(rule)
    lines.append("Note: *p<0.1; **p<0.05; ***p<0.01")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# Indexes
# ----------------------------------------------------------------------


def contribution_index(y: float, alpha: float) -> float:
    """Share of the score not explained by the intercept: ``(y - alpha) / y``."""
    if not y > 0:
        raise ValidationError(f"Score must be positive, got {y}")
    return (y - alpha) / y


def efficiency_index(y: float, y_hat: float) -> float:
    """Relative distance of the score to its prediction: ``(y - y_hat) / y``."""
    if not y > 0:
        raise ValidationError(f"Score must be positive, got {y}")
    return (y - y_hat) / y


@dataclass(frozen=True)
class CountryIndexes:
    country: str
    y: float
    y_hat: float
    contribution: float
    efficiency: float


@dataclass
class AnalysisReport:
    """Per-country indexes together with the network facts they came from."""

    rows: List[CountryIndexes]
    alpha: float
    beta: Optional[float]
    strongest: Optional[StrongestEdge]
    path: Optional[List[str]]
    outcome: str = OUTCOME
    notes: List[str] = field(default_factory=list)

    def ranked_by_contribution(self) -> List[str]:
        return [r.country for r in sorted(self.rows, key=lambda r: (r.contribution, r.country))]

    def ranked_by_efficiency(self) -> List[str]:
        return [r.country for r in sorted(self.rows, key=lambda r: (r.efficiency, r.country))]

    @property
    def negative_efficiency_count(self) -> int:
        return sum(1 for r in self.rows if r.efficiency < 0)

    @property
    def contribution_range(self) -> Tuple[float, float]:
        values = [r.contribution for r in self.rows]
        return (min(values), max(values)) if values else (math.nan, math.nan)

    def verify(self) -> None:
        """Recompute both indexes from the stored Y, Y_hat and alpha."""
        for r in self.rows:
            if abs(contribution_index(r.y, self.alpha) - r.contribution) > RECOMPUTE_TOLERANCE:
                raise ValidationError(f"Contribution of '{r.country}' does not match its inputs")
            if abs(efficiency_index(r.y, r.y_hat) - r.efficiency) > RECOMPUTE_TOLERANCE:
                raise ValidationError(f"Efficiency of '{r.country}' does not match its inputs")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "country": [r.country for r in self.rows],
                "Y": [r.y for r in self.rows],
                "Y_hat": [r.y_hat for r in self.rows],
                "contribution": [r.contribution for r in self.rows],
                "efficiency": [r.efficiency for r in self.rows],
            }
        )

    def to_dict(self) -> dict:
        low, high = self.contribution_range
        return {
            "outcome": self.outcome,
            "alpha": self.alpha,
            "beta": self.beta,
            "strongest_edge": (
                {"parent": self.strongest.parent, "strength": self.strongest.strength}
                if self.strongest else None
            ),
            "path": self.path,
            "negative_efficiency_count": self.negative_efficiency_count,
            "contribution_range": [low, high],
            "ranked_by_contribution": self.ranked_by_contribution(),
            "ranked_by_efficiency": self.ranked_by_efficiency(),
            "notes": list(self.notes),
            "countries": self.to_frame().to_dict(orient="records"),
        }


def build_report(
    net: FittedNetwork,
    strengths: EdgeStrengthTable,
    data: MergedDataset,
    source: Optional[str] = None,
) -> AnalysisReport:
    """
    Contribution and efficiency per country.

    ``Y_hat`` is the outcome's conditional mean given the country's
    available predictor cells. ``alpha`` is the outcome node's intercept
    and ``beta`` its coefficient on the strongest bootstrap parent when
    that edge is in the network.

    Args:
        net: Fitted consensus network
        strengths: Bootstrap table the network was averaged from
        data: Dataset holding Y and the predictors
        source: First node of the investment path (default: first predictor)
    """
    outcome = data.columns[0]
    missing = [c for c in data.columns if c not in net.dag]
    if missing:
        raise ValidationError(f"Network lacks the dataset columns {missing}")
    notes: List[str] = []
    model = net[outcome]
    if not model.parents:
        notes.append(f"no outcome parent: '{outcome}' has no parent in the network")
        logger.warning("Outcome '%s' has no parent; indexes use its marginal mean", outcome)

    strongest = strongest_edge_to_outcome(strengths, outcome)
    if strongest is None:
        notes.append(f"no bootstrap edge into '{outcome}'")
    beta = None
    if strongest is not None and strongest.parent in model.parents:
        beta = model.coefficient(strongest.parent)

    source = source or data.predictor_columns[0]
    path = extract_path(net.dag, source, outcome)
    if path is None:
        notes.append(f"no directed path from '{source}' to '{outcome}'")

    joint = joint_distribution(net)
    rows = []
    for r, country in enumerate(data.countries):
        y = float(data.values[r, 0])
        evidence = {
            c: float(data.values[r, j + 1])
            for j, c in enumerate(data.predictor_columns)
            if not data.mask[r, j + 1]
        }
        y_hat = float(conditional_mean(joint, evidence, [outcome])[0])
        rows.append(
            CountryIndexes(
                country, y, y_hat, contribution_index(y, model.intercept), efficiency_index(y, y_hat)
            )
        )
    report = AnalysisReport(rows, model.intercept, beta, strongest, path, outcome, notes)
    logger.info(
        "Report: %d countries, %d negative efficiencies", len(rows), report.negative_efficiency_count
    )
    return report


# ----------------------------------------------------------------------
# Correlations
# ----------------------------------------------------------------------


def correlations(data: MergedDataset, level: float = 0.95) -> pd.DataFrame:
    """
    Pearson r between the outcome and each predictor column with a
    Fisher-z confidence interval, over the rows observed in that column.
    """
    z_crit = float(stats.norm.ppf(0.5 + level / 2.0))
    y = data.values[:, 0]
    rows = []
    for j, column in enumerate(data.predictor_columns):
        observed = ~data.mask[:, j + 1]
        n = int(observed.sum())
        r = p = low = high = math.nan
        if n >= 3:
            x = data.values[observed, j + 1]
            if np.ptp(x) > 0 and np.ptp(y[observed]) > 0:
                r, p = (float(v) for v in stats.pearsonr(x, y[observed]))
        if n >= 4 and not math.isnan(r):
            if abs(r) >= 1.0:
                low = high = r
            else:
                z = math.atanh(r)
                half = z_crit / math.sqrt(n - 3)
                low, high = math.tanh(z - half), math.tanh(z + half)
        rows.append({"column": column, "n": n, "r": r, "ci_low": low, "ci_high": high, "p_value": p})
    return pd.DataFrame(rows)
