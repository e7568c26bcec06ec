"""
Unit tests for path extraction, the regression table, the country
indexes and the correlation report.
"""

import numpy as np
import pandas as pd
import pytest
import statsmodels.api as sm

from rdbn.analysis import (
    AnalysisReport,
    CountryIndexes,
    build_report,
    contribution_index,
    correlations,
    efficiency_index,
    extract_path,
    regression_table,
    render_regression_table,
    significance_stars,
    strongest_edge_to_outcome,
)
from rdbn.bootstrap import EdgeStrengthTable
from rdbn.dag import Dag
from rdbn.data_pipeline import MergedDataset
from rdbn.exceptions import ValidationError
from rdbn.network import FittedNetwork, fit_network

NODES = ("Y", "X1997", "X1998")
CONSENSUS = Dag(NODES, [("X1997", "X1998"), ("X1998", "Y")])


@pytest.fixture
def study_frame():
    """Forty countries where X1998 follows X1997 and drives Y."""
    rng = np.random.default_rng(21)
    x1 = rng.normal(11.0, 1.0, 40)
    x2 = 0.5 + 0.95 * x1 + rng.normal(0.0, 0.15, 40)
    y = 190.0 + 25.0 * x2 + rng.normal(0.0, 15.0, 40)
    frame = pd.DataFrame(
        {"Y": y, "X1997": x1, "X1998": x2}, index=[f"C{i:02d}" for i in range(40)]
    )
    frame.index.name = "country"
    return frame


@pytest.fixture
def strengths():
    return EdgeStrengthTable(NODES, {("X1997", "X1998"): 10, ("X1998", "Y"): 7, ("X1997", "Y"): 2}, 10)


class TestStrongestEdge:
    """Tests for the strongest edge into the outcome."""

    def test_strongest(self, strengths):
        """Test the highest strength wins and its year is parsed."""
        edge = strongest_edge_to_outcome(strengths)
        assert edge.parent == "X1998"
        assert edge.strength == pytest.approx(0.7)
        assert edge.year == 1998

    def test_tie_goes_to_earliest(self):
        """Test equal strengths resolve to the earlier node."""
        table = EdgeStrengthTable(("Y", "X1", "X2"), {("X2", "Y"): 3, ("X1", "Y"): 3}, 10)
        edge = strongest_edge_to_outcome(table)
        assert edge.parent == "X1"
        assert edge.year is None

    def test_year_only_for_study_years(self):
        """Test numbered labels outside the study years carry no year."""
        table = EdgeStrengthTable(("Y", "X1", "X2014"), {("X1", "Y"): 4, ("X2014", "Y"): 2}, 10)
        assert strongest_edge_to_outcome(table).year is None
        table = EdgeStrengthTable(("Y", "X1", "X2014"), {("X1", "Y"): 2, ("X2014", "Y"): 4}, 10)
        assert strongest_edge_to_outcome(table).year == 2014

    def test_scale_invariant(self):
        """Test the choice does not depend on the replicate count."""
        small = EdgeStrengthTable(("Y", "a", "b"), {("a", "Y"): 2, ("b", "Y"): 3}, 5)
        large = EdgeStrengthTable(("Y", "a", "b"), {("a", "Y"): 4, ("b", "Y"): 6}, 10)
        assert strongest_edge_to_outcome(small).parent == strongest_edge_to_outcome(large).parent

    def test_no_edge(self):
        """Test an outcome without incoming edges gives None."""
        table = EdgeStrengthTable(("Y", "a"), {}, 4)
        assert strongest_edge_to_outcome(table) is None


class TestExtractPath:
    """Tests for path extraction."""

    def test_chain(self):
        """Test the path along a chain."""
        dag = Dag(["a", "b", "c"], [("a", "b"), ("b", "c")])
        assert extract_path(dag, "a", "c") == ["a", "b", "c"]

    def test_same_node(self):
        """Test a path from a node to itself."""
        assert extract_path(CONSENSUS, "X1997", "X1997") == ["X1997"]

    def test_no_path(self):
        """Test unreachable targets give None."""
        assert extract_path(CONSENSUS, "Y", "X1997") is None

    def test_earliest_intermediates(self):
        """Test the chronologically smallest route is chosen."""
        dag = Dag(
            ["Y", "X1997", "X1998", "X1999", "X2000"],
            [("X1997", "X1999"), ("X1997", "X1998"), ("X1998", "X2000"), ("X1999", "X2000"), ("X2000", "Y")],
        )
        assert extract_path(dag, "X1997", "Y") == ["X1997", "X1998", "X2000", "Y"]

    def test_unknown_node(self):
        """Test that path ends must exist."""
        with pytest.raises(ValidationError):
            extract_path(CONSENSUS, "X1997", "Z")


class TestRegressionTable:
    """Tests for the chained regression table."""

    def test_coefficients_match_network(self, study_frame):
        """Test the table reuses the fitted coefficients."""
        net = fit_network(CONSENSUS, study_frame)
        table = regression_table(net, ["X1997", "X1998", "Y"])
        assert [c.dependent for c in table.columns] == ["X1998", "Y"]
        assert table.column("Y").term("X1998").coefficient == net["Y"].coefficient("X1998")
        assert table.column("Y").intercept.coefficient == net["Y"].intercept
        assert table.column("Y").n == 40
        assert table.column("Y").f_df == (1, 38)
        assert table.regressors == ["X1997", "X1998"]

    def test_matches_statsmodels(self, study_frame):
        """Test standard errors and fit statistics against statsmodels."""
        net = fit_network(CONSENSUS, study_frame)
        col = regression_table(net, ["X1998", "Y"]).column("Y")
        ref = sm.OLS(study_frame["Y"], sm.add_constant(study_frame[["X1998"]])).fit()
        assert col.term("X1998").standard_error == pytest.approx(ref.bse["X1998"], rel=1e-8)
        assert col.intercept.standard_error == pytest.approx(ref.bse["const"], rel=1e-8)
        assert col.r_squared == pytest.approx(ref.rsquared, rel=1e-10)
        assert col.residual_std_error == pytest.approx(np.sqrt(ref.scale), rel=1e-10)

    def test_loaded_network_needs_data(self, study_frame):
        """Test that a network without summaries uses the data."""
        net = FittedNetwork.from_dict(fit_network(CONSENSUS, study_frame).to_dict())
        with pytest.raises(ValidationError):
            regression_table(net, ["X1998", "Y"])
        table = regression_table(net, ["X1998", "Y"], data=study_frame)
        assert table.column("Y").term("X1998").standard_error > 0

    def test_render(self, study_frame):
        """Test the plain-text layout."""
        net = fit_network(CONSENSUS, study_frame)
        text = render_regression_table(regression_table(net, ["X1997", "X1998", "Y"]), {"Y": "Read"})
        lines = text.splitlines()
        assert lines[0] == "Dependent variable:"
        assert "1998" in lines[2] and "Read" in lines[2]
        assert "(1)" in lines[3] and "(2)" in lines[3]
        for label in ("Constant", "Observations", "R2", "Adjusted R2", "Residual Std. Error", "F Statistic"):
            assert any(line.startswith(label) for line in lines)
        assert "(df = 38)" in text
        assert lines[-1].startswith("Note:")

    def test_stars(self):
        """Test the significance markers."""
        assert significance_stars(0.001) == "***"
        assert significance_stars(0.03) == "**"
        assert significance_stars(0.07) == "*"
        assert significance_stars(0.5) == ""


class TestIndexes:
    """Tests for the contribution and efficiency indexes."""

    def test_contribution(self):
        """Test the intercept share examples."""
        assert contribution_index(192.574, 192.574) == 0.0
        assert contribution_index(403.0, 192.574) == pytest.approx(0.5222, abs=1e-4)

    def test_contribution_increasing(self):
        """Test the index grows with the score."""
        values = [contribution_index(y, 192.574) for y in (300.0, 400.0, 500.0, 600.0)]
        assert values == sorted(values)

    def test_efficiency(self):
        """Test the relative distance and its sign."""
        assert efficiency_index(450.0, 450.0) == 0.0
        assert efficiency_index(400.0, 440.0) == pytest.approx(-0.1)
        assert efficiency_index(500.0, 440.0) > 0

    def test_identities_on_random_triples(self):
        """Test both formulas on random (Y, alpha, Y_hat) triples."""
        rng = np.random.default_rng(0)
        y = rng.uniform(250.0, 650.0, 1000)
        alpha = rng.uniform(-100.0, 400.0, 1000)
        y_hat = rng.uniform(250.0, 650.0, 1000)
        for yi, ai, hi in zip(y, alpha, y_hat):
            assert abs(contribution_index(yi, ai) - (yi - ai) / yi) <= 1e-12
            assert abs(efficiency_index(yi, hi) - (yi - hi) / yi) <= 1e-12
            assert efficiency_index(yi, yi) == 0.0

    def test_domain(self):
        """Test that non-positive scores are rejected."""
        with pytest.raises(ValidationError):
            contribution_index(0.0, 1.0)
        with pytest.raises(ValidationError):
            efficiency_index(-5.0, 1.0)

    def test_verify_detects_tampering(self):
        """Test that a row inconsistent with its inputs is caught."""
        row = CountryIndexes("A", 400.0, 420.0, 0.5, efficiency_index(400.0, 420.0))
        report = AnalysisReport([row], alpha=192.574, beta=None, strongest=None, path=None)
        with pytest.raises(ValidationError):
            report.verify()


class TestBuildReport:
    """Tests for the per-country report."""

    def test_report(self, study_frame, strengths):
        """Test report contents on the consensus network."""
        net = fit_network(CONSENSUS, study_frame)
        data = MergedDataset.from_frame(study_frame)
        report = build_report(net, strengths, data)
        report.verify()
        assert report.alpha == net["Y"].intercept
        assert report.beta == net["Y"].coefficient("X1998")
        assert report.path == ["X1997", "X1998", "Y"]
        assert report.strongest.parent == "X1998"
        assert sorted(report.ranked_by_contribution()) == sorted(data.countries)
        assert sorted(report.ranked_by_efficiency()) == sorted(data.countries)
        assert list(report.to_frame().columns) == ["country", "Y", "Y_hat", "contribution", "efficiency"]
        assert report.notes == []

    def test_y_hat_is_linear_predictor(self, study_frame, strengths):
        """Test that with X1998 observed the prediction is the outcome regression."""
        net = fit_network(CONSENSUS, study_frame)
        report = build_report(net, strengths, MergedDataset.from_frame(study_frame))
        model = net["Y"]
        expected = model.intercept + model.coefficient("X1998") * study_frame["X1998"].to_numpy()
        np.testing.assert_allclose([r.y_hat for r in report.rows], expected, rtol=1e-9)

    def test_perfect_prediction(self, study_frame, strengths):
        """Test that an exact outcome model gives zero efficiency everywhere."""
        frame = study_frame.copy()
        frame["Y"] = 100.0 + 5.0 * frame["X1998"]
        net = fit_network(CONSENSUS, frame)
        report = build_report(net, strengths, MergedDataset.from_frame(frame))
        np.testing.assert_allclose([r.efficiency for r in report.rows], 0.0, atol=1e-9)

    def test_missing_cells_condition_on_rest(self, study_frame, strengths):
        """Test that a missing parent is integrated out through its ancestors."""
        net = fit_network(CONSENSUS, study_frame)
        frame = study_frame.copy()
        frame.iloc[0, 2] = np.nan
        report = build_report(net, strengths, MergedDataset.from_frame(frame))
        b, y = net["X1998"], net["Y"]
        x1 = frame.iloc[0, 1]
        expected = y.intercept + y.coefficients[0] * (b.intercept + b.coefficients[0] * x1)
        assert report.rows[0].y_hat == pytest.approx(expected, rel=1e-9)

    def test_no_outcome_parent(self, study_frame, strengths):
        """Test the report notes an outcome without parents."""
        net = fit_network(Dag(NODES, [("X1997", "X1998")]), study_frame)
        report = build_report(net, strengths, MergedDataset.from_frame(study_frame))
        assert report.path is None
        assert report.beta is None
        assert any(n.startswith("no outcome parent") for n in report.notes)
        assert all(r.y_hat == pytest.approx(study_frame["Y"].mean()) for r in report.rows)

    def test_dict_form(self, study_frame, strengths):
        """Test the JSON-ready summary."""
        net = fit_network(CONSENSUS, study_frame)
        data = build_report(net, strengths, MergedDataset.from_frame(study_frame)).to_dict()
        assert data["strongest_edge"] == {"parent": "X1998", "strength": 0.7}
        assert len(data["countries"]) == 40
        low, high = data["contribution_range"]
        assert low <= high


class TestCorrelations:
    """Tests for the outcome-predictor correlation report."""

    def test_columns_and_interval(self, small_dataset):
        """Test counts per column and that each interval brackets r."""
        frame = correlations(small_dataset)
        assert list(frame.columns) == ["column", "n", "r", "ci_low", "ci_high", "p_value"]
        assert frame["n"].tolist() == [5, 6, 5]
        for _, row in frame.iterrows():
            assert row["ci_low"] <= row["r"] <= row["ci_high"]
            assert -1.0 <= row["r"] <= 1.0

    def test_matches_scipy(self, study_frame):
        """Test r and p against a direct pearsonr call."""
        from scipy import stats

        frame = correlations(MergedDataset.from_frame(study_frame))
        r, p = stats.pearsonr(study_frame["X1998"], study_frame["Y"])
        row = frame.set_index("column").loc["X1998"]
        assert row["r"] == pytest.approx(r, rel=1e-12)
        assert row["p_value"] == pytest.approx(p, rel=1e-9)
