"""
Unit tests for bootstrap edge strengths and the averaged network.
"""

import numpy as np
import pandas as pd
import pytest

from rdbn.bootstrap import (
    EdgeStrengthTable,
    average_network,
    bootstrap_strength,
    resolve_threshold,
)
from rdbn.config import BootstrapConfig, SearchConfig
from rdbn.exceptions import DeserializationError, NumericalError, ValidationError


@pytest.fixture
def table():
    """Strengths over Y, a, b with an antiparallel pair."""
    return EdgeStrengthTable(
        nodes=("Y", "a", "b"),
        counts={("a", "b"): 8, ("b", "a"): 7, ("b", "Y"): 9, ("a", "Y"): 3},
        replicates=10,
    )


class TestEdgeStrengthTable:
    """Tests for strength bookkeeping."""

    def test_strength_and_direction(self, table):
        """Test fractions and direction shares."""
        assert table.strength("a", "b") == pytest.approx(0.8)
        assert table.strength("Y", "a") == 0.0
        assert table.direction("a", "b") == pytest.approx(8 / 15)
        assert table.direction("Y", "a") == 0.0

    def test_edges_into(self, table):
        """Test incoming edges are ranked strongest first."""
        assert table.edges_into("Y") == [("b", 0.9), ("a", 0.3)]
        assert table.edges_into("a") == [("b", 0.7)]

    def test_frame(self, table):
        """Test the tabular form lists nonzero edges."""
        frame = table.to_frame()
        assert list(frame.columns) == ["parent", "child", "strength", "direction"]
        assert len(frame) == 4
        assert frame.iloc[0]["child"] == "Y"

    def test_dict_roundtrip(self, table):
        """Test the dict form restores the table."""
        loaded = EdgeStrengthTable.from_dict(table.to_dict())
        assert loaded.strengths() == table.strengths()
        assert loaded.replicates == 10

    def test_malformed_dict(self):
        """Test that a broken stored table is reported."""
        with pytest.raises(DeserializationError):
            EdgeStrengthTable.from_dict({"nodes": ["a"], "counts": [["a"]]})

    def test_count_out_of_range(self):
        """Test that counts cannot exceed the replicate count."""
        with pytest.raises(ValidationError):
            EdgeStrengthTable(("a", "b"), {("a", "b"): 3}, 2)
        with pytest.raises(ValidationError):
            EdgeStrengthTable(("a", "b"), {}, 0)


class TestAverageNetwork:
    """Tests for thresholding into a consensus DAG."""

    def test_threshold(self, table, caplog):
        """Test strongest-first admission and cycle skipping."""
        with caplog.at_level("WARNING", logger="rdbn.bootstrap"):
            dag = average_network(table, 0.6)
        assert dag.edges == frozenset({("b", "Y"), ("a", "b")})
        assert "b->a" in caplog.text

    def test_max_outcome(self, table):
        """Test the threshold set by the strongest edge into the outcome."""
        assert resolve_threshold(table, "max-outcome") == pytest.approx(0.9)
        dag = average_network(table, "max-outcome")
        assert dag.edges == frozenset({("b", "Y")})

    def test_max_outcome_without_edge(self):
        """Test max-outcome needs an edge into the outcome."""
        table = EdgeStrengthTable(("Y", "a", "b"), {("a", "b"): 5}, 5)
        with pytest.raises(ValidationError):
            average_network(table, "max-outcome")

    def test_invalid_threshold(self, table):
        """Test thresholds outside (0, 1] are rejected."""
        with pytest.raises(ValidationError):
            average_network(table, 1.01)
        with pytest.raises(ValidationError):
            average_network(table, 0.0)
        with pytest.raises(ValidationError):
            average_network(table, "median")

    def test_monotone_in_threshold(self, table):
        """Test raising the threshold never adds edges."""
        cuts = [0.1, 0.3, 0.5, 0.75, 0.85, 0.95, 1.0]
        edge_sets = [average_network(table, t).edges for t in cuts]
        assert all(high <= low for low, high in zip(edge_sets, edge_sets[1:]))
        assert edge_sets[-1] == frozenset()


class TestBootstrapStrength:
    """Tests for the resampling loop."""

    def test_single_replicate_is_binary(self, chain_frame):
        """Test that R=1 gives strengths of exactly one."""
        table = bootstrap_strength(chain_frame, replicates=1, seed=3)
        assert table.replicates == 1
        assert set(table.strengths().values()) == {1.0}

    def test_chain_links_found(self, chain_frame):
        """Test the chain's adjacencies appear in every replicate."""
        table = bootstrap_strength(chain_frame, replicates=5, seed=2)
        for u, v in [("a", "b"), ("b", "c")]:
            assert table.strength(u, v) + table.strength(v, u) == pytest.approx(1.0)

    def test_deterministic(self, chain_frame):
        """Test equal seeds give equal tables."""
        first = bootstrap_strength(chain_frame, replicates=4, seed=9)
        second = bootstrap_strength(chain_frame, replicates=4, seed=9)
        assert first.to_dict() == second.to_dict()

    @pytest.mark.slow
    def test_independent_of_jobs(self, chain_frame):
        """Test worker count does not change the result."""
        config = BootstrapConfig(replicates=6, seed=4, search=SearchConfig(restarts=1))
        serial = bootstrap_strength(chain_frame, config=config, jobs=1)
        parallel = bootstrap_strength(chain_frame, config=config, jobs=2)
        assert serial.to_dict() == parallel.to_dict()

    def test_constant_column(self):
        """Test that a constant column cannot be resampled."""
        frame = pd.DataFrame({"a": np.arange(10, dtype=float), "b": np.ones(10)})
        with pytest.raises(NumericalError):
            bootstrap_strength(frame, replicates=1, seed=0)

    def test_invalid_arguments(self, chain_frame):
        """Test replicate and worker counts must be positive."""
        with pytest.raises(ValidationError):
            bootstrap_strength(chain_frame, replicates=0)
        with pytest.raises(ValidationError):
            bootstrap_strength(chain_frame, replicates=1, jobs=0)
