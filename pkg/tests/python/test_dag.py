"""
Unit tests for Dag construction, ordering and DOT export.
"""

import networkx as nx
import pytest

from rdbn.dag import Dag, node_display_label, validate_dag
from rdbn.exceptions import StructuralError


class TestValidation:
    """Tests for structural checks on construction."""

    def test_valid_chain(self):
        """Test a simple chain is accepted."""
        dag = validate_dag(["a", "b", "c"], [("a", "b"), ("b", "c")])
        assert dag.nodes == ("a", "b", "c")
        assert dag.edges == frozenset({("a", "b"), ("b", "c")})

    def test_cycle_named_in_message(self):
        """Test that a directed cycle is rejected and reported."""
        with pytest.raises(StructuralError) as exc_info:
            validate_dag(["a", "b", "c"], [("a", "b"), ("b", "c"), ("c", "a")])
        assert "Cycle" in str(exc_info.value)
        assert "->" in str(exc_info.value)

    def test_self_loop(self):
        """Test that a self-loop is rejected."""
        with pytest.raises(StructuralError):
            Dag(["a"], [("a", "a")])

    def test_antiparallel(self):
        """Test that both directions of one pair are rejected."""
        with pytest.raises(StructuralError) as exc_info:
            Dag(["a", "b"], [("a", "b"), ("b", "a")])
        assert "Antiparallel" in str(exc_info.value)

    def test_duplicate_edge(self):
        """Test that a repeated edge is rejected."""
        with pytest.raises(StructuralError):
            Dag(["a", "b"], [("a", "b"), ("a", "b")])

    def test_unknown_node(self):
        """Test that an edge to an unknown node is rejected."""
        with pytest.raises(StructuralError):
            Dag(["a"], [("a", "z")])

    def test_duplicate_labels(self):
        """Test that node labels must be unique."""
        with pytest.raises(StructuralError):
            Dag(["a", "a"])

    def test_empty_graph(self):
        """Test the edgeless graph."""
        dag = Dag(["a", "b"])
        assert len(dag) == 2
        assert dag.parents("a") == ()
        assert dag.n_parameters() == 4


class TestQueries:
    """Tests for parent, order and reachability queries."""

    def test_parents_in_node_order(self):
        """Test that parents follow node order, not insertion order."""
        dag = Dag(["c", "a", "b", "y"], [("b", "y"), ("c", "y"), ("a", "y")])
        assert dag.parents("y") == ("c", "a", "b")
        assert dag.children("c") == ("y",)

    def test_topological_order_ties_by_node_order(self):
        """Test deterministic tie-breaking in topological sort."""
        dag = Dag(["y", "x2", "x1"], [("x1", "y"), ("x2", "y")])
        assert dag.topological_order() == ["x2", "x1", "y"]

    def test_topological_order_is_valid(self):
        """Test every edge points forward in the order."""
        dag = Dag(list("abcde"), [("e", "a"), ("d", "b"), ("a", "b"), ("b", "c")])
        order = dag.topological_order()
        pos = {v: i for i, v in enumerate(order)}
        assert all(pos[u] < pos[v] for u, v in dag.edges)

    def test_reachability(self):
        """Test ancestors, descendants and paths."""
        dag = Dag(list("abcd"), [("a", "b"), ("b", "c")])
        assert dag.descendants("a") == {"b", "c"}
        assert dag.ancestors("c") == {"a", "b"}
        assert dag.has_path("a", "c")
        assert not dag.has_path("c", "a")
        assert not dag.has_path("a", "d")

    def test_sorted_edges(self):
        """Test edges are ordered by child then parent position."""
        dag = Dag(["a", "b", "c"], [("b", "c"), ("a", "c"), ("a", "b")])
        assert dag.sorted_edges() == [("a", "b"), ("a", "c"), ("b", "c")]

    def test_networkx_copy(self):
        """Test the exported graph is an independent copy."""
        dag = Dag(["a", "b"], [("a", "b")])
        graph = dag.to_networkx()
        graph.add_edge("b", "a")
        assert isinstance(graph, nx.DiGraph)
        assert not dag.has_edge("b", "a")


class TestSerialization:
    """Tests for dict and DOT forms."""

    def test_dict_roundtrip(self):
        """Test that from_dict restores an equal graph."""
        dag = Dag(["Y", "X1997", "X1998"], [("X1997", "X1998"), ("X1998", "Y")])
        assert Dag.from_dict(dag.to_dict()) == dag
        assert hash(Dag.from_dict(dag.to_dict())) == hash(dag)

    def test_dict_cycle_rejected(self):
        """Test that a cyclic stored graph fails to load."""
        with pytest.raises(StructuralError):
            Dag.from_dict({"nodes": ["a", "b"], "edges": [["a", "b"], ["b", "a"]]})

    def test_to_dot(self):
        """Test DOT output with strengths and labels."""
        dag = Dag(["Y", "X2005", "X2006"], [("X2005", "X2006"), ("X2006", "Y")])
        dot = dag.to_dot(strengths={("X2006", "Y"): 0.75}, labels={"Y": "Read"})
        assert dot.startswith("digraph G {")
        assert '"Y" [label="Read"];' in dot
        assert '"X2005" [label="2005"];' in dot
        assert '"X2006" -> "Y" [strength=0.75, label="0.75"];' in dot
        assert '"X2005" -> "X2006";' in dot
        assert dot.rstrip().endswith("}")

    def test_display_label(self):
        """Test year labels display without their prefix."""
        assert node_display_label("X1997") == "1997"
        assert node_display_label("Y") == "Y"
        assert node_display_label("X") == "X"
