"""
rdbn Directed Acyclic Graphs

Immutable DAG over an ordered set of node labels, backed by networkx for
cycle finding, topological ordering and reachability.
"""

from __future__ import annotations

from typing import FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx

from rdbn.exceptions import StructuralError

Edge = Tuple[str, str]


class Dag:
    """
    A directed acyclic graph ``G = (V, E)``.

    Node order is significant: it drives parent ordering, deterministic
    topological sorting and every export. Build instances through
    ``validate_dag`` or ``Dag(nodes, edges)``; both reject cycles,
    self-loops, duplicate and antiparallel edges.

    Args:
        nodes: Ordered node labels
        edges: Directed (parent, child) pairs
    """

    def __init__(self, nodes: Sequence[str], edges: Iterable[Edge] = ()) -> None:
        nodes = tuple(str(v) for v in nodes)
        if len(set(nodes)) != len(nodes):
            raise StructuralError(f"Duplicate node labels in {list(nodes)}")
        edge_list = [(str(u), str(v)) for u, v in edges]
        known = set(nodes)
        seen = set()
        for u, v in edge_list:
            if u not in known or v not in known:
                raise StructuralError(f"Edge {u}->{v} references an unknown node")
            if u == v:
                raise StructuralError(f"Self-loop on {u}")
            if (u, v) in seen:
                raise StructuralError(f"Duplicate edge {u}->{v}")
            if (v, u) in seen:
                raise StructuralError(f"Antiparallel edges {v}->{u} and {u}->{v}")
            seen.add((u, v))

        graph = nx.DiGraph()
        graph.add_nodes_from(nodes)
        graph.add_edges_from(edge_list)
        try:
            cycle = nx.find_cycle(graph)
        except nx.NetworkXNoCycle:
            cycle = None
        if cycle:
            path = " -> ".join([u for u, _ in cycle] + [cycle[0][0]])
            raise StructuralError(f"Cycle detected: {path}")

        self._nodes = nodes
        self._index = {v: i for i, v in enumerate(nodes)}
        self._graph = graph
        self._edges: FrozenSet[Edge] = frozenset(seen)

    @property
    def nodes(self) -> Tuple[str, ...]:
        return self._nodes

    @property
    def edges(self) -> FrozenSet[Edge]:
        return self._edges

    def index(self, node: str) -> int:
        return self._index[node]

    def sorted_edges(self) -> List[Edge]:
        """Edges ordered by (child, parent) position in the node order."""
        return sorted(self._edges, key=lambda e: (self._index[e[1]], self._index[e[0]]))

    def parents(self, node: str) -> Tuple[str, ...]:
        """Parents of ``node`` in node order."""
        return tuple(sorted(self._graph.predecessors(node), key=self._index.__getitem__))

    def children(self, node: str) -> Tuple[str, ...]:
        return tuple(sorted(self._graph.successors(node), key=self._index.__getitem__))

    def has_edge(self, parent: str, child: str) -> bool:
        return (parent, child) in self._edges

    def topological_order(self) -> List[str]:
        """Topological order, ties broken by node order."""
        return list(nx.lexicographical_topological_sort(self._graph, key=self._index.__getitem__))

    def ancestors(self, node: str) -> set:
        return nx.ancestors(self._graph, node)

    def descendants(self, node: str) -> set:
        return nx.descendants(self._graph, node)

    def has_path(self, source: str, target: str) -> bool:
        return nx.has_path(self._graph, source, target)

    def to_networkx(self) -> nx.DiGraph:
        return self._graph.copy()

    def n_parameters(self) -> int:
        """Linear-Gaussian parameter count: |pa(v)| + 2 per node."""
        return len(self._edges) + 2 * len(self._nodes)

    def to_dict(self) -> dict:
        return {"nodes": list(self._nodes), "edges": [list(e) for e in self.sorted_edges()]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Dag":
        return cls(data["nodes"], [tuple(e) for e in data["edges"]])

    def to_dot(
        self,
        strengths: Optional[Mapping[Edge, float]] = None,
        labels: Optional[Mapping[str, str]] = None,
        name: str = "G",
    ) -> str:
        """
        Render as Graphviz DOT.

        Args:
            strengths: Optional per-edge strength, emitted as edge attributes
            labels: Display label per node (defaults to ``node_display_label``)
            name: Graph name
        """
        lines = [f"digraph {name} {{"]
        for v in self._nodes:
            label = (labels or {}).get(v, node_display_label(v))
            lines.append(f'  "{v}" [label="{label}"];')
        for u, v in self.sorted_edges():
            if strengths is not None and (u, v) in strengths:
                s = strengths[(u, v)]
                lines.append(f'  "{u}" -> "{v}" [strength={s!r}, label="{s:.2f}"];')
            else:
                lines.append(f'  "{u}" -> "{v}";')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dag):
            return NotImplemented
        return self._nodes == other._nodes and self._edges == other._edges

    def __hash__(self) -> int:
        return hash((self._nodes, self._edges))

    def __len__(self) -> int:
        return len(self._nodes)

    def __contains__(self, node: str) -> bool:
        return node in self._index

    def __repr__(self) -> str:
        edges = ", ".join(f"{u}->{v}" for u, v in self.sorted_edges())
        return f"Dag(nodes={len(self._nodes)}, edges=[{edges}])"


def node_display_label(node: str) -> str:
    """``X2005`` displays as ``2005``; other labels are shown unchanged."""
    if len(node) > 1 and node[0] == "X" and node[1:].isdigit():
        return node[1:]
    return node


def validate_dag(nodes: Sequence[str], edges: Iterable[Edge]) -> Dag:
    """
    Check ``(nodes, edges)`` and return the Dag.

    Raises:
        StructuralError: On unknown nodes, self-loops, duplicate or
            antiparallel edges, or a directed cycle (named in the message)
    """
    return Dag(nodes, edges)
