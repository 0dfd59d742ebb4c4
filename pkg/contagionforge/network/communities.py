"""
Walktrap communities on the symmetrised Stage-1 network and the
advanced/emerging transmitter-receiver decomposition.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import igraph
import networkx as nx
from networkx.algorithms.community import modularity

from ..data.ingest import MARKET_CLASSES
from ..errors import DomainError
from ..stage1.detect import ContagionNetwork

logger = logging.getLogger(__name__)

DEFAULT_STEPS = 4


@dataclass(frozen=True)
class CommunityPartition:
    assignments: Dict[str, int]
    n_communities: int
    modularity: float

    def members(self, community: int) -> List[str]:
        return [node for node, c in self.assignments.items() if c == community]


def symmetrize(network: ContagionNetwork) -> nx.Graph:
    """Undirected graph with weight(i, j) = max(w_ij, w_ji) over existing edges."""
    graph = nx.Graph()
    graph.add_nodes_from(network.nodes)
    for src, dst, w in network.edges:
        if src == dst:
            continue
        if graph.has_edge(src, dst):
            graph[src][dst]["weight"] = max(graph[src][dst]["weight"], w)
        else:
            graph.add_edge(src, dst, weight=w)
    return graph


def _walktrap_membership(graph: nx.Graph, nodes: List[str], steps: int) -> List[int]:
    index = {node: i for i, node in enumerate(nodes)}
    edges = list(graph.subgraph(nodes).edges(data="weight", default=1.0))
    g = igraph.Graph(n=len(nodes), edges=[(index[u], index[v]) for u, v, _ in edges], directed=False)
    g.es["weight"] = [float(w) for _, _, w in edges]
    dendrogram = g.community_walktrap(weights="weight", steps=steps)
    return list(dendrogram.as_clustering().membership)


def walktrap(graph: nx.Graph, steps: int = DEFAULT_STEPS) -> CommunityPartition:
    """Random-walk agglomerative clustering cut at maximum modularity.

    Isolated nodes are singleton communities. Ids are contiguous from 0 in
    node order of first appearance.
    """
    if steps < 1:
        raise DomainError(f"Walk length must be positive, got {steps}")
    nodes = list(graph.nodes)
    connected = [n for n in nodes if graph.degree(n) > 0]
    membership = dict(zip(connected, _walktrap_membership(graph, connected, steps))) if connected else {}

    relabel: Dict[object, int] = {}
    assignments: Dict[str, int] = {}
    for node in nodes:
        key = ("walk", membership[node]) if node in membership else ("isolated", node)
        if key not in relabel:
            relabel[key] = len(relabel)
        assignments[node] = relabel[key]

    groups: Dict[int, set] = {}
    for node, c in assignments.items():
        groups.setdefault(c, set()).add(node)
    score = modularity(graph, list(groups.values()), weight="weight") if graph.number_of_edges() else 0.0
    return CommunityPartition(assignments=assignments, n_communities=len(groups), modularity=float(score))


def degree_decomposition(
    network: ContagionNetwork,
    classes: Optional[Dict[str, str]] = None,
) -> Dict[str, Optional[float]]:
    """Share of total out- and in-degree held by each market class."""
    classes = classes if classes is not None else network.nodes
    missing = [n for n in network.nodes if n not in classes]
    if missing:
        raise DomainError(f"No class for nodes: {', '.join(missing)}")

    result: Dict[str, Optional[float]] = {}
    total = len(network.edges)
    for direction, degree in (("out", network.out_degree()), ("in", network.in_degree())):
        for market_class in MARKET_CLASSES:
            held = sum(d for node, d in degree.items() if classes[node] == market_class)
            result[f"{direction}_{market_class}"] = held / total if total else None
    return result
