"""Small-graph enumerations shared by the exhaustive tests."""
from __future__ import annotations

import itertools
from collections.abc import Iterator

import networkx as nx

from diam2le.portgraph import PortGraph


def labeled_graphs(n: int) -> Iterator[PortGraph]:
    """Every labeled simple graph on ``n`` nodes, ids ``1..n``, ports ascending."""
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        yield PortGraph.from_edges(n, [pairs[i] for i in range(len(pairs)) if mask >> i & 1])


def from_nx(h: nx.Graph) -> PortGraph:
    h = nx.convert_node_labels_to_integers(h)
    return PortGraph.from_edges(h.number_of_nodes(), h.edges())


def atlas_graphs(max_n: int = 7) -> Iterator[PortGraph]:
    """One graph per isomorphism class, 1 <= n <= min(max_n, 7)."""
    for h in nx.graph_atlas_g():
        if 1 <= h.number_of_nodes() <= max_n:
            yield from_nx(h)


def connected_atlas(max_n: int = 7, min_n: int = 1) -> Iterator[PortGraph]:
    for h in nx.graph_atlas_g():
        if min_n <= h.number_of_nodes() <= max_n and nx.is_connected(h):
            yield from_nx(h)


def eight_node_extensions() -> Iterator[PortGraph]:
    """Every 8-node graph up to isomorphism (with repeats): a 7-node class plus one vertex."""
    for h in nx.graph_atlas_g():
        if h.number_of_nodes() != 7:
            continue
        base = list(h.edges())
        for mask in range(1 << 7):
            extra = [(v, 7) for v in range(7) if mask >> v & 1]
            yield PortGraph.from_edges(8, base + extra)
