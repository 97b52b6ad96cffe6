"""Sparsify a complete graph to diameter two, then elect.

Engine rounds 1-3 are a handshake: every node asks on port 0, the asked node
answers with its id, and the asker sends ``drop`` back iff that id exceeds its
own; both ends then treat the edge as removed.  In round 4 every node with at
least ``ceil(n/2)`` removed edges becomes a candidate and announces its id on
every port of the original graph.  In round 5 either candidates exist (the
largest announced id wins, nobody else is elected) or the inner protocol
starts on the surviving edges, translated through a port view.
"""
from __future__ import annotations

import math

from ..portgraph import GraphError, PortGraph
from ..simcore import Envelope, Kind, Node, NodeContext, Protocol

HANDSHAKE_ROUNDS = 3
# inner round 1 runs in engine round 5
INNER_OFFSET = 4


class ReductionNode(Node):
    def __init__(self, ctx: NodeContext, inner: Protocol) -> None:
        super().__init__(ctx)
        self.inner_protocol = inner
        self.chosen_port = 0
        self.removed_ports: set[int] = set()
        self.is_candidate = False
        self.known_candidate_ids: set[int] = set()
        self.inner: Node | None = None
        self.surviving: list[int] = []
        self._to_inner: dict[int, int] = {}

    def step(self, rnd: int, inbox: list[Envelope]) -> list[Envelope]:
        ctx = self.ctx
        if rnd == 1:
            return [(self.chosen_port, Kind.ASK, ())]
        if rnd == 2:
            me = (ctx.id,)
            return [(port, Kind.REPLY, me) for port, kind, _ in inbox if kind is Kind.ASK]
        if rnd == 3:
            for port, kind, payload in inbox:
                if kind is Kind.REPLY and port == self.chosen_port and payload[0] > ctx.id:
                    self.removed_ports.add(port)
                    return [(port, Kind.DROP, ())]
            return []
        if rnd == 4:
            self.removed_ports.update(port for port, kind, _ in inbox if kind is Kind.DROP)
            if len(self.removed_ports) >= math.ceil(ctx.n / 2):
                self.is_candidate = True
                self.known_candidate_ids.add(ctx.id)
                me = (ctx.id,)
                return [(p, Kind.BROADCAST, me) for p in range(ctx.degree)]
            return []
        if rnd == 5:
            self.known_candidate_ids.update(
                payload[0] for _, kind, payload in inbox if kind is Kind.BROADCAST
            )
            if self.known_candidate_ids:
                self.decide(self.is_candidate and ctx.id == max(self.known_candidate_ids))
                return []
            self._start_inner()
        return self._inner_step(rnd - INNER_OFFSET, inbox)

    def _start_inner(self) -> None:
        ctx = self.ctx
        self.surviving = [p for p in range(ctx.degree) if p not in self.removed_ports]
        self._to_inner = {p: j for j, p in enumerate(self.surviving)}
        view = NodeContext(ctx.id, len(self.surviving), ctx.n, ctx.rng)
        self.inner = self.inner_protocol.make_node(view)

    def _inner_step(self, inner_rnd: int, inbox: list[Envelope]) -> list[Envelope]:
        inner = self.inner
        to_inner = self._to_inner
        translated = [(to_inner[port], kind, payload) for port, kind, payload in inbox]
        out = inner.step(inner_rnd, translated)
        if inner.halted:
            self.status = inner.status
            self.halted = True
        surviving = self.surviving
        return [(surviving[j], kind, payload) for j, kind, payload in out]


class Reduction(Protocol):
    def __init__(self, inner: Protocol) -> None:
        self.inner = inner
        self.key = f"reduce+{inner.key}"

    def make_node(self, ctx: NodeContext) -> Node:
        if ctx.n < 3 or ctx.degree != ctx.n - 1:
            raise GraphError("the sparsification reduction needs a complete graph with n >= 3")
        return ReductionNode(ctx, self.inner)

    def round_limit(self, n: int) -> int:
        return INNER_OFFSET + self.inner.round_limit(n)

    def summarize(self, nodes, g):
        removed = {frozenset((v, g.ports[v][p][0])) for v, node in enumerate(nodes) for p in node.removed_ports}
        candidates = [v for v, node in enumerate(nodes) if node.is_candidate]
        info = {
            "removed_edges": len(removed),
            "candidate_count": len(candidates),
            "candidates": candidates,
            "surviving_graph": surviving_graph(g, nodes),
            "ran_inner": any(node.inner is not None for node in nodes),
        }
        if info["ran_inner"]:
            inner_nodes = [node.inner for node in nodes]
            info["inner"] = self.inner.summarize(inner_nodes, info["surviving_graph"])
        return info


def surviving_graph(g: PortGraph, nodes) -> PortGraph:
    """``g`` minus the removed edges, each node keeping its surviving ports in order."""
    nbrs = []
    for v, node in enumerate(nodes):
        nbrs.append([u for p, (u, _) in enumerate(g.ports[v]) if p not in node.removed_ports])
    return PortGraph.from_neighbor_lists(nbrs, g.ids)


def sparsify_and_elect(inner: Protocol) -> Reduction:
    return Reduction(inner)

