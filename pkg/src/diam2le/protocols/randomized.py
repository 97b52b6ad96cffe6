"""Two-round randomized election by candidate sampling and referees.

Round 1: a node becomes a candidate with some probability and, if so, sends
its id on every port.  Round 2: every node that heard at least one id replies
to each sender with the smallest id it knows of (its own included when it is
a candidate itself).  Round 3 (receive only): a candidate is elected iff all
of its neighbours answered with its own id.
"""
from __future__ import annotations

import math
from collections.abc import Collection, Sequence

from ..portgraph import PortGraph
from ..simcore import Envelope, Kind, Node, NodeContext, Outcome, Protocol, Status


def candidate_probability(d: int) -> float:
    """``min(1, (1 + log2 d) / d)``; exactly 1 for degrees 1 and 2."""
    if d < 1:
        raise ValueError("degree must be at least 1")
    return min(1.0, (1 + math.log2(d)) / d)


def known_n_probability(n: int, c: float = 8.0) -> float:
    if n < 1:
        raise ValueError("n must be positive")
    if n == 1:
        return 1.0
    return min(1.0, c * math.log2(n) / n)


def referee_choice(received: Sequence[int], own_id: int | None = None) -> int:
    """The id a referee sends back: the minimum of what it heard, plus itself if a candidate."""
    best = min(received)
    if own_id is not None and own_id < best:
        return own_id
    return best


def accepts(own_id: int, replies: Sequence[int], degree: int) -> bool:
    """A candidate wins iff every one of its ``degree`` neighbours returned its id."""
    return len(replies) == degree and all(r == own_id for r in replies)


class RefereeNode(Node):
    def __init__(self, ctx: NodeContext, probability: float, forced: bool | None = None) -> None:
        super().__init__(ctx)
        self.probability = probability
        self.forced = forced
        self.is_candidate = False
        self.replies_seen: list[int] = []

    def step(self, rnd: int, inbox: list[Envelope]) -> list[Envelope]:
        ctx = self.ctx
        if rnd == 1:
            if ctx.degree == 0:
                # lone node
                self.is_candidate = True
                self.decide(True)
                return []
            if self.forced is None:
                self.is_candidate = ctx.rng.random() < self.probability
            else:
                self.is_candidate = self.forced
            if self.is_candidate:
                probe = (ctx.id,)
                return [(p, Kind.PROBE, probe) for p in range(ctx.degree)]
            return []
        if rnd == 2:
            out = []
            if inbox:
                best = referee_choice(
                    [payload[0] for _, _, payload in inbox],
                    ctx.id if self.is_candidate else None,
                )
                reply = (best,)
                out = [(port, Kind.REPLY, reply) for port, _, _ in inbox]
            if not self.is_candidate:
                self.decide(False)
            return out
        self.replies_seen = [payload[0] for _, kind, payload in inbox if kind is Kind.REPLY]
        self.decide(accepts(ctx.id, self.replies_seen, ctx.degree))
        return []


class _SamplingProtocol(Protocol):
    def __init__(self, candidates: Collection[int] | None = None) -> None:
        # ``candidates`` pins candidacy to a set of ids (exhaustive checks).
        self.candidates = None if candidates is None else frozenset(candidates)

    def probability(self, ctx: NodeContext) -> float:
        raise NotImplementedError

    def make_node(self, ctx: NodeContext) -> Node:
        forced = None if self.candidates is None else ctx.id in self.candidates
        p = self.probability(ctx) if ctx.degree else 1.0
        return RefereeNode(ctx, p, forced)

    def round_limit(self, n: int) -> int:
        return 3

    def summarize(self, nodes, g):
        cands = [v for v, node in enumerate(nodes) if node.is_candidate]
        return {
            "candidates": cands,
            "candidate_count": len(cands),
            "min_candidate": min(cands, key=lambda v: g.ids[v]) if cands else None,
        }


class RandomizedLocal(_SamplingProtocol):
    """Candidate probability from the local degree only; needs no knowledge of ``n``."""

    key = "rand-local"

    def probability(self, ctx):
        return candidate_probability(ctx.degree)


class KnownNRandomized(_SamplingProtocol):
    """Candidate probability ``min(1, c log2 n / n)``; every node knows ``n``."""

    key = "rand-known-n"

    def __init__(self, c: float = 8.0, candidates: Collection[int] | None = None) -> None:
        super().__init__(candidates)
        if c <= 0:
            raise ValueError("c must be positive")
        self.c = c

    def probability(self, ctx):
        return known_n_probability(ctx.n, self.c)


def randomized_local_le(candidates: Collection[int] | None = None) -> RandomizedLocal:
    return RandomizedLocal(candidates)


def known_n_randomized_le(c: float = 8.0, candidates: Collection[int] | None = None) -> KnownNRandomized:
    return KnownNRandomized(c, candidates)


def referee_outcome(g: PortGraph, candidates: Collection[int]) -> Outcome:
    """The referee/decision rules applied directly to a fixed candidate set of nodes.

    Same helpers as the node automaton, without the engine; used for
    exhaustive sweeps where running the engine per case would be too slow.
    """
    cset = set(candidates)
    ids = g.ids
    reply_at: dict[int, int] = {}
    for w in range(g.n):
        heard = [ids[u] for u, _ in g.ports[w] if u in cset]
        if heard:
            reply_at[w] = referee_choice(heard, ids[w] if w in cset else None)
    statuses = []
    for v in range(g.n):
        if g.degree(v) == 0:
            statuses.append(Status.ELECTED)
        elif v in cset:
            replies = [reply_at[u] for u, _ in g.ports[v]]
            statuses.append(Status.ELECTED if accepts(ids[v], replies, g.degree(v)) else Status.NON_ELECTED)
        else:
            statuses.append(Status.NON_ELECTED)
    return Outcome.from_statuses(statuses)

