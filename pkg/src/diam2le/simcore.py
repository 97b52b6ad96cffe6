"""Synchronous round engine.

Round ``r`` works as follows: every node that has not halted consumes the
messages delivered to it in round ``r`` (those sent in round ``r - 1``) and may
emit at most one message per port; those are delivered in round ``r + 1``.
All nodes wake up together in round 1 with an empty inbox.

A protocol supplies node automata through :class:`Protocol`.  Nodes address
neighbours only by port number and see their inbox as a list of
``(port, kind, payload)`` triples.
"""
from __future__ import annotations

import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from operator import itemgetter
from typing import Any, NamedTuple

import numpy as np

from .portgraph import BridgeAnnotation, GraphError, PortGraph, check_annotation


class Kind(str, Enum):
    PROBE = "probe"
    REPLY = "reply"
    NOTIFY = "notify"
    ASK = "ask"
    DROP = "drop"
    BROADCAST = "broadcast"


class Status(str, Enum):
    UNDECIDED = "undecided"
    ELECTED = "elected"
    NON_ELECTED = "non-elected"


class SimulationError(RuntimeError):
    pass


class CongestViolation(SimulationError):
    pass


class PortConflict(SimulationError):
    """A node tried to send twice on one port within a round."""


class UnterminatedRun(ValueError):
    """An outcome still contains undecided nodes."""


def payload_bits(payload: tuple[int, ...]) -> int:
    return sum(int(x).bit_length() or 1 for x in payload)


class Message(NamedTuple):
    src: int
    src_port: int
    dst: int
    dst_port: int
    kind: Kind
    payload: tuple[int, ...]

    @property
    def bit_size(self) -> int:
        return payload_bits(self.payload)

    def to_list(self) -> list:
        return [self.src, self.src_port, self.dst, self.dst_port, self.kind.value, list(self.payload)]


# (port, kind, payload) as seen by a node
Envelope = tuple[int, Kind, tuple[int, ...]]


class NodeRandom:
    """Private coin of one node.

    The first draws come from a per-run block (row ``index``); further draws
    fall back to a generator spawned from ``(seed, index)``.  Either way the
    sequence depends only on the run seed and the node index.
    """

    __slots__ = ("_row", "_pos", "_seed", "_index", "_fallback")

    def __init__(self, row: np.ndarray, seed: int, index: int) -> None:
        self._row = row
        self._pos = 0
        self._seed = seed
        self._index = index
        self._fallback: np.random.Generator | None = None

    def random(self) -> float:
        if self._pos < len(self._row):
            x = float(self._row[self._pos])
            self._pos += 1
            return x
        if self._fallback is None:
            ss = np.random.SeedSequence(self._seed, spawn_key=(self._index,))
            self._fallback = np.random.default_rng(ss)
        return float(self._fallback.random())


_BLOCK = 2


def node_randoms(seed: int, n: int) -> list[NodeRandom]:
    block = np.random.default_rng(seed).random((n, _BLOCK))
    return [NodeRandom(block[v], seed, v) for v in range(n)]


@dataclass
class NodeContext:
    """What a node knows when it wakes up."""

    id: int
    degree: int
    n: int
    rng: NodeRandom


class Node:
    """Base automaton.  Subclasses implement :meth:`step`."""

    def __init__(self, ctx: NodeContext) -> None:
        self.ctx = ctx
        self.status = Status.UNDECIDED
        self.halted = False

    def step(self, rnd: int, inbox: list[Envelope]) -> list[Envelope]:
        raise NotImplementedError

    def decide(self, elected: bool) -> None:
        self.status = Status.ELECTED if elected else Status.NON_ELECTED
        self.halted = True


class Protocol:
    key = "abstract"

    def make_node(self, ctx: NodeContext) -> Node:
        raise NotImplementedError

    def round_limit(self, n: int) -> int:
        """Engine rounds a correct run may need; the default round cap."""
        raise NotImplementedError

    def summarize(self, nodes: Sequence[Node], g: PortGraph) -> dict[str, Any]:
        return {}


@dataclass(frozen=True)
class Outcome:
    statuses: tuple[Status, ...]
    valid: bool
    leader: int | None

    @classmethod
    def from_statuses(cls, statuses: Iterable[Status]) -> Outcome:
        st = tuple(statuses)
        elected = [v for v, s in enumerate(st) if s is Status.ELECTED]
        valid = len(elected) == 1 and all(s is not Status.UNDECIDED for s in st)
        return cls(st, valid, elected[0] if valid else None)

    @property
    def elected(self) -> list[int]:
        return [v for v, s in enumerate(self.statuses) if s is Status.ELECTED]


def validate_election(o: Outcome) -> bool:
    """True iff exactly one node is ELECTED; raises if anyone is undecided."""
    undecided = [v for v, s in enumerate(o.statuses) if s is Status.UNDECIDED]
    if undecided:
        raise UnterminatedRun(f"{len(undecided)} node(s) undecided, e.g. node {undecided[0]}")
    return sum(s is Status.ELECTED for s in o.statuses) == 1


@dataclass
class Trace:
    graph: PortGraph
    protocol: str
    seed: int
    per_round_counts: list[int]
    outcome: Outcome
    steps: int
    terminated: bool
    raw_batches: list[list[tuple]] | None = None
    bridge_crossings: int = 0
    info: dict[str, Any] = field(default_factory=dict)

    @property
    def total_messages(self) -> int:
        return sum(self.per_round_counts)

    @property
    def rounds(self) -> int:
        """Communication rounds: index of the last round in which anything was sent.

        The step after it only consumes that round's messages.
        """
        for r in range(len(self.per_round_counts), 0, -1):
            if self.per_round_counts[r - 1]:
                return r
        return 0

    @property
    def max_round_messages(self) -> int:
        return max(self.per_round_counts, default=0)

    @property
    def batches(self) -> list[list[Message]] | None:
        if self.raw_batches is None:
            return None
        return [[Message._make(m) for m in batch] for batch in self.raw_batches]

    def messages(self) -> Iterable[Message]:
        if self.raw_batches is None:
            raise SimulationError("trace was recorded without message batches")
        for batch in self.raw_batches:
            for m in batch:
                yield Message._make(m)

    def summary(self) -> dict[str, Any]:
        o = self.outcome
        return {
            "protocol": self.protocol,
            "seed": self.seed,
            "n": self.graph.n,
            "m": self.graph.m,
            "steps": self.steps,
            "rounds": self.rounds,
            "total_messages": self.total_messages,
            "per_round_counts": list(self.per_round_counts),
            "bridge_crossings": self.bridge_crossings,
            "terminated": self.terminated,
            "valid": o.valid,
            "leader": o.leader,
            "statuses": [s.value for s in o.statuses],
        }

    def export_lines(self) -> Iterable[str]:
        """JSON lines: one record per round, then one summary record."""
        batches = self.batches or [[] for _ in self.per_round_counts]
        for r, batch in enumerate(batches, start=1):
            yield json.dumps({"round": r, "messages": [m.to_list() for m in batch]}, separators=(",", ":"))
        yield json.dumps({"summary": self.summary()}, separators=(",", ":"), sort_keys=True)

    def write_jsonl(self, fh) -> None:
        for line in self.export_lines():
            fh.write(line + "\n")


def word_bits(g: PortGraph) -> int:
    """Width of one identifier word: enough for ``log2 n`` and for every id in ``g``."""
    return max(1, math.ceil(math.log2(g.n)) if g.n > 1 else 1, max(g.ids, default=1).bit_length())


def default_congest_budget(g: PortGraph, c: int = 2) -> int:
    return c * word_bits(g)


def run_sync(
    g: PortGraph,
    protocol: Protocol,
    seed: int = 0,
    max_rounds: int | None = None,
    congest_budget: int | None = None,
    enforce_congest: bool = True,
    record: bool = True,
    annotation: BridgeAnnotation | None = None,
) -> Trace:
    """Run ``protocol`` on ``g`` until every node halts or ``max_rounds`` elapse."""
    n = g.n
    if max_rounds is None:
        max_rounds = protocol.round_limit(n)
    if congest_budget is None:
        congest_budget = default_congest_budget(g)
    if annotation is not None:
        check_annotation(g, annotation)

    rngs = node_randoms(seed, n)
    nodes = [protocol.make_node(NodeContext(g.ids[v], g.degree(v), n, rngs[v])) for v in range(n)]
    ports = g.ports
    inboxes: list[list[Envelope]] = [[] for _ in range(n)]
    counts: list[int] = []
    batches: list[list[tuple]] | None = [] if record else None
    bridge_ports = _bridge_ports(g, annotation) if annotation is not None else None
    crossings = 0
    rnd = 0
    terminated = True
    first = itemgetter(0)

    while not all(node.halted for node in nodes):
        if rnd >= max_rounds:
            terminated = False
            break
        rnd += 1
        nxt: list[list[Envelope]] = [[] for _ in range(n)]
        batch: list[tuple] = []
        sent = 0
        for v, node in enumerate(nodes):
            if node.halted:
                continue
            out = node.step(rnd, inboxes[v])
            if not out:
                continue
            used = set(map(first, out))
            if len(used) != len(out):
                raise PortConflict(f"node {v} sent twice on one port in round {rnd}")
            if enforce_congest:
                _check_budget(out, congest_budget, v)
            if bridge_ports is not None and bridge_ports[v]:
                crossings += len(used & bridge_ports[v])
            pv = ports[v]
            if record:
                for p, kind, payload in out:
                    u, q = pv[p]
                    nxt[u].append((q, kind, payload))
                    batch.append((v, p, u, q, kind, payload))
            else:
                for p, kind, payload in out:
                    u, q = pv[p]
                    nxt[u].append((q, kind, payload))
            sent += len(out)
        counts.append(sent)
        if record:
            batches.append(batch)
        inboxes = nxt

    outcome = Outcome.from_statuses(node.status for node in nodes)
    trace = Trace(
        graph=g,
        protocol=protocol.key,
        seed=seed,
        per_round_counts=counts,
        outcome=outcome,
        steps=rnd,
        terminated=terminated,
        raw_batches=batches,
        bridge_crossings=crossings,
    )
    trace.info = protocol.summarize(nodes, g)
    return trace


def _check_budget(out: list[Envelope], budget: int, v: int) -> None:
    last = None
    for _, kind, payload in out:
        if payload is last:
            continue
        last = payload
        bits = payload_bits(payload)
        if bits > budget:
            raise CongestViolation(f"{kind.value} from node {v} carries {bits} bits, budget {budget}")


def _bridge_ports(g: PortGraph, ann: BridgeAnnotation) -> list[set[int]]:
    """Ports of each node that lie on a bridge edge."""
    out: list[set[int]] = [set() for _ in range(g.n)]
    for u, v in ann.bridges:
        for a, b in ((u, v), (v, u)):
            out[a].update(p for p, (w, _) in enumerate(g.ports[a]) if w == b)
    return out


def count_bridge_crossings(t: Trace, ann: BridgeAnnotation) -> int:
    """Messages of ``t`` travelling over a bridge edge, in either direction."""
    try:
        check_annotation(t.graph, ann)
    except GraphError as exc:
        raise GraphError(f"annotation does not belong to the traced graph: {exc}") from None
    bridges = ann.bridge_set
    return sum(1 for m in t.messages() if frozenset((m.src, m.dst)) in bridges)
