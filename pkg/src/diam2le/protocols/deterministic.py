"""Deterministic election by doubling probe windows; the maximum id wins.

Phase ``i`` (``i = 1 .. ceil(log2 n)``) takes two engine rounds:

* round A (``2i - 1``): fold replies/notifies from the previous phase, then,
  if still active, probe neighbours ``2**(i-1) .. min(d, 2**i - 1)`` (1-based
  neighbour numbers, i.e. ports one lower).  Probing the last neighbour makes
  the node inactive.
* round B (``2i``): fold the probes and notifies just received, then reply
  with ``L`` to every prober.

Whenever the highest id seen ``L`` grows, the node drops out (inactive and
non-candidate) and tells the neighbour that had reported the old ``L``.  A
final drain round ``2 ceil(log2 n) + 1`` folds the last replies without
sending anything, and the survivors elect themselves.
"""
from __future__ import annotations

import math

from ..simcore import Envelope, Kind, Node, NodeContext, Protocol


def phase_count(n: int) -> int:
    return math.ceil(math.log2(n)) if n > 1 else 0


class DetNode(Node):
    def __init__(self, ctx: NodeContext) -> None:
        super().__init__(ctx)
        self.phases = phase_count(ctx.n)
        self.active = True
        self.candidate = True
        self.L = ctx.id
        self.N: int | None = None  # port that reported L; None while L is our own id
        self.probe_cursor = 1
        self.phase = 0
        # active flag after folding each phase's replies, index i-1 for phase i
        self.active_after_phase: list[bool] = []
        self.L_history: list[int] = [ctx.id]

    def _fold(self, inbox: list[Envelope]) -> int | None:
        """Absorb the ids in ``inbox``; return the stale ``N`` to notify, if any."""
        best = None
        best_port = None
        for port, _, payload in inbox:
            x = payload[0]
            if best is None or x > best or (x == best and port < best_port):
                best, best_port = x, port
        stale = None
        if best is not None and best > self.L:
            stale = self.N
            self.L = best
            self.N = best_port
            self.active = False
            self.candidate = False
        self.L_history.append(self.L)
        return stale

    def step(self, rnd: int, inbox: list[Envelope]) -> list[Envelope]:
        if rnd % 2:  # round A or drain
            stale = self._fold(inbox)
            if rnd > 1:
                self.active_after_phase.append(self.active)
            i = (rnd + 1) // 2
            if i > self.phases:
                self.decide(self.candidate)
                return []
            self.phase = i
            out: list[Envelope] = []
            if stale is not None:
                out.append((stale, Kind.NOTIFY, (self.L,)))
            if self.active:
                d = self.ctx.degree
                last = min(d, 2**i - 1)
                probe = (self.ctx.id,)
                out.extend((j - 1, Kind.PROBE, probe) for j in range(self.probe_cursor, last + 1))
                self.probe_cursor = last + 1
                if d <= 2**i - 1:
                    self.active = False
            return out

        # round B
        stale = self._fold(inbox)
        reply = (self.L,)
        probers = [port for port, kind, _ in inbox if kind is Kind.PROBE]
        out = [(port, Kind.REPLY, reply) for port in probers]
        if stale is not None and stale not in probers:
            out.append((stale, Kind.NOTIFY, reply))
        return out


class Deterministic(Protocol):
    key = "det"

    def make_node(self, ctx: NodeContext) -> DetNode:
        return DetNode(ctx)

    def round_limit(self, n: int) -> int:
        return 2 * phase_count(n) + 1

    def summarize(self, nodes, g):
        phases = phase_count(g.n)
        active = [sum(node.active_after_phase[i] for node in nodes) for i in range(phases)]
        return {
            "phases": phases,
            "active_per_phase": active,
            "L_monotone": all(
                all(a <= b for a, b in zip(node.L_history, node.L_history[1:])) for node in nodes
            ),
        }


def deterministic_le() -> Deterministic:
    return Deterministic()
