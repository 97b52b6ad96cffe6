"""Closed-form bounds for the randomized election, plus brute-force oracles.

All logarithms are base 2 unless a function says otherwise.
"""
from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from dataclasses import asdict, dataclass

from .portgraph import GraphError, PortGraph, bucket_index, degree_buckets
from .protocols.randomized import candidate_probability
from .simcore import Trace


class BoundNotApplicable(ValueError):
    """A bound was asked for outside the range where it holds."""


def expected_candidates(g: PortGraph) -> float:
    """E[X]: sum of the per-node candidate probabilities."""
    if any(d == 0 for d in g.degrees):
        raise GraphError("expected_candidates needs every degree >= 1")
    return math.fsum(candidate_probability(d) for d in g.degrees)


def candidates_lower_formula(n: int) -> float:
    """``2 + log2(n) / 2``."""
    return 2 + 0.5 * math.log2(n)


def lagrangian_objective(xs: Sequence[float]) -> float:
    """``sum (1 + log2 x) / x``; E[X] with the degrees relaxed to reals."""
    return math.fsum((1 + math.log2(x)) / x for x in xs)


def lagrangian_min(n: int, C: float) -> float:
    """``(n^2 / C)(1 + log2(C / n))``: the objective at the uniform point ``x_i = C/n``."""
    if n < 1:
        raise ValueError("n must be positive")
    if C < n * math.sqrt(2):
        raise BoundNotApplicable(f"C={C} is below n*sqrt(2)={n * math.sqrt(2):.6g}")
    return (n * n / C) * (1 + math.log2(C / n))


@dataclass(frozen=True)
class GridResult:
    n: int
    C: float
    step: float
    lower: float
    minimum: float
    argmin: tuple[float, ...]
    points: int

    def distance_to_uniform(self) -> float:
        u = self.C / self.n
        return max(abs(x - u) for x in self.argmin)


def _compositions(total: int, parts: int, least: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        if total >= least:
            yield (total,)
        return
    for first in range(least, total - least * (parts - 1) + 1):
        for rest in _compositions(total - first, parts - 1, least):
            yield (first, *rest)


def grid_minimize(n: int, C: float, step: float = 0.05, lower: float | None = None) -> GridResult:
    """Exhaustive minimum of :func:`lagrangian_objective` on the grid ``{x : sum x = C, x_i >= lower}``.

    Points are multiples of ``step``; ``lower`` defaults to ``step`` because the
    objective diverges to minus infinity as any ``x_i`` approaches zero.
    Coordinates are enumerated as integers so the constraint holds exactly.
    """
    if lower is None:
        lower = step
    total = round(C / step)
    least = round(lower / step)
    if not math.isclose(total * step, C) or not math.isclose(least * step, lower):
        raise ValueError("C and lower must be multiples of step")
    if least < 1:
        raise ValueError("lower must be at least one step")
    best = math.inf
    arg: tuple[int, ...] = ()
    count = 0
    for comp in _compositions(total, n, least):
        count += 1
        val = lagrangian_objective([c * step for c in comp])
        if val < best:
            best, arg = val, comp
    if not count:
        raise ValueError("empty grid")
    return GridResult(n, C, step, lower, best, tuple(c * step for c in arg), count)


def chernoff_upper(mu: float, R: float) -> float:
    """``Pr[X >= R] <= 2^-R``, valid for ``R >= 6 mu``."""
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if R < 6 * mu:
        raise BoundNotApplicable(f"R={R} < 6*mu={6 * mu}")
    return 2.0 ** (-R)


def chernoff_lower(mu: float, delta: float) -> float:
    """``(e^-delta / (1-delta)^(1-delta))^mu``, bounding ``Pr[X <= (1-delta) mu]``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    return math.exp(mu * (-delta - (1 - delta) * math.log(1 - delta)))


def few_candidates_delta(log_n: float) -> float:
    """The delta that puts ``(1 - delta) mu`` at exactly 1 for ``mu = 2 + log_n / 2``."""
    return (2 + log_n) / (4 + log_n)


def few_candidates_bound(n: int, log=math.log2) -> float:
    """Lower-tail bound on ``Pr[X <= 1]`` at ``mu = 2 + log(n)/2``.

    With ``log=math.log`` this is exactly ``(2 + ln(n)/2) / (e sqrt(n))``; with
    base 2 it is smaller than the same expression written with ``log2``.
    """
    L = log(n)
    return chernoff_lower(2 + 0.5 * L, few_candidates_delta(L))


@dataclass(frozen=True)
class MessageBounds:
    expected_upper: float
    whp_upper: float
    per_bucket_whp: float
    det_per_round: int
    failure: float


def message_bounds(n: int) -> MessageBounds:
    if n < 1:
        raise ValueError("n must be positive")
    L = math.log2(n)
    return MessageBounds(
        expected_upper=2 * n + 2 * n * L,
        whp_upper=54 * n * L**3,
        per_bucket_whp=24 * n * L**2,
        det_per_round=3 * n,
        failure=n ** (-1 / 3),
    )


@dataclass(frozen=True)
class BoundReport:
    expected_candidates: float
    lower_bound_formula: float
    # None when 2m < n sqrt(2), where the closed form is not claimed
    lagrangian_min: float | None
    message_bound_whp: float
    failure_bound: float
    expected_message_upper: float
    per_bucket_whp: float
    det_per_round: int

    def as_dict(self) -> dict:
        return asdict(self)


def bound_report(g: PortGraph) -> BoundReport:
    n = g.n
    mb = message_bounds(n)
    try:
        lag = lagrangian_min(n, 2 * g.m)
    except BoundNotApplicable:
        lag = None
    return BoundReport(
        expected_candidates=expected_candidates(g),
        lower_bound_formula=candidates_lower_formula(n),
        lagrangian_min=lag,
        message_bound_whp=mb.whp_upper,
        failure_bound=mb.failure,
        expected_message_upper=mb.expected_upper,
        per_bucket_whp=mb.per_bucket_whp,
        det_per_round=mb.det_per_round,
    )


def bucket_message_stats(t: Trace, g: PortGraph) -> dict[int, int]:
    """First-round messages grouped by the degree bucket of their sender.

    Every bucket ``0 .. k`` is present, empty ones with 0.
    """
    if t.graph is not g and (t.graph.ids != g.ids or t.graph.ports != g.ports):
        raise GraphError("trace was not produced on this graph")
    if t.raw_batches is None:
        raise ValueError("bucket statistics need a recorded trace")
    k = degree_buckets(g).k
    stats = {j: 0 for j in range(k + 1)}
    if t.raw_batches:
        for src, *_ in t.raw_batches[0]:
            stats[bucket_index(g.degree(src))] += 1
    return stats
