"""Seeded trial sweeps and their CSV summaries."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import portgraph as pg
from .analysis import bound_report
from .portgraph import BridgeAnnotation, GraphError, PortGraph
from .protocols import get_protocol
from .protocols.deterministic import phase_count
from .simcore import Trace, run_sync


def derive_seed(base_seed: int, *parts: object) -> int:
    """64-bit seed from blake2b over ``"base:part:part..."``; stable across platforms."""
    text = ":".join(str(x) for x in (base_seed, *parts))
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "big")


def trial_seed(base_seed: int, trial: int) -> int:
    return derive_seed(base_seed, trial)


# ---------------------------------------------------------------- graph specs

FAMILIES = ("complete", "lb", "twocliques", "random")


@dataclass(frozen=True)
class GraphInstance:
    label: str
    graph: PortGraph
    annotation: BridgeAnnotation | None = None


def _parse_params(text: str) -> dict[str, str]:
    params = {}
    for item in filter(None, text.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"parameter {item!r} is not key=value")
        params[key.strip()] = value.strip()
    return params


def build_graph(spec: str, seed: int = 0) -> GraphInstance:
    """``family:key=value,...`` or a path to a graph file.

    Families: ``complete:n=`` (ids permuted by the seed), ``lb:n=``,
    ``twocliques:n=``, ``random:n=[,p=][,attempts=]``.  A ``seed=`` parameter
    overrides the ``seed`` argument.
    """
    family, sep, rest = spec.partition(":")
    if not sep or family not in FAMILIES:
        path = Path(spec)
        if not path.exists():
            raise GraphError(f"{spec!r} is neither a graph family nor an existing file")
        g, ann = pg.load(path)
        return GraphInstance(path.name, g, ann)
    params = _parse_params(rest)
    known = {"n", "seed", "p", "attempts"}
    if unknown := set(params) - known:
        raise ValueError(f"unknown parameter(s) {sorted(unknown)} for {family}")
    if "n" not in params:
        raise ValueError(f"{family} needs n=")
    n = int(params["n"])
    seed = int(params.get("seed", seed))
    label = f"{family}:n={n},seed={seed}"
    if family == "complete":
        return GraphInstance(label, pg.make_complete(n, id_seed=seed))
    if family == "lb":
        g, ann = pg.make_lower_bound(n, seed)
        return GraphInstance(label, g, ann)
    if family == "twocliques":
        return GraphInstance(label, pg.make_two_cliques(n, seed))
    p = float(params.get("p", pg.default_edge_prob(n)))
    attempts = int(params.get("attempts", 1000))
    return GraphInstance(f"{label},p={p}", pg.make_random_diam2(n, p, seed, attempts))


def graph_instances(spec: str, seed: int, count: int = 1) -> list[GraphInstance]:
    """``count`` instances of a family, instance ``i`` generated from ``derive_seed(seed, "graph", i)``."""
    if count < 1:
        raise ValueError("graph count must be at least 1")
    if count == 1:
        return [build_graph(spec, seed)]
    if spec.partition(":")[0] not in FAMILIES:
        raise ValueError("a graph file is a single instance; --graph-count must be 1")
    return [build_graph(spec, derive_seed(seed, "graph", i)) for i in range(count)]


# ---------------------------------------------------------------- sweeps


@dataclass
class ExperimentSpec:
    graph: str
    protocol: str = "rand-local"
    trials: int = 100
    seed: int = 0
    congest: bool = True
    graph_count: int = 1
    out: str | None = None
    traces: str | None = None

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


@dataclass
class SummaryRow:
    graph: str
    n: int
    m: int
    protocol: str
    trials: int
    failures: int = 0
    violations: int = 0
    mean_messages: float = 0.0
    max_messages: int = 0
    mean_rounds: float = 0.0
    max_rounds: int = 0
    max_round_messages: int = 0
    mean_candidates: float | None = None
    bridge_crossings: int | None = None
    zero_crossing_valid: int | None = None
    expected_candidates: float | None = None
    lower_bound_formula: float | None = None
    lagrangian_min: float | None = None
    message_bound_whp: float | None = None
    failure_bound: float | None = None
    expected_message_upper: float | None = None
    per_bucket_whp: float | None = None
    det_per_round: int | None = None


SUMMARY_COLUMNS = [f.name for f in fields(SummaryRow)]


@dataclass
class TrialCheck:
    """Hard invariants of a single run; any entry in ``problems`` is a violation."""

    problems: list[str] = field(default_factory=list)

    def require(self, ok: bool, what: str) -> None:
        if not ok:
            self.problems.append(what)


def check_trial(t: Trace) -> TrialCheck:
    g = t.graph
    chk = TrialCheck()
    chk.require(t.terminated, "run did not terminate")
    key = t.protocol
    info = t.info
    if key in ("rand-local", "rand-known-n"):
        if info["candidate_count"]:
            chk.require(t.outcome.valid, "candidates existed but the outcome is invalid")
            chk.require(t.outcome.leader == info["min_candidate"], "leader is not the minimum-id candidate")
        else:
            chk.require(not t.outcome.elected, "someone was elected without candidates")
    elif key == "det":
        _check_det(chk, t, g, info)
    elif key.startswith("reduce+"):
        n = g.n
        chk.require(info["removed_edges"] <= n - 1, "more than n-1 edges removed")
        chk.require(info["candidate_count"] <= 2, "more than two reduction candidates")
        chk.require(sum(t.per_round_counts[:3]) <= 3 * n, "handshake used more than 3n messages")
        if info["candidate_count"] == 0:
            chk.require(pg.check_neighborhood_intersection(info["surviving_graph"]), "surviving graph lost diameter two")
        if key == "reduce+det" or info["candidate_count"]:
            chk.require(t.outcome.valid, "reduction produced no unique leader")
    return chk


def _check_det(chk: TrialCheck, t: Trace, g: PortGraph, info: dict) -> None:
    n = g.n
    K = phase_count(n)
    chk.require(t.outcome.valid, "deterministic run produced no unique leader")
    if t.outcome.valid:
        chk.require(g.ids[t.outcome.leader] == max(g.ids), "leader is not the maximum id")
    chk.require(t.max_round_messages <= 3 * n, "a round carried more than 3n messages")
    chk.require(t.steps <= 2 * K + 1, "more than 2*ceil(log2 n)+1 rounds")
    for i, a in enumerate(info["active_per_phase"], start=1):
        chk.require(a <= n / 2**i, f"{a} active nodes after phase {i} exceeds n/2^{i}")
    chk.require(info["L_monotone"], "some L decreased")


@dataclass
class SweepResult:
    rows: list[SummaryRow]
    problems: list[str]

    @property
    def ok(self) -> bool:
        return not self.problems


def run_instance(
    inst: GraphInstance,
    protocol_key: str,
    trials: int,
    seed: int,
    congest: bool = True,
    trace_sink: io.TextIOBase | None = None,
) -> tuple[SummaryRow, list[str]]:
    g = inst.graph
    protocol = get_protocol(protocol_key)
    row = SummaryRow(inst.label, g.n, g.m, protocol.key, trials)
    problems: list[str] = []
    msgs = rounds = 0
    cands = 0
    crossings = zero_valid = 0
    sampled = protocol.key in ("rand-local", "rand-known-n")
    for i in range(trials):
        s = trial_seed(seed, i)
        t = run_sync(g, protocol, seed=s, enforce_congest=congest, record=trace_sink is not None, annotation=inst.annotation)
        chk = check_trial(t)
        if chk.problems:
            row.violations += 1
            problems.extend(f"{inst.label} trial {i}: {p}" for p in chk.problems)
        if not t.outcome.valid:
            row.failures += 1
        msgs += t.total_messages
        rounds += t.rounds
        row.max_messages = max(row.max_messages, t.total_messages)
        row.max_rounds = max(row.max_rounds, t.rounds)
        row.max_round_messages = max(row.max_round_messages, t.max_round_messages)
        if sampled:
            cands += t.info["candidate_count"]
        if inst.annotation is not None:
            crossings += t.bridge_crossings
            zero_valid += t.bridge_crossings == 0 and t.outcome.valid
        if trace_sink is not None:
            trace_sink.write(_json_header(inst.label, protocol.key, i, s))
            t.write_jsonl(trace_sink)
    row.mean_messages = msgs / trials
    row.mean_rounds = rounds / trials
    if sampled:
        row.mean_candidates = cands / trials
    if inst.annotation is not None:
        row.bridge_crossings = crossings
        row.zero_crossing_valid = zero_valid
        if zero_valid:
            problems.append(f"{inst.label}: {zero_valid} valid run(s) without a bridge crossing")
    if all(d >= 1 for d in g.degrees):
        for k, v in bound_report(g).as_dict().items():
            setattr(row, k, v)
    return row, problems


def _json_header(label: str, key: str, trial: int, seed: int) -> str:
    return json.dumps({"graph": label, "protocol": key, "trial": trial, "seed": seed}, sort_keys=True) + "\n"


def run_experiment(spec: ExperimentSpec) -> SweepResult:
    instances = graph_instances(spec.graph, spec.seed, spec.graph_count)
    rows: list[SummaryRow] = []
    problems: list[str] = []
    sink = open(spec.traces, "w", encoding="utf-8", newline="\n") if spec.traces else None
    try:
        for inst in instances:
            row, probs = run_instance(inst, spec.protocol, spec.trials, spec.seed, spec.congest, sink)
            rows.append(row)
            problems.extend(probs)
    finally:
        if sink is not None:
            sink.close()
    return SweepResult(rows, problems)


# ---------------------------------------------------------------- CSV


def _cell(x: object) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def format_summary(rows: Iterable[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for row in rows:
        d = asdict(row)
        w.writerow([_cell(d[c]) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def read_summary(text: str) -> list[dict[str, str]]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return []
    missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise ValueError(f"summary is missing column(s): {', '.join(missing)}")
    return list(reader)


REQUIRED_COLUMNS = (
    "graph",
    "n",
    "protocol",
    "trials",
    "failures",
    "violations",
    "mean_messages",
    "max_messages",
    "max_round_messages",
    "expected_candidates",
    "lower_bound_formula",
    "message_bound_whp",
    "failure_bound",
    "expected_message_upper",
    "det_per_round",
)


# ---------------------------------------------------------------- verification


@dataclass(frozen=True)
class Check:
    row: str
    name: str
    measured: float
    bound: float
    passed: bool

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict}  {self.row}  {self.name}: measured {self.measured:g} vs bound {self.bound:g}"


def _num(x: str) -> float | None:
    return float(x) if x not in ("", None) else None


def verify_rows(rows: Sequence[dict[str, str]]) -> list[Check]:
    """Bound checks for every summary row; raises on an empty input."""
    if not rows:
        raise ValueError("no summary rows to verify")
    out: list[Check] = []
    for r in rows:
        label = f"{r['protocol']} on {r['graph']}"
        n = int(r["n"])
        trials = int(r["trials"])
        failures = int(r["failures"])
        key = r["protocol"]
        out.append(Check(label, "failures <= trials", failures, trials, failures <= trials))
        out.append(Check(label, "hard invariant violations", int(r["violations"]), 0, int(r["violations"]) == 0))
        if key in ("rand-local", "rand-known-n"):
            whp = _num(r["message_bound_whp"])
            if whp is not None:
                mx = float(r["max_messages"])
                out.append(Check(label, "max messages <= 54 n log2^3 n", mx, whp, mx <= whp))
        if key == "rand-local":
            exp_up = _num(r["expected_message_upper"])
            if exp_up is not None:
                mean = float(r["mean_messages"])
                out.append(Check(label, "mean messages <= 1.2 (2n + 2n log2 n)", mean, 1.2 * exp_up, mean <= 1.2 * exp_up))
            fb = _num(r["failure_bound"])
            if fb is not None:
                rate = failures / trials
                out.append(Check(label, "failure rate <= 2 n^(-1/3)", rate, 2 * fb, rate <= 2 * fb))
            ec, lb = _num(r["expected_candidates"]), _num(r["lower_bound_formula"])
            if ec is not None and lb is not None and n >= 3:
                out.append(Check(label, "E[X] > 2 + log2(n)/2", ec, lb, ec > lb))
        if key == "det":
            out.append(Check(label, "failures", failures, 0, failures == 0))
            mr = float(r["max_round_messages"])
            cap = _num(r["det_per_round"]) or 3 * n
            out.append(Check(label, "per-round messages <= 3n", mr, cap, mr <= cap))
            steps_cap = 2 * phase_count(n) + 1
            if r.get("max_rounds"):
                mxr = int(r["max_rounds"])
                out.append(Check(label, "rounds <= 2 ceil(log2 n) + 1", mxr, steps_cap, mxr <= steps_cap))
    return out
