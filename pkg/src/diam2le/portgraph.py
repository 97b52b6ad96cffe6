"""Port-numbered undirected graphs and the generators used by the experiments.

Every node owns an ordered list of ports.  Port ``p`` of node ``v`` holds the
pair ``(u, q)``: the neighbour reached through that port and the port index at
which the same edge arrives at ``u``.  Ports are 0-based throughout; the
"first neighbour" of a node is the one behind port 0.
"""
from __future__ import annotations

import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

FORMAT_TAG = "portgraph/1"

Port = tuple[int, int]


class GraphError(ValueError):
    """Invalid graph structure or generator parameters."""


class PortSymmetryError(GraphError):
    pass


class GraphFormatError(GraphError):
    """Malformed serialized graph."""


class GenerationError(RuntimeError):
    """A rejection sampler ran out of attempts."""


@dataclass(frozen=True, eq=True)
class PortGraph:
    ids: tuple[int, ...]
    ports: tuple[tuple[Port, ...], ...]

    def __post_init__(self) -> None:
        if len(self.ids) != len(self.ports):
            raise GraphError("ids and ports disagree on node count")
        if len(set(self.ids)) != len(self.ids):
            raise GraphError("node ids are not distinct")
        n = len(self.ports)
        for v, plist in enumerate(self.ports):
            seen = set()
            for p, (u, q) in enumerate(plist):
                if not 0 <= u < n:
                    raise GraphError(f"node {v} port {p} points at missing node {u}")
                if u == v:
                    raise GraphError(f"self-loop at node {v}")
                if u in seen:
                    raise GraphError(f"duplicate edge {v}-{u}")
                seen.add(u)
                back = self.ports[u]
                if not 0 <= q < len(back) or back[q] != (v, p):
                    raise PortSymmetryError(
                        f"port {p} of node {v} maps to ({u}, {q}) but the reverse entry does not match"
                    )

    @classmethod
    def from_neighbor_lists(cls, neighbors: Sequence[Sequence[int]], ids: Sequence[int]) -> PortGraph:
        """Build a graph whose port order at each node follows ``neighbors[v]``."""
        position = [{u: p for p, u in enumerate(nbrs)} for nbrs in neighbors]
        ports = []
        for v, nbrs in enumerate(neighbors):
            try:
                ports.append(tuple((u, position[u][v]) for u in nbrs))
            except KeyError as exc:
                raise GraphError(f"edge at node {v} is not listed at node {exc.args[0]}") from None
        return cls(tuple(int(i) for i in ids), tuple(ports))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], ids: Sequence[int] | None = None) -> PortGraph:
        """Ports ordered by ascending neighbour index."""
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            nbrs[u].add(v)
            nbrs[v].add(u)
        if ids is None:
            ids = range(1, n + 1)
        return cls.from_neighbor_lists([sorted(s) for s in nbrs], ids)

    @property
    def n(self) -> int:
        return len(self.ports)

    @cached_property
    def m(self) -> int:
        return sum(len(p) for p in self.ports) // 2

    def degree(self, v: int) -> int:
        return len(self.ports[v])

    @cached_property
    def degrees(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.ports)

    def neighbors(self, v: int) -> list[int]:
        return [u for u, _ in self.ports[v]]

    def edges(self) -> list[tuple[int, int, int, int]]:
        """Each edge once as ``(u, port_u, v, port_v)`` with ``u < v``, sorted."""
        out = []
        for u, plist in enumerate(self.ports):
            for p, (v, q) in enumerate(plist):
                if u < v:
                    out.append((u, p, v, q))
        return out

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=bool)
        for v, plist in enumerate(self.ports):
            for u, _ in plist:
                a[v, u] = True
        a.flags.writeable = False
        return a

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adjacency[u, v])


@dataclass(frozen=True)
class BridgeAnnotation:
    """Bookkeeping for the two-clique lower-bound gadget.

    ``bridges[i]`` joins ``clique1[i]`` with ``clique2[i]``.
    """

    clique1: tuple[int, ...]
    clique2: tuple[int, ...]
    matching1: tuple[tuple[int, int], ...]
    matching2: tuple[tuple[int, int], ...]
    bridges: tuple[tuple[int, int], ...]

    @cached_property
    def bridge_set(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset(b) for b in self.bridges)

    def to_dict(self) -> dict:
        return {
            "clique1": list(self.clique1),
            "clique2": list(self.clique2),
            "matching1": [list(e) for e in self.matching1],
            "matching2": [list(e) for e in self.matching2],
            "bridges": [list(e) for e in self.bridges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> BridgeAnnotation:
        try:
            return cls(
                tuple(d["clique1"]),
                tuple(d["clique2"]),
                tuple(tuple(e) for e in d["matching1"]),
                tuple(tuple(e) for e in d["matching2"]),
                tuple(tuple(e) for e in d["bridges"]),
            )
        except (KeyError, TypeError) as exc:
            raise GraphFormatError(f"bad bridge annotation: {exc}") from None


@dataclass(frozen=True)
class DegreeBuckets:
    k: int
    buckets: dict[int, frozenset[int]] = field(default_factory=dict)

    def size(self, j: int) -> int:
        return len(self.buckets.get(j, ()))


def bucket_index(d: int) -> int:
    """Smallest ``j`` with ``d <= 2**j``, so that ``2**(j-1) < d <= 2**j``."""
    if d < 1:
        raise GraphError("degree-0 node has no bucket")
    return (d - 1).bit_length()


def degree_buckets(g: PortGraph) -> DegreeBuckets:
    buckets: dict[int, set[int]] = {}
    for v, d in enumerate(g.degrees):
        if d == 0:
            raise GraphError(f"node {v} is isolated")
        buckets.setdefault(bucket_index(d), set()).add(v)
    k = max(g.n - 1, 0).bit_length()
    return DegreeBuckets(k, {j: frozenset(s) for j, s in sorted(buckets.items())})


def _random_ids(rng: np.random.Generator, n: int) -> tuple[int, ...]:
    return tuple(int(x) + 1 for x in rng.permutation(n))


def make_complete(n: int, id_seed: int = 0, shuffle_ports: bool = False) -> PortGraph:
    """Complete graph ``K_n`` with a random permutation of ``1..n`` as ids.

    Ports are in ascending neighbour order unless ``shuffle_ports`` is set.
    """
    if n < 1:
        raise GraphError("n must be positive")
    rng = np.random.default_rng(id_seed)
    ids = _random_ids(rng, n)
    nbrs = []
    for v in range(n):
        row = [u for u in range(n) if u != v]
        if shuffle_ports:
            row = [row[i] for i in rng.permutation(len(row))]
        nbrs.append(row)
    return PortGraph.from_neighbor_lists(nbrs, ids)


def _random_perfect_matching(rng: np.random.Generator, nodes: Sequence[int]) -> list[tuple[int, int]]:
    order = [nodes[i] for i in rng.permutation(len(nodes))]
    return [tuple(sorted(order[i : i + 2])) for i in range(0, len(order), 2)]


def _check_lower_bound_n(n: int) -> None:
    if n < 8 or n % 4:
        raise GraphError(f"lower-bound gadget needs n divisible by 4 and n >= 8, got {n}")


def make_two_cliques(n: int, seed: int = 0) -> PortGraph:
    """The disjoint pair of ``n/2``-cliques that the gadget is carved from.

    Uses the same ids as ``make_lower_bound(n, seed)``; nodes ``0..n/2-1`` form
    the first clique and ``n/2..n-1`` the second, ports ascending.
    """
    _check_lower_bound_n(n)
    ids = _random_ids(np.random.default_rng(seed), n)
    half = n // 2
    nbrs = []
    for v in range(n):
        base = 0 if v < half else half
        nbrs.append([u for u in range(base, base + half) if u != v])
    return PortGraph.from_neighbor_lists(nbrs, ids)


def make_lower_bound(n: int, seed: int = 0) -> tuple[PortGraph, BridgeAnnotation]:
    """Two ``n/2``-cliques joined by ``n/2`` bridges, diameter two, ``(n/2 - 1)``-regular.

    A random perfect matching is removed from each clique (the second one
    avoiding the mirror image of the first) and every bridge ``(u_i, v_i)`` is
    wired into the two ports those removals freed.  All other ports keep the
    numbering of ``make_two_cliques(n, seed)``.
    """
    g0 = make_two_cliques(n, seed)
    rng = np.random.default_rng(seed)
    rng.permutation(n)  # consumed by the id draw in make_two_cliques
    half = n // 2
    c1 = tuple(range(half))
    c2 = tuple(range(half, n))
    m1 = _random_perfect_matching(rng, c1)
    mirror = {(a + half, b + half) for a, b in m1}
    while True:
        m2 = _random_perfect_matching(rng, c2)
        if not mirror.intersection(m2):
            break

    partner = {}
    for a, b in m1 + m2:
        partner[a] = b
        partner[b] = a
    ports = [list(p) for p in g0.ports]
    for v in range(n):
        bridge_end = v + half if v < half else v - half
        for p, (u, _) in enumerate(ports[v]):
            if u == partner[v]:
                freed = p
                break
        ports[v][freed] = (bridge_end, None)
    # Resolve reciprocal ports now that both ends of every bridge are placed.
    for v in range(n):
        for p, (u, q) in enumerate(ports[v]):
            if q is None:
                back = next(i for i, (w, _) in enumerate(ports[u]) if w == v)
                ports[v][p] = (u, back)
    g = PortGraph(g0.ids, tuple(tuple(p) for p in ports))
    ann = BridgeAnnotation(
        clique1=c1,
        clique2=c2,
        matching1=tuple(sorted(m1)),
        matching2=tuple(sorted(m2)),
        bridges=tuple((c1[i], c2[i]) for i in range(half)),
    )
    return g, ann


def check_neighborhood_intersection(g: PortGraph) -> bool:
    """True iff every non-adjacent pair of distinct nodes has a common neighbour."""
    if g.n <= 1:
        return True
    a = g.adjacency.astype(np.float32)
    common = a @ a
    ok = g.adjacency | (common > 0)
    np.fill_diagonal(ok, True)
    return bool(ok.all())


def diameter(g: PortGraph) -> float:
    """Largest eccentricity by BFS from every node; ``math.inf`` if disconnected."""
    if g.n <= 1:
        return 0
    rows, cols = np.nonzero(g.adjacency)
    mat = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(g.n, g.n))
    dist = shortest_path(mat, unweighted=True, directed=False)
    worst = dist.max()
    return math.inf if math.isinf(worst) else int(worst)


def make_random_diam2(n: int, edge_prob: float, seed: int = 0, max_attempts: int = 1000) -> PortGraph:
    """Erdős–Rényi ``G(n, p)`` resampled until its diameter is exactly two."""
    if n < 3:
        raise GraphError("a diameter-two graph needs at least 3 nodes")
    if not 0 < edge_prob < 1:
        raise GraphError("edge_prob must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, k=1)
    for _ in range(max_attempts):
        mask = rng.random(len(iu[0])) < edge_prob
        a = np.zeros((n, n), dtype=bool)
        a[iu[0][mask], iu[1][mask]] = True
        a |= a.T
        if a.sum() == n * (n - 1):
            continue
        common = a.astype(np.float32) @ a.astype(np.float32)
        ok = a | (common > 0)
        np.fill_diagonal(ok, True)
        if ok.all():
            ids = _random_ids(rng, n)
            return PortGraph.from_neighbor_lists([np.flatnonzero(row).tolist() for row in a], ids)
    raise GenerationError(
        f"no diameter-two graph after {max_attempts} attempts (n={n}, p={edge_prob})"
    )


def default_edge_prob(n: int) -> float:
    """An edge probability comfortably above the diameter-two threshold of ``G(n, p)``."""
    return min(0.9, math.sqrt(4 * math.log(n) / n))


# -- serialization -----------------------------------------------------------


def to_dict(g: PortGraph, annotation: BridgeAnnotation | None = None) -> dict:
    d = {
        "format": FORMAT_TAG,
        "n": g.n,
        "ids": list(g.ids),
        "edges": [list(e) for e in g.edges()],
    }
    if annotation is not None:
        d["bridges"] = annotation.to_dict()
    return d


def serialize(g: PortGraph, annotation: BridgeAnnotation | None = None) -> str:
    """Canonical JSON text: sorted keys, no whitespace, trailing newline."""
    return json.dumps(to_dict(g, annotation), sort_keys=True, separators=(",", ":")) + "\n"


def from_dict(d: dict) -> tuple[PortGraph, BridgeAnnotation | None]:
    if not isinstance(d, dict) or d.get("format") != FORMAT_TAG:
        raise GraphFormatError(f"expected a {FORMAT_TAG!r} document")
    try:
        n = int(d["n"])
        ids = [int(i) for i in d["ids"]]
        edges = [tuple(int(x) for x in e) for e in d["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphFormatError(f"missing or malformed field: {exc}") from None
    if len(ids) != n:
        raise GraphFormatError("ids length does not match n")
    slots: list[dict[int, Port]] = [{} for _ in range(n)]
    for e in edges:
        if len(e) != 4:
            raise GraphFormatError(f"edge entry {list(e)} is not [u, port_u, v, port_v]")
        u, pu, v, pv = e
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"edge {list(e)} references a missing node")
        for a, pa, b, pb in ((u, pu, v, pv), (v, pv, u, pu)):
            if pa in slots[a]:
                raise PortSymmetryError(f"port {pa} of node {a} is claimed twice")
            slots[a][pa] = (b, pb)
    ports = []
    for v, s in enumerate(slots):
        if sorted(s) != list(range(len(s))):
            raise PortSymmetryError(f"ports of node {v} are not numbered 0..{len(s) - 1}")
        ports.append(tuple(s[p] for p in range(len(s))))
    g = PortGraph(tuple(ids), tuple(ports))
    ann = BridgeAnnotation.from_dict(d["bridges"]) if "bridges" in d else None
    if ann is not None:
        check_annotation(g, ann)
    return g, ann


def deserialize(text: str) -> tuple[PortGraph, BridgeAnnotation | None]:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"not JSON: {exc}") from None
    return from_dict(d)


def save(path, g: PortGraph, annotation: BridgeAnnotation | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(g, annotation))


def load(path) -> tuple[PortGraph, BridgeAnnotation | None]:
    with open(path, encoding="utf-8") as fh:
        return deserialize(fh.read())


def check_annotation(g: PortGraph, ann: BridgeAnnotation) -> None:
    """Raise unless ``ann`` describes a two-clique gadget laid over ``g``.

    The cliques must partition the nodes, every bridge must be an edge joining
    the two cliques (each node on exactly one bridge), and no matching edge
    may be present.
    """
    c1, c2 = set(ann.clique1), set(ann.clique2)
    if c1 & c2 or c1 | c2 != set(range(g.n)):
        raise GraphError("annotation cliques do not partition the nodes")
    ends: list[int] = []
    for u, v in ann.bridges:
        if not (0 <= u < g.n and 0 <= v < g.n) or not g.has_edge(u, v):
            raise GraphError(f"bridge ({u}, {v}) is not an edge of the graph")
        if (u in c1) == (v in c1):
            raise GraphError(f"bridge ({u}, {v}) does not join the two cliques")
        ends += (u, v)
    if sorted(ends) != list(range(g.n)):
        raise GraphError("bridges are not a perfect matching")
    for u, v in ann.matching1 + ann.matching2:
        if not (0 <= u < g.n and 0 <= v < g.n) or g.has_edge(u, v):
            raise GraphError(f"matching edge ({u}, {v}) is still present")
