import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diam2le.portgraph import GraphError, PortGraph, check_neighborhood_intersection, diameter, make_complete
from diam2le.protocols import deterministic_le, get_protocol, randomized_local_le, sparsify_and_elect
from diam2le.simcore import Kind, Status, run_sync


def check_reduction(g, t):
    n = g.n
    info = t.info
    assert info["removed_edges"] <= n - 1
    assert info["candidate_count"] <= 2
    assert sum(t.per_round_counts[:3]) <= 3 * n
    assert t.per_round_counts[0] == n and t.per_round_counts[1] == n
    assert t.per_round_counts[2] == info["removed_edges"]
    h = info["surviving_graph"]
    assert h.m == g.m - info["removed_edges"]
    # each node initiates at most one drop, over the port it asked on
    assert len({m.src for m in t.batches[2]}) == len(t.batches[2])
    assert all(m.src_port == 0 for m in t.batches[2])
    if info["candidate_count"] == 0:
        assert diameter(h) == 2
        assert check_neighborhood_intersection(h)
    else:
        assert not info["ran_inner"]
        winner = max(info["candidates"], key=lambda v: g.ids[v])
        assert t.outcome.valid and t.outcome.leader == winner


def test_rejects_non_complete_and_tiny():
    path = PortGraph.from_edges(3, [(0, 1), (1, 2)])
    with pytest.raises(GraphError):
        run_sync(path, sparsify_and_elect(deterministic_le()))
    with pytest.raises(GraphError):
        run_sync(make_complete(2), sparsify_and_elect(deterministic_le()))


def test_k6_with_deterministic_inner():
    for seed in range(20):
        g = make_complete(6, id_seed=seed)
        t = run_sync(g, sparsify_and_elect(deterministic_le()), seed=seed)
        check_reduction(g, t)
        assert t.outcome.valid


def test_two_candidates_across_a_removed_edge():
    # ids w=1 < u=2 < v=3 < x=4 at nodes 0..3; first ports: u->v, w->u, v->x, x->w
    g = PortGraph.from_neighbor_lists([[1, 2, 3], [2, 0, 3], [3, 0, 1], [0, 1, 2]], [1, 2, 3, 4])
    t = run_sync(g, get_protocol("reduce+det"))
    info = t.info
    assert info["candidates"] == [1, 2]
    h = info["surviving_graph"]
    assert not h.has_edge(1, 2)  # the two candidates cannot hear each other over G'
    # the announcement goes over every original port, so both still agree
    assert t.outcome.valid and t.outcome.leader == 2
    assert t.per_round_counts[3] == 2 * 3


def test_ascending_ports_leave_only_node_zero_as_candidate():
    for n in (5, 8, 13):
        for seed in range(30):
            g = make_complete(n, id_seed=seed)
            info = run_sync(g, sparsify_and_elect(deterministic_le())).info
            assert set(info["candidates"]) <= {0}


@settings(max_examples=80, deadline=None)
@given(st.integers(3, 24), st.integers(0, 2**32))
def test_shuffled_ports_property(n, seed):
    g = make_complete(n, id_seed=seed, shuffle_ports=True)
    t = run_sync(g, sparsify_and_elect(deterministic_le()))
    check_reduction(g, t)
    assert t.outcome.valid


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 24), st.integers(0, 2**32))
def test_randomized_inner(n, seed):
    g = make_complete(n, id_seed=seed, shuffle_ports=True)
    t = run_sync(g, sparsify_and_elect(randomized_local_le()), seed=seed)
    check_reduction(g, t)
    inner = t.info.get("inner")
    if inner is not None and inner["candidate_count"]:
        assert t.outcome.valid
        assert t.outcome.leader == inner["min_candidate"]


def test_handshake_kinds():
    g = make_complete(10, id_seed=3, shuffle_ports=True)
    t = run_sync(g, get_protocol("reduce+det"))
    kinds = [{m.kind for m in b} for b in t.batches[:3]]
    assert kinds[0] == {Kind.ASK} and kinds[1] == {Kind.REPLY}
    assert kinds[2] <= {Kind.DROP}
    for m in t.batches[2]:
        assert g.ids[m.dst] > g.ids[m.src]


def test_inner_runs_on_surviving_ports_only():
    g = make_complete(12, id_seed=5, shuffle_ports=True)
    t = run_sync(g, get_protocol("reduce+det"))
    if not t.info["ran_inner"]:
        pytest.skip("this instance had candidates")
    h = t.info["surviving_graph"]
    for batch in t.batches[4:]:
        for m in batch:
            assert h.has_edge(m.src, m.dst)


def test_round_limit_and_keys():
    p = get_protocol("reduce+det")
    assert p.key == "reduce+det"
    assert p.round_limit(64) == 4 + 2 * 6 + 1
    with pytest.raises(KeyError):
        get_protocol("reduce+reduce+det")
    with pytest.raises(KeyError):
        get_protocol("reduce+nope")


def test_all_statuses_decided():
    for n in (3, 4, 7, 16, 33):
        g = make_complete(n, id_seed=n, shuffle_ports=True)
        t = run_sync(g, get_protocol("reduce+det"))
        assert t.terminated
        assert Status.UNDECIDED not in t.outcome.statuses
        assert t.steps <= 4 + 2 * math.ceil(math.log2(n)) + 1
