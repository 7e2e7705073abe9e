import numpy as np
import pytest

from factgraph.errors import KindMismatch, UnassignedNode, UnknownNode
from factgraph.graph import (
    FactualityLabel,
    InfoGraph,
    NodeId,
    NodeKind,
    Partition,
    Relation,
    SplitSpec,
    dumps_canonical,
    validate_splits,
)


def make_graph(n_sources=2, n_articles=8, n_users=6, dim=4):
    g = InfoGraph(user_dim=dim, content_dim=dim)
    rng = np.random.default_rng(0)
    for i in range(n_sources):
        g.add_source(rng.normal(size=dim), FactualityLabel(i % 3), metadata={"name": f"s{i}"})
    for _ in range(n_articles):
        g.add_article(rng.normal(size=dim))
    for i in range(n_users):
        g.add_user(rng.normal(size=dim), follower_count=10 * i)
    return g


def u(i):
    return NodeId(NodeKind.USER, i)


def a(i):
    return NodeId(NodeKind.ARTICLE, i)


def s(i):
    return NodeId(NodeKind.SOURCE, i)


def test_add_edge_inserts_once():
    g = make_graph()
    assert g.add_edge(u(3), a(7), Relation.PROPAGATES) is True
    assert g.edge_count == 1


def test_add_edge_duplicate_is_noop():
    g = make_graph()
    assert g.add_edge(u(3), a(7), Relation.PROPAGATES) is True
    assert g.add_edge(u(3), a(7), Relation.PROPAGATES) is False
    assert g.edge_count == 1


def test_add_edge_kind_mismatch():
    g = make_graph()
    with pytest.raises(KindMismatch):
        g.add_edge(s(0), u(2), Relation.PROPAGATES)


def test_add_edge_unknown_node():
    g = make_graph()
    with pytest.raises(UnknownNode):
        g.add_edge(u(99), a(0), Relation.PROPAGATES)


def test_neighbors_bidirectional():
    g = make_graph()
    g.add_edge(u(3), a(7), Relation.PROPAGATES)
    assert g.neighbors(a(7), Relation.PROPAGATES) == [u(3)]
    assert g.neighbors(u(3), Relation.PROPAGATES) == [a(7)]


def test_neighbors_isolated_empty():
    g = make_graph()
    assert g.neighbors(u(0)) == []


def test_neighbors_star_sorted():
    # 3-edge star around u0: enumerated by hand, expects kind-then-index order
    g = make_graph()
    g.add_edge(u(0), a(5), Relation.PROPAGATES)
    g.add_edge(u(0), s(1), Relation.FOLLOWS_SOURCE)
    g.add_edge(u(0), u(4), Relation.FOLLOWS_USER)
    assert g.neighbors(u(0)) == [s(1), a(5), u(4)]


def test_edge_type_closure():
    g = make_graph()
    g.add_edge(u(1), s(0), Relation.FOLLOWS_SOURCE)
    g.add_edge(s(0), a(0), Relation.PUBLISHES)
    from factgraph.graph import RELATION_SIGNATURES

    for src, dst, rel in g.edges():
        assert (src.kind, dst.kind) == RELATION_SIGNATURES[rel]


def test_insert_lookup_round_trip():
    g = make_graph()
    for src, dst, rel in [
        (u(0), u(1), Relation.FOLLOWS_USER),
        (u(2), a(3), Relation.PROPAGATES),
        (s(1), a(2), Relation.PUBLISHES),
    ]:
        g.add_edge(src, dst, rel)
        assert src in g.neighbors(dst, rel)
        assert dst in g.neighbors(src, rel)


def make_split(g, assign):
    part = {}
    for node in g.nodes():
        part[node] = assign.get(node, Partition.TRAIN)
    return SplitSpec(part)


def test_validate_splits_flags_cross_event_edge():
    g = make_graph()
    g.add_edge(u(0), u(1), Relation.FOLLOWS_USER)
    splits = make_split(g, {u(0): Partition.TRAIN, u(1): Partition.E1_1})
    violations = validate_splits(g, splits)
    assert violations == [(u(0), u(1), Relation.FOLLOWS_USER)]


def test_validate_splits_allows_same_event_halves():
    g = make_graph()
    g.add_edge(u(0), u(1), Relation.FOLLOWS_USER)
    splits = make_split(g, {u(0): Partition.E1_1, u(1): Partition.E1_2})
    assert validate_splits(g, splits) == []


def test_validate_splits_clean_graph():
    g = make_graph()
    g.add_edge(u(0), u(1), Relation.FOLLOWS_USER)
    splits = make_split(g, {})
    assert validate_splits(g, splits) == []


def test_validate_splits_unassigned_node():
    g = make_graph()
    splits = SplitSpec({u(0): Partition.TRAIN})
    with pytest.raises(UnassignedNode):
        validate_splits(g, splits)


def test_serialization_round_trip():
    g = make_graph()
    g.metadata[u(0)] = {"bio": "hello"}
    g.add_edge(u(0), a(1), Relation.PROPAGATES)
    g.add_edge(s(0), a(1), Relation.PUBLISHES)
    splits = make_split(g, {u(0): Partition.E2_1, a(1): Partition.E2_2, s(0): Partition.E2_1})
    doc = g.to_json_dict(splits)
    g2, splits2 = InfoGraph.from_json_dict(doc)
    assert g.structurally_equal(g2)
    assert splits2.partition == splits.partition
    assert dumps_canonical(g.to_json_dict(splits)) == dumps_canonical(g2.to_json_dict(splits2))


def test_copy_is_independent():
    g = make_graph()
    g.add_edge(u(0), a(0), Relation.PROPAGATES)
    g2 = g.copy()
    g2.add_edge(u(1), a(0), Relation.PROPAGATES)
    assert g.edge_count == 1
    assert g2.edge_count == 2
    assert g.structurally_equal(g.copy())


def test_copy_drop_edges():
    g = make_graph()
    g.add_edge(u(0), a(0), Relation.PROPAGATES)
    g.add_edge(u(1), a(0), Relation.PROPAGATES)
    g2 = g.copy(drop_edges={(u(0), a(0), Relation.PROPAGATES)})
    assert g2.edge_count == 1
    assert not g2.has_edge(u(0), a(0), Relation.PROPAGATES)
    assert g2.neighbors(a(0), Relation.PROPAGATES) == [u(1)]


def test_label_order():
    assert FactualityLabel.LOW < FactualityLabel.MIXED < FactualityLabel.HIGH
    assert [l.json_name for l in FactualityLabel] == ["low", "mixed", "high"]
