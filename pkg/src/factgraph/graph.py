"""Heterogeneous information graph: sources, articles, users, typed edges.

The graph stores directed edges but every traversal (neighbors, message
passing) treats them as bidirectional. Inductive splits partition nodes into
a training block and two event blocks; no edge may cross blocks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum, IntEnum
from pathlib import Path

import numpy as np

from .errors import KindMismatch, UnassignedNode, UnknownNode, ValidationError


class NodeKind(IntEnum):
    SOURCE = 0
    ARTICLE = 1
    USER = 2

    @property
    def json_name(self) -> str:
        return self.name.lower()

    @staticmethod
    def from_json(name: str) -> "NodeKind":
        return NodeKind[name.upper()]


class FactualityLabel(IntEnum):
    """3-point reliability scale; the total order breaks ties toward LOW."""

    LOW = 0
    MIXED = 1
    HIGH = 2

    @property
    def json_name(self) -> str:
        return self.name.lower()

    @staticmethod
    def from_json(name: str) -> "FactualityLabel":
        return FactualityLabel[name.upper()]


class Relation(Enum):
    PUBLISHES = "publishes"
    FOLLOWS_SOURCE = "follows_source"
    FOLLOWS_USER = "follows_user"
    PROPAGATES = "propagates"
    INTERACT_UU = "interact_uu"
    INTERACT_UA = "interact_ua"
    INTERACT_AA = "interact_aa"
    INTERACT_US = "interact_us"


# (source kind, destination kind) allowed for each relation.
RELATION_SIGNATURES: dict[Relation, tuple[NodeKind, NodeKind]] = {
    Relation.PUBLISHES: (NodeKind.SOURCE, NodeKind.ARTICLE),
    Relation.FOLLOWS_SOURCE: (NodeKind.USER, NodeKind.SOURCE),
    Relation.FOLLOWS_USER: (NodeKind.USER, NodeKind.USER),
    Relation.PROPAGATES: (NodeKind.USER, NodeKind.ARTICLE),
    Relation.INTERACT_UU: (NodeKind.USER, NodeKind.USER),
    Relation.INTERACT_UA: (NodeKind.USER, NodeKind.ARTICLE),
    Relation.INTERACT_AA: (NodeKind.ARTICLE, NodeKind.ARTICLE),
    Relation.INTERACT_US: (NodeKind.USER, NodeKind.SOURCE),
}

INTERACTION_RELATIONS = frozenset(
    {Relation.INTERACT_UU, Relation.INTERACT_UA, Relation.INTERACT_AA, Relation.INTERACT_US}
)

SOCIAL_RELATIONS = frozenset(set(Relation) - INTERACTION_RELATIONS)


@dataclass(frozen=True, order=True)
class NodeId:
    kind: NodeKind
    index: int

    def key(self) -> str:
        return f"{self.kind.json_name}:{self.index}"

    @staticmethod
    def from_key(key: str) -> "NodeId":
        kind, idx = key.split(":")
        return NodeId(NodeKind.from_json(kind), int(idx))


def source(index: int) -> NodeId:
    return NodeId(NodeKind.SOURCE, index)


def article(index: int) -> NodeId:
    return NodeId(NodeKind.ARTICLE, index)


def user(index: int) -> NodeId:
    return NodeId(NodeKind.USER, index)


class Partition(Enum):
    TRAIN = "train"
    E1_1 = "e1_1"
    E1_2 = "e1_2"
    E2_1 = "e2_1"
    E2_2 = "e2_2"

    @property
    def event_group(self) -> str:
        """Connectivity block: edges may only join nodes of the same group."""
        if self is Partition.TRAIN:
            return "train"
        return self.value.split("_")[0]


EVAL_PARTITIONS = (Partition.E1_1, Partition.E1_2, Partition.E2_1, Partition.E2_2)


class InfoGraph:
    """Typed multigraph over sources, articles, and users.

    Nodes carry dense feature vectors (users use ``user_dim``, sources and
    articles share ``content_dim``). Edges are unique (src, dst, rel) triples
    validated against the relation signatures. Mutation requires exclusive
    access; reads are safe to share.
    """

    def __init__(self, user_dim: int = 32, content_dim: int = 32):
        if user_dim <= 0 or content_dim <= 0:
            raise ValidationError("feature dims must be positive")
        self.user_dim = user_dim
        self.content_dim = content_dim
        self._features: dict[NodeKind, list[np.ndarray]] = {k: [] for k in NodeKind}
        self.gold_labels: dict[NodeId, FactualityLabel] = {}
        self.follower_count: dict[NodeId, int] = {}
        self.metadata: dict[NodeId, dict] = {}
        self._edge_set: set[tuple[NodeId, NodeId, Relation]] = set()
        self._edges_by_rel: dict[Relation, list[tuple[NodeId, NodeId]]] = {r: [] for r in Relation}
        # node -> relation -> set of neighbors, maintained for both directions
        self._adj: dict[NodeId, dict[Relation, set[NodeId]]] = {}

    # -- nodes ---------------------------------------------------------------

    def node_count(self, kind: NodeKind) -> int:
        return len(self._features[kind])

    def has_node(self, n: NodeId) -> bool:
        return 0 <= n.index < self.node_count(n.kind)

    def nodes(self, kind: NodeKind | None = None):
        kinds = [kind] if kind is not None else list(NodeKind)
        for k in kinds:
            for i in range(self.node_count(k)):
                yield NodeId(k, i)

    def feature_dim(self, kind: NodeKind) -> int:
        return self.user_dim if kind is NodeKind.USER else self.content_dim

    def _add_node(self, kind: NodeKind, features, metadata) -> NodeId:
        vec = np.asarray(features, dtype=np.float64).reshape(-1)
        if vec.shape[0] != self.feature_dim(kind):
            raise ValidationError(
                f"{kind.json_name} feature dim {vec.shape[0]} != {self.feature_dim(kind)}"
            )
        if not np.all(np.isfinite(vec)):
            raise ValidationError("node features must be finite")
        node = NodeId(kind, self.node_count(kind))
        self._features[kind].append(vec)
        if metadata is not None:
            self.metadata[node] = dict(metadata)
        self._adj[node] = {}
        return node

    def add_source(self, features, label: FactualityLabel, metadata=None) -> NodeId:
        node = self._add_node(NodeKind.SOURCE, features, metadata)
        self.gold_labels[node] = FactualityLabel(label)
        return node

    def add_article(self, features, metadata=None) -> NodeId:
        return self._add_node(NodeKind.ARTICLE, features, metadata)

    def add_user(self, features, follower_count: int = 0, metadata=None) -> NodeId:
        if follower_count < 0:
            raise ValidationError("follower_count must be non-negative")
        node = self._add_node(NodeKind.USER, features, metadata)
        self.follower_count[node] = int(follower_count)
        return node

    def features(self, n: NodeId) -> np.ndarray:
        if not self.has_node(n):
            raise UnknownNode(n.key())
        return self._features[n.kind][n.index]

    def feature_matrix(self, kind: NodeKind) -> np.ndarray:
        rows = self._features[kind]
        if not rows:
            return np.zeros((0, self.feature_dim(kind)))
        return np.stack(rows)

    # -- edges ---------------------------------------------------------------

    def add_edge(self, src: NodeId, dst: NodeId, rel: Relation) -> bool:
        """Insert one typed edge. Returns False (no-op) for duplicates."""
        for n in (src, dst):
            if not self.has_node(n):
                raise UnknownNode(n.key())
        sig = RELATION_SIGNATURES[rel]
        if (src.kind, dst.kind) != sig:
            raise KindMismatch(
                f"{rel.value} expects {sig[0].json_name}->{sig[1].json_name}, "
                f"got {src.kind.json_name}->{dst.kind.json_name}"
            )
        triple = (src, dst, rel)
        if triple in self._edge_set:
            return False
        self._edge_set.add(triple)
        self._edges_by_rel[rel].append((src, dst))
        self._adj[src].setdefault(rel, set()).add(dst)
        self._adj[dst].setdefault(rel, set()).add(src)
        return True

    def has_edge(self, src: NodeId, dst: NodeId, rel: Relation) -> bool:
        return (src, dst, rel) in self._edge_set

    def edges(self):
        for rel in Relation:
            for src, dst in self._edges_by_rel[rel]:
                yield src, dst, rel

    def edges_of(self, rel: Relation) -> list[tuple[NodeId, NodeId]]:
        return list(self._edges_by_rel[rel])

    @property
    def edge_count(self) -> int:
        return len(self._edge_set)

    def count_edges(self, rels) -> int:
        return sum(len(self._edges_by_rel[r]) for r in rels)

    def neighbors(self, n: NodeId, rel: Relation | None = None) -> list[NodeId]:
        """Neighbors across both edge directions, sorted by (kind, index)."""
        if not self.has_node(n):
            raise UnknownNode(n.key())
        per_rel = self._adj.get(n, {})
        if rel is not None:
            found = per_rel.get(rel, set())
        else:
            found = set()
            for group in per_rel.values():
                found |= group
        return sorted(found)

    def degree(self, n: NodeId, rel: Relation | None = None) -> int:
        return len(self.neighbors(n, rel))

    # -- copying -------------------------------------------------------------

    def copy(self, drop_edges: set[tuple[NodeId, NodeId, Relation]] | None = None) -> "InfoGraph":
        """Structural copy. Feature vectors are shared (treated as immutable)."""
        g = InfoGraph(self.user_dim, self.content_dim)
        for kind in NodeKind:
            g._features[kind] = list(self._features[kind])
        g.gold_labels = dict(self.gold_labels)
        g.follower_count = dict(self.follower_count)
        g.metadata = {n: dict(m) for n, m in self.metadata.items()}
        g._adj = {n: {} for n in self._adj}
        dropped = drop_edges or set()
        for src, dst, rel in self.edges():
            if (src, dst, rel) in dropped:
                continue
            g._edge_set.add((src, dst, rel))
            g._edges_by_rel[rel].append((src, dst))
            g._adj[src].setdefault(rel, set()).add(dst)
            g._adj[dst].setdefault(rel, set()).add(src)
        return g

    # -- serialization -------------------------------------------------------

    def to_json_dict(self, splits: "SplitSpec | None" = None) -> dict:
        nodes = []
        for node in self.nodes():
            rec: dict = {
                "kind": node.kind.json_name,
                "index": node.index,
                "features": self.features(node).tolist(),
            }
            if node in self.gold_labels:
                rec["label"] = self.gold_labels[node].json_name
            if node in self.follower_count:
                rec["follower_count"] = self.follower_count[node]
            if node in self.metadata:
                rec["metadata"] = self.metadata[node]
            nodes.append(rec)
        edges = sorted(
            [s.kind.json_name, s.index, d.kind.json_name, d.index, r.value]
            for s, d, r in self.edges()
        )
        doc = {
            "config": {"user_dim": self.user_dim, "content_dim": self.content_dim},
            "nodes": nodes,
            "edges": edges,
        }
        if splits is not None:
            doc["splits"] = splits.to_json_dict()
        return doc

    @staticmethod
    def from_json_dict(doc: dict) -> tuple["InfoGraph", "SplitSpec | None"]:
        cfg = doc["config"]
        g = InfoGraph(user_dim=cfg["user_dim"], content_dim=cfg["content_dim"])
        recs = sorted(doc["nodes"], key=lambda r: (NodeKind.from_json(r["kind"]), r["index"]))
        for rec in recs:
            kind = NodeKind.from_json(rec["kind"])
            expected = NodeId(kind, g.node_count(kind))
            if rec["index"] != expected.index:
                raise ValidationError(f"non-contiguous node indices for kind {rec['kind']}")
            if kind is NodeKind.SOURCE:
                g.add_source(
                    rec["features"],
                    FactualityLabel.from_json(rec["label"]),
                    metadata=rec.get("metadata"),
                )
            elif kind is NodeKind.ARTICLE:
                g.add_article(rec["features"], metadata=rec.get("metadata"))
            else:
                g.add_user(
                    rec["features"],
                    follower_count=rec.get("follower_count", 0),
                    metadata=rec.get("metadata"),
                )
        for sk, si, dk, di, rel in doc["edges"]:
            g.add_edge(
                NodeId(NodeKind.from_json(sk), si),
                NodeId(NodeKind.from_json(dk), di),
                Relation(rel),
            )
        splits = SplitSpec.from_json_dict(doc["splits"]) if "splits" in doc else None
        return g, splits

    def structurally_equal(self, other: "InfoGraph") -> bool:
        if (self.user_dim, self.content_dim) != (other.user_dim, other.content_dim):
            return False
        for kind in NodeKind:
            if self.node_count(kind) != other.node_count(kind):
                return False
            a, b = self.feature_matrix(kind), other.feature_matrix(kind)
            if a.shape != b.shape or not np.array_equal(a, b):
                return False
        return (
            self._edge_set == other._edge_set
            and self.gold_labels == other.gold_labels
            and self.follower_count == other.follower_count
            and self.metadata == other.metadata
        )


class SplitSpec:
    """Assignment of every node to one inductive partition."""

    def __init__(self, partition: dict[NodeId, Partition]):
        self.partition = dict(partition)

    def of(self, n: NodeId) -> Partition:
        if n not in self.partition:
            raise UnassignedNode(n.key())
        return self.partition[n]

    def nodes_in(self, part: Partition) -> list[NodeId]:
        return sorted(n for n, p in self.partition.items() if p is part)

    def event_nodes(self, group: str) -> list[NodeId]:
        """All nodes whose partition lives in the given connectivity block."""
        return sorted(n for n, p in self.partition.items() if p.event_group == group)

    def to_json_dict(self) -> dict:
        return {n.key(): p.value for n, p in sorted(self.partition.items())}

    @staticmethod
    def from_json_dict(doc: dict) -> "SplitSpec":
        return SplitSpec({NodeId.from_key(k): Partition(v) for k, v in doc.items()})


def validate_splits(g: InfoGraph, s: SplitSpec) -> list[tuple[NodeId, NodeId, Relation]]:
    """Return every edge that crosses inductive blocks (empty = separation holds)."""
    for node in g.nodes():
        if node not in s.partition:
            raise UnassignedNode(node.key())
    violations = []
    for src, dst, rel in g.edges():
        if s.partition[src].event_group != s.partition[dst].event_group:
            violations.append((src, dst, rel))
    return violations


def dumps_canonical(doc: dict) -> str:
    """Deterministic JSON text (stable key order, compact separators)."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def save_graph(path, g: InfoGraph, splits: SplitSpec | None = None) -> None:
    Path(path).write_text(dumps_canonical(g.to_json_dict(splits)) + "\n", encoding="utf-8")


def load_graph(path) -> tuple[InfoGraph, SplitSpec | None]:
    return InfoGraph.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))
