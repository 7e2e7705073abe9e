"""Selecting focal user pairs for interaction.

Three criteria: uniform random, model confusion (least confident users
paired together), and the social-vs-factuality mismatch rule, which clusters
user embeddings and pairs each user whose derived label disagrees with its
cluster's majority label against a random same-cluster user that carries the
majority label.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .clustering import kmeans
from .errors import TooFewUsers, UndefinedForIsolatedUser, ValidationError
from .graph import FactualityLabel, InfoGraph, NodeId, NodeKind, Relation
from .rgcn import NodeEmbeddings


class LabelMode(Enum):
    PREDICTED = "predicted"
    GOLD = "gold"


class PairCriterion(Enum):
    RANDOM = "random"
    CONFUSION = "confusion"
    MISMATCH = "mismatch"


@dataclass(frozen=True)
class FocalPair:
    uj: NodeId
    uk: NodeId
    criterion: PairCriterion
    cluster_id: int | None = None

    def __post_init__(self):
        if self.uj == self.uk:
            raise ValidationError("focal pair must contain two distinct users")

    def to_json_dict(self) -> dict:
        doc = {"uj": self.uj.key(), "uk": self.uk.key(), "criterion": self.criterion.value}
        if self.cluster_id is not None:
            doc["cluster_id"] = self.cluster_id
        return doc

    @staticmethod
    def from_json_dict(doc: dict) -> "FocalPair":
        return FocalPair(
            NodeId.from_key(doc["uj"]),
            NodeId.from_key(doc["uk"]),
            PairCriterion(doc["criterion"]),
            doc.get("cluster_id"),
        )


def _majority_label(labels) -> FactualityLabel | None:
    """Most common label; ties break toward the lower (less factual) label."""
    labels = list(labels)
    if not labels:
        return None
    counts = np.zeros(3, dtype=int)
    for l in labels:
        counts[int(l)] += 1
    return FactualityLabel(int(counts.argmax()))


def _publisher_of(g: InfoGraph, art: NodeId) -> NodeId | None:
    pubs = g.neighbors(art, Relation.PUBLISHES)
    return pubs[0] if pubs else None


def _connected_items(g: InfoGraph, u: NodeId) -> list[NodeId]:
    """Sources and articles one hop away from the user, any relation."""
    return [n for n in g.neighbors(u) if n.kind in (NodeKind.SOURCE, NodeKind.ARTICLE)]


def _item_label(g, item, source_labels) -> FactualityLabel | None:
    if item.kind is NodeKind.SOURCE:
        return source_labels.get(item)
    pub = _publisher_of(g, item)
    return source_labels.get(pub) if pub is not None else None


def user_factuality(
    g: InfoGraph,
    preds: dict[NodeId, tuple[np.ndarray, FactualityLabel]] | None,
    scope,
    mode: LabelMode,
) -> dict[NodeId, FactualityLabel | None]:
    """Derive a label per user from the sources/articles it touches.

    Articles inherit their publishing source's label. The user gets the
    majority label over connected items (ties toward LOW); users with no
    source or article connections map to None (undefined).
    """
    if mode is LabelMode.GOLD:
        source_labels: dict[NodeId, FactualityLabel] = dict(g.gold_labels)
    else:
        if preds is None:
            raise ValidationError("predicted mode requires source predictions")
        source_labels = {s: label for s, (_, label) in preds.items()}

    out: dict[NodeId, FactualityLabel | None] = {}
    for u in sorted(scope):
        labels = []
        for item in _connected_items(g, u):
            label = _item_label(g, item, source_labels)
            if label is None:
                if mode is LabelMode.PREDICTED and item.kind is NodeKind.SOURCE:
                    raise ValidationError(f"no prediction for connected source {item.key()}")
                continue
            labels.append(label)
        out[u] = _majority_label(labels)
    return out


def confusion_scores(
    g: InfoGraph,
    preds: dict[NodeId, tuple[np.ndarray, FactualityLabel]],
    scope,
) -> dict[NodeId, float]:
    """Mean predicted-class softmax probability over a user's connected items."""
    out: dict[NodeId, float] = {}
    for u in sorted(scope):
        values = []
        for item in _connected_items(g, u):
            src = item if item.kind is NodeKind.SOURCE else _publisher_of(g, item)
            if src is None:
                continue
            if src not in preds:
                raise ValidationError(f"no prediction for source {src.key()}")
            probs, label = preds[src]
            values.append(float(probs[int(label)]))
        if not values:
            raise UndefinedForIsolatedUser(u.key())
        out[u] = float(np.mean(values))
    return out


@dataclass
class Clustering:
    k: int
    assignment: dict[NodeId, int]
    centroids: np.ndarray
    cluster_labels: dict[int, FactualityLabel]


@dataclass
class MismatchResult:
    pairs: list[FocalPair]
    clustering: Clustering
    skipped_clusters: list[int]


def mismatch_pairs(
    g: InfoGraph,
    emb: NodeEmbeddings,
    factuality: dict[NodeId, FactualityLabel | None],
    k: int,
    seed: int,
) -> MismatchResult:
    """Pair users whose derived label conflicts with their cluster's label.

    Procedure (deterministic given the seed): cluster users with defined
    labels by their embeddings, label each cluster by its majority member
    label, then scan clusters in id order and members in node order. Every
    member off the cluster label is paired with a seeded-random available
    same-cluster member that carries the cluster label. A user joins at most
    one pair per round; clusters with no available majority member left are
    skipped and reported.
    """
    users = sorted(u for u, l in factuality.items() if l is not None)
    if len(users) < 2:
        raise TooFewUsers(f"{len(users)} labeled users")
    if k < 2:
        raise ValidationError("k must be at least 2")
    if k > len(users):
        raise TooFewUsers(f"{len(users)} labeled users for k={k}")

    result = kmeans(emb.subset(users), k, seed=seed)
    assignment = {u: int(c) for u, c in zip(users, result.assignment)}

    cluster_labels: dict[int, FactualityLabel] = {}
    members_of: dict[int, list[NodeId]] = {c: [] for c in range(k)}
    for u in users:
        members_of[assignment[u]].append(u)
    for c in range(k):
        if members_of[c]:
            cluster_labels[c] = _majority_label(factuality[u] for u in members_of[c])

    rng = np.random.default_rng(seed)
    pairs: list[FocalPair] = []
    skipped: list[int] = []
    used: set[NodeId] = set()
    for c in range(k):
        if c not in cluster_labels:
            continue
        c_label = cluster_labels[c]
        for uj in members_of[c]:
            if uj in used or factuality[uj] == c_label:
                continue
            eligible = [
                u
                for u in members_of[c]
                if u not in used and u != uj and factuality[u] == c_label
            ]
            if not eligible:
                skipped.append(c)
                break
            uk = eligible[int(rng.integers(len(eligible)))]
            used.add(uj)
            used.add(uk)
            pairs.append(FocalPair(uj, uk, PairCriterion.MISMATCH, cluster_id=c))

    clustering = Clustering(k, assignment, result.centroids, cluster_labels)
    return MismatchResult(pairs, clustering, skipped)


def random_pairs(scope, count: int, seed: int) -> list[FocalPair]:
    """Uniform independent pairs, deduplicated as unordered pairs. Users may
    recur across pairs (only the mismatch criterion dedups users)."""
    users = sorted(scope)
    n = len(users)
    if n < 2:
        raise TooFewUsers(f"{n} users")
    rng = np.random.default_rng(seed)
    count = min(count, n * (n - 1) // 2)
    seen: set[tuple[NodeId, NodeId]] = set()
    pairs: list[FocalPair] = []
    while len(pairs) < count:
        i, j = rng.integers(n), rng.integers(n)
        if i == j:
            continue
        key = (users[min(i, j)], users[max(i, j)])
        if key in seen:
            continue
        seen.add(key)
        pairs.append(FocalPair(users[int(i)], users[int(j)], PairCriterion.RANDOM))
    return pairs


def confusion_pairs(
    g: InfoGraph,
    preds: dict[NodeId, tuple[np.ndarray, FactualityLabel]],
    scope,
    count: int,
) -> list[FocalPair]:
    """Pair users greedily from the least-confident end of the score ranking."""
    scores = confusion_scores(g, preds, scope)
    if len(scores) < 2:
        raise TooFewUsers(f"{len(scores)} scored users")
    ranked = sorted(scores, key=lambda u: (scores[u], u))
    pairs = []
    for i in range(0, len(ranked) - 1, 2):
        if len(pairs) >= count:
            break
        pairs.append(FocalPair(ranked[i], ranked[i + 1], PairCriterion.CONFUSION))
    return pairs
