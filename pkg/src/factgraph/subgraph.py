"""Interaction sub-graphs: the small neighborhood shown to an interactor.

Around a focal user pair we include the articles they propagate, other users
propagating those articles, the publishing sources, and up to three
high-follower accounts one of the focal users follows. Node metadata and
model-predicted labels ride along so the interactor can judge content
similarity.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import UnknownNode
from .graph import FactualityLabel, InfoGraph, NodeId, NodeKind, Relation
from .sampler import FocalPair

INTERACTION_QUESTIONS = [
    "Are there any users that are similar to each other? Please connect them.",
    "Are there any articles that are similar to each other? Please connect them.",
    "Are any users likely to propagate any of the articles? Please connect them to the appropriate article.",
    "Are any users likely to interact with another user? Please connect those pairs of users.",
    "Are any users likely to interact with any sources? Please connect those users of the respective source.",
]

INFLUENCER_FOLLOWER_THRESHOLD = 1000
MAX_INFLUENCERS = 3

ROLE_FOCAL = "focal_user"
ROLE_ARTICLE = "article"
ROLE_CO_PROPAGATOR = "co_propagator"
ROLE_PUBLISHER = "publisher"
ROLE_INFLUENCER = "influencer"


@dataclass
class SubgraphLimits:
    max_articles: int = 6
    max_co_propagators: int = 10


@dataclass
class InteractionSubGraph:
    id: str
    focal: FocalPair
    roles: dict[NodeId, str]
    edges: list[tuple[NodeId, NodeId, Relation]]
    metadata: dict[NodeId, dict] = field(default_factory=dict)
    predicted_labels: dict[NodeId, FactualityLabel] = field(default_factory=dict)

    @property
    def nodes(self) -> list[NodeId]:
        return sorted(self.roles)

    def users(self) -> list[NodeId]:
        return [n for n in self.nodes if n.kind is NodeKind.USER]

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "focal": [self.focal.uj.key(), self.focal.uk.key()],
            "criterion": self.focal.criterion.value,
            "nodes": [
                {
                    "id": n.key(),
                    "kind": n.kind.json_name,
                    "role": self.roles[n],
                    "metadata": self.metadata.get(n, {}),
                    **(
                        {"predicted_label": self.predicted_labels[n].json_name}
                        if n in self.predicted_labels
                        else {}
                    ),
                }
                for n in self.nodes
            ],
            "edges": [[s.key(), d.key(), r.value] for s, d, r in self.edges],
            "questions": list(INTERACTION_QUESTIONS),
        }


def _subgraph_id(nodes) -> str:
    digest = hashlib.sha256("|".join(n.key() for n in sorted(nodes)).encode()).hexdigest()
    return f"sg-{digest[:12]}"


def build_subgraph(g: InfoGraph, pair: FocalPair, limits: SubgraphLimits | None = None) -> InteractionSubGraph:
    """Deterministic closure around the focal pair under the inclusion rule."""
    limits = limits or SubgraphLimits()
    for node in (pair.uj, pair.uk):
        if not g.has_node(node):
            raise UnknownNode(node.key())
    focal = [pair.uj, pair.uk]
    roles: dict[NodeId, str] = {n: ROLE_FOCAL for n in focal}

    articles: list[NodeId] = []
    for f in sorted(focal):
        for art in g.neighbors(f, Relation.PROPAGATES):
            if art not in roles and len(articles) < limits.max_articles:
                roles[art] = ROLE_ARTICLE
                articles.append(art)

    for art in articles:
        for pub in g.neighbors(art, Relation.PUBLISHES):
            if pub not in roles:
                roles[pub] = ROLE_PUBLISHER

    co_count = 0
    for art in articles:
        for other in g.neighbors(art, Relation.PROPAGATES):
            if other not in roles and co_count < limits.max_co_propagators:
                roles[other] = ROLE_CO_PROPAGATOR
                co_count += 1

    # influencers: highest follower counts first, then lowest index
    candidates = []
    for f in focal:
        for followee in g.neighbors(f, Relation.FOLLOWS_USER):
            if followee in roles or followee in focal:
                continue
            count = g.follower_count.get(followee, 0)
            if count > INFLUENCER_FOLLOWER_THRESHOLD:
                candidates.append((-count, followee.index, followee))
    for _, _, node in sorted(set(candidates)):
        if sum(1 for r in roles.values() if r == ROLE_INFLUENCER) >= MAX_INFLUENCERS:
            break
        if node not in roles:
            roles[node] = ROLE_INFLUENCER

    node_set = set(roles)
    edges = sorted(
        (s, d, r) for s, d, r in g.edges() if s in node_set and d in node_set
    )
    return InteractionSubGraph(_subgraph_id(node_set), pair, roles, edges)


PLACEHOLDER_META = {
    NodeKind.SOURCE: {"name": "unknown source", "description": "", "synthetic": "true"},
    NodeKind.ARTICLE: {
        "headline": "untitled article",
        "snippet": "",
        "date": "",
        "synthetic": "true",
    },
    NodeKind.USER: {"username": "unknown user", "bio": "", "tweet": "", "synthetic": "true"},
}


def attach_metadata(
    g: InfoGraph,
    sg: InteractionSubGraph,
    preds: dict[NodeId, tuple[np.ndarray, FactualityLabel]] | None = None,
    user_labels: dict[NodeId, FactualityLabel | None] | None = None,
) -> InteractionSubGraph:
    """Fill display records and model-predicted labels for every node."""
    for node in sg.nodes:
        record = g.metadata.get(node)
        if record:
            meta = dict(record)
        else:
            meta = dict(PLACEHOLDER_META[node.kind])
        if node.kind is NodeKind.USER:
            meta.setdefault("follower_count", str(g.follower_count.get(node, 0)))
        sg.metadata[node] = meta
        if preds and node in preds:
            sg.predicted_labels[node] = preds[node][1]
        elif user_labels and user_labels.get(node) is not None:
            sg.predicted_labels[node] = user_labels[node]
    return sg
