"""Synthetic multi-event information graphs with planted communities.

Each event (one training block plus two inductive eval events) carries three
communities, one per factuality class. Users preferentially follow and
propagate content from their own community with probability ``homophily``;
user features are class-conditional Gaussians shared across events, while
source and article features are pure noise, so classification signal must
travel through the social structure. ``degrade`` then breaks a fraction of
the intra-community edges on the eval events to emulate an emerging event
the model has not seen well-connected.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .errors import InfeasibleConfig
from .graph import (
    FactualityLabel,
    InfoGraph,
    NodeId,
    NodeKind,
    Partition,
    Relation,
    SplitSpec,
    validate_splits,
)

EVENTS = (
    ("train", (Partition.TRAIN,)),
    ("e1", (Partition.E1_1, Partition.E1_2)),
    ("e2", (Partition.E2_1, Partition.E2_2)),
)

EVENT_TOPICS = {
    "train": "the city budget vote",
    "e1": "the river cleanup initiative",
    "e2": "the transit strike",
}

# stance phrase pools per community class, used only for display metadata
BIO_PHRASES = {
    0: [
        "They will not tell you what really happened.",
        "Question everything you read. Everything.",
        "The real story is always hidden.",
        "Wake up and look behind the curtain.",
    ],
    1: [
        "Hot takes and big stories, all day.",
        "Sharing the loudest headlines first.",
        "Sometimes right, never boring.",
        "News with an opinion attached.",
    ],
    2: [
        "Local reporting, verified twice.",
        "Facts first, conclusions later.",
        "Covering civic affairs since 2009.",
        "Corrections welcome, accuracy valued.",
    ],
}

HEADLINE_TEMPLATES = {
    0: "What officials are hiding about {topic} (exclusive {n})",
    1: "Chaos erupts around {topic}, insiders stunned ({n})",
    2: "Council releases detailed report on {topic} (update {n})",
}

SNIPPET_TEMPLATES = {
    0: "Sources close to the matter say the public account of {topic} does not add up.",
    1: "Observers describe dramatic scenes as {topic} dominates the conversation.",
    2: "The document outlines timelines, funding, and next steps for {topic}.",
}


@dataclass
class GenConfig:
    seed: int = 0
    user_dim: int = 32
    content_dim: int = 32
    sources_per_class: int = 33  # per event
    articles_per_source_mean: float = 3.0
    articles_per_source_std: float = 1.0
    users_per_event: int = 150
    influencer_fraction: float = 0.08
    homophily: float = 0.85
    noise: float = 0.1  # chance a user's features come from another class
    class_mean_scale: float = 1.0
    feature_noise: float = 1.0
    follows_source_mean: float = 2.0
    propagates_mean: float = 3.0
    follows_user_mean: float = 3.0
    # eval events can be connectivity-starved relative to the training event,
    # emulating an emerging event whose social context is still thin
    event_edge_scale: float = 1.0

    def validate(self) -> None:
        if not 0.5 < self.homophily <= 1.0:
            raise InfeasibleConfig("homophily must be in (0.5, 1]")
        if not 0.0 <= self.noise < 0.5:
            raise InfeasibleConfig("noise must be in [0, 0.5)")
        if min(self.sources_per_class, self.users_per_event) < 1:
            raise InfeasibleConfig("node counts must be positive")
        if self.users_per_event < 6:
            raise InfeasibleConfig("need at least 6 users per event")
        if min(self.user_dim, self.content_dim) < 1:
            raise InfeasibleConfig("feature dims must be positive")
        if not 0.0 < self.influencer_fraction < 1.0:
            raise InfeasibleConfig("influencer_fraction must be in (0, 1)")
        for mean in (self.follows_source_mean, self.propagates_mean, self.follows_user_mean):
            if mean < 1.0:
                raise InfeasibleConfig("edge count means must be at least 1")
        if not 0.0 < self.event_edge_scale <= 1.0:
            raise InfeasibleConfig("event_edge_scale must be in (0, 1]")

    def to_json_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json_dict(doc: dict) -> "GenConfig":
        return GenConfig(**doc)


@dataclass
class GroundTruth:
    """Per-node community assignment and label, plus the generating config.

    ``feature_flipped`` marks users whose feature vector was drawn from a
    different class than their community (the generator's noise mechanism).
    """

    community: dict[NodeId, int] = field(default_factory=dict)
    label: dict[NodeId, FactualityLabel] = field(default_factory=dict)
    feature_flipped: set[NodeId] = field(default_factory=set)
    config: GenConfig = field(default_factory=GenConfig)

    def to_json_dict(self) -> dict:
        return {
            "community": {n.key(): c for n, c in sorted(self.community.items())},
            "label": {n.key(): l.json_name for n, l in sorted(self.label.items())},
            "feature_flipped": [n.key() for n in sorted(self.feature_flipped)],
            "config": self.config.to_json_dict(),
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "GroundTruth":
        truth = GroundTruth(config=GenConfig.from_json_dict(doc["config"]))
        truth.community = {NodeId.from_key(k): v for k, v in doc["community"].items()}
        truth.label = {
            NodeId.from_key(k): FactualityLabel.from_json(v) for k, v in doc["label"].items()
        }
        truth.feature_flipped = {NodeId.from_key(k) for k in doc.get("feature_flipped", [])}
        return truth

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":")) + "\n"
        )

    @staticmethod
    def load(path) -> "GroundTruth":
        return GroundTruth.from_json_dict(json.loads(Path(path).read_text()))


def _follower_count(rng: np.random.Generator, influencer_fraction: float) -> int:
    # heavy-tailed counts calibrated so roughly the requested fraction
    # clears the 1000-follower influencer threshold
    sigma = 1.5
    mu = np.log(1001.0) - sigma * NormalDist().inv_cdf(1.0 - influencer_fraction)
    return int(np.exp(rng.normal(mu, sigma)))


def _count(rng: np.random.Generator, mean: float) -> int:
    return 1 + int(rng.poisson(mean - 1.0))


def _pick(rng: np.random.Generator, pool: list) -> object:
    return pool[int(rng.integers(len(pool)))]


def generate(cfg: GenConfig) -> tuple[InfoGraph, SplitSpec, GroundTruth]:
    """Build the three-event graph. Deterministic per seed."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    g = InfoGraph(user_dim=cfg.user_dim, content_dim=cfg.content_dim)
    truth = GroundTruth(config=cfg)
    partition: dict[NodeId, Partition] = {}

    class_means = rng.normal(0.0, cfg.class_mean_scale, size=(3, cfg.user_dim))

    for event_idx, (event, parts) in enumerate(EVENTS):
        topic = EVENT_TOPICS[event]
        sources_by_class: dict[int, list[NodeId]] = {c: [] for c in range(3)}
        articles_by_class: dict[int, list[NodeId]] = {c: [] for c in range(3)}
        users_by_class: dict[int, list[NodeId]] = {c: [] for c in range(3)}
        event_users: list[NodeId] = []

        def community_id(klass: int) -> int:
            return event_idx * 3 + klass

        for klass in range(3):
            for i in range(cfg.sources_per_class):
                half = parts[0] if i < (cfg.sources_per_class + 1) // 2 else parts[-1]
                node = g.add_source(
                    rng.normal(0.0, cfg.feature_noise, cfg.content_dim),
                    FactualityLabel(klass),
                    metadata={
                        "name": f"{event}-outlet-{klass}-{i}",
                        "description": str(_pick(rng, BIO_PHRASES[klass])),
                    },
                )
                partition[node] = half
                sources_by_class[klass].append(node)
                truth.community[node] = community_id(klass)
                truth.label[node] = FactualityLabel(klass)

                n_articles = max(
                    1,
                    int(round(rng.normal(cfg.articles_per_source_mean, cfg.articles_per_source_std))),
                )
                for j in range(n_articles):
                    month = int(rng.integers(1, 13))
                    day = int(rng.integers(1, 29))
                    art = g.add_article(
                        rng.normal(0.0, cfg.feature_noise, cfg.content_dim),
                        metadata={
                            "headline": HEADLINE_TEMPLATES[klass].format(topic=topic, n=j),
                            "snippet": SNIPPET_TEMPLATES[klass].format(topic=topic),
                            "date": f"2024-{month:02d}-{day:02d}",
                            "entities": f"{event}, council, {topic.split()[-1]}",
                        },
                    )
                    partition[art] = half
                    articles_by_class[klass].append(art)
                    truth.community[art] = community_id(klass)
                    truth.label[art] = FactualityLabel(klass)
                    g.add_edge(node, art, Relation.PUBLISHES)

        for i in range(cfg.users_per_event):
            klass = int(rng.integers(3))
            feature_class = klass
            # flipped users of a community all impersonate the same other
            # class, forming a coherent confusing block rather than diffuse
            # per-user noise
            if cfg.noise > 0 and rng.random() < cfg.noise:
                feature_class = (klass + 1) % 3
            features = class_means[feature_class] + rng.normal(
                0.0, cfg.feature_noise, cfg.user_dim
            )
            node = g.add_user(
                features,
                follower_count=_follower_count(rng, cfg.influencer_fraction),
                metadata={
                    "username": f"{event}_user_{i}",
                    "bio": str(_pick(rng, BIO_PHRASES[klass])),
                    "tweet": f"My take on {topic}: {_pick(rng, BIO_PHRASES[klass])}",
                },
            )
            partition[node] = parts[i % len(parts)]
            event_users.append(node)
            users_by_class[klass].append(node)
            truth.community[node] = community_id(klass)
            truth.label[node] = FactualityLabel(klass)
            if feature_class != klass:
                truth.feature_flipped.add(node)

        def sample_target(own: int, by_class: dict[int, list[NodeId]]) -> NodeId | None:
            if rng.random() < cfg.homophily:
                pool = by_class[own]
            else:
                other = int((own + 1 + rng.integers(2)) % 3)
                pool = by_class[other]
            if not pool:
                return None
            return pool[int(rng.integers(len(pool)))]

        scale = 1.0 if event == "train" else cfg.event_edge_scale

        def scaled(mean: float) -> float:
            return max(1.0, mean * scale)

        for node in event_users:
            klass = truth.community[node] - event_idx * 3
            for _ in range(_count(rng, scaled(cfg.follows_source_mean))):
                target = sample_target(klass, sources_by_class)
                if target is not None:
                    g.add_edge(node, target, Relation.FOLLOWS_SOURCE)
            for _ in range(_count(rng, scaled(cfg.propagates_mean))):
                target = sample_target(klass, articles_by_class)
                if target is not None:
                    g.add_edge(node, target, Relation.PROPAGATES)
            for _ in range(_count(rng, scaled(cfg.follows_user_mean))):
                target = sample_target(klass, users_by_class)
                if target is not None and target != node:
                    g.add_edge(node, target, Relation.FOLLOWS_USER)

    splits = SplitSpec(partition)
    violations = validate_splits(g, splits)
    assert not violations, "generator produced cross-event edges"
    return g, splits, truth


DEGRADABLE_RELATIONS = (Relation.FOLLOWS_USER, Relation.PROPAGATES)


def degrade(
    g: InfoGraph,
    truth: GroundTruth,
    breakage: float,
    seed: int = 0,
    splits: SplitSpec | None = None,
    scope_groups=("e1", "e2"),
) -> InfoGraph:
    """Remove a seeded Bernoulli(breakage) fraction of intra-community
    user-user and user-article edges. With a split spec, only edges inside
    the scope event groups are candidates; without one, all such edges are.
    The node set is unchanged."""
    if not 0.0 <= breakage < 1.0:
        raise InfeasibleConfig("breakage must be in [0, 1)")
    if breakage == 0.0:
        return g.copy()
    rng = np.random.default_rng(seed)
    drop: set[tuple[NodeId, NodeId, Relation]] = set()
    for rel in DEGRADABLE_RELATIONS:
        for src, dst in g.edges_of(rel):
            if truth.community.get(src) != truth.community.get(dst):
                continue
            if splits is not None and (
                splits.of(src).event_group not in scope_groups
                or splits.of(dst).event_group not in scope_groups
            ):
                continue
            if rng.random() < breakage:
                drop.add((src, dst, rel))
    return g.copy(drop_edges=drop)
