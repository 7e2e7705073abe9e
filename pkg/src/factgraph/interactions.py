"""Edge proposals and the three evaluation protocols.

Proposals originate from humans (via the service) or from the similarity
oracle, which connects users sharing the same derived gold label. The
protocols differ in effort: P1 only adds edges at inference time, P2 retrains
on the first event's interaction half, and P3 additionally receives new
interactions at deployment.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    InvalidEndpoint,
    KindMismatch,
    ProtocolSplitMismatch,
    StaleSubgraph,
    UnknownNode,
    ValidationError,
)
from .graph import (
    INTERACTION_RELATIONS,
    FactualityLabel,
    InfoGraph,
    NodeId,
    NodeKind,
    Partition,
    Relation,
    SplitSpec,
    validate_splits,
)
from .metrics import EvalReport, accuracy, macro_f1
from .rgcn import RgcnModel, clone_model, encode, predict_sources, train
from .sampler import LabelMode, user_factuality
from .subgraph import InteractionSubGraph

PROVENANCE_SIMULATED = "simulated"
PROVENANCE_HUMAN = "human"


@dataclass(frozen=True)
class EdgeProposal:
    """One proposed connection; ``subgraph_id`` is None for bulk simulation."""

    subgraph_id: str | None
    src: NodeId
    dst: NodeId
    relation: Relation
    provenance: str = PROVENANCE_SIMULATED
    interactor: str | None = None
    timestamp: float = 0.0

    def __post_init__(self):
        if self.relation not in INTERACTION_RELATIONS:
            raise InvalidEndpoint(f"{self.relation.value} is not an interaction relation")
        if self.src == self.dst:
            raise InvalidEndpoint("proposal endpoints must differ")

    def edge(self) -> tuple[NodeId, NodeId, Relation]:
        return (self.src, self.dst, self.relation)

    def to_json_dict(self) -> dict:
        doc = {
            "subgraph_id": self.subgraph_id,
            "src": self.src.key(),
            "dst": self.dst.key(),
            "relation": self.relation.value,
            "provenance": self.provenance,
            "timestamp": self.timestamp,
        }
        if self.interactor is not None:
            doc["interactor"] = self.interactor
        return doc

    @staticmethod
    def from_json_dict(doc: dict) -> "EdgeProposal":
        return EdgeProposal(
            subgraph_id=doc.get("subgraph_id"),
            src=NodeId.from_key(doc["src"]),
            dst=NodeId.from_key(doc["dst"]),
            relation=Relation(doc["relation"]),
            provenance=doc.get("provenance", PROVENANCE_SIMULATED),
            interactor=doc.get("interactor"),
            timestamp=doc.get("timestamp", 0.0),
        )


def write_proposals(path, proposals) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        for p in proposals:
            fh.write(json.dumps(p.to_json_dict(), sort_keys=True) + "\n")


def load_proposals(path) -> list[EdgeProposal]:
    proposals = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            proposals.append(EdgeProposal.from_json_dict(json.loads(line)))
    return proposals


def _ordered(a: NodeId, b: NodeId) -> tuple[NodeId, NodeId]:
    return (a, b) if a < b else (b, a)


def simulate_interactions(
    g: InfoGraph,
    subgraphs: list[InteractionSubGraph],
    gold: dict[NodeId, FactualityLabel | None],
) -> list[EdgeProposal]:
    """Similarity oracle: connect every user pair inside a sub-graph whose
    derived gold labels are equal and defined. Never crosses sub-graphs."""
    proposals = []
    for sg in subgraphs:
        users = sg.users()
        for a, b in itertools.combinations(sorted(users), 2):
            la, lb = gold.get(a), gold.get(b)
            if la is not None and la == lb:
                src, dst = _ordered(a, b)
                proposals.append(
                    EdgeProposal(sg.id, src, dst, Relation.INTERACT_UU)
                )
    return proposals


def simulate_bulk(
    g: InfoGraph,
    splits: SplitSpec,
    scope: Partition,
    fraction: float,
    seed: int,
    gold: dict[NodeId, FactualityLabel | None] | None = None,
) -> list[EdgeProposal]:
    """Connect a seeded uniform sample of all same-gold-label user pairs in
    the scope partition."""
    if not 0.0 < fraction <= 1.0:
        raise ValidationError(f"fraction must be in (0, 1], got {fraction}")
    users = [n for n in splits.nodes_in(scope) if n.kind is NodeKind.USER]
    if gold is None:
        gold = user_factuality(g, None, users, LabelMode.GOLD)
    candidates = [
        _ordered(a, b)
        for a, b in itertools.combinations(sorted(users), 2)
        if gold.get(a) is not None and gold.get(a) == gold.get(b)
    ]
    n_pick = int(round(fraction * len(candidates)))
    rng = np.random.default_rng(seed)
    picked_idx = sorted(rng.choice(len(candidates), size=n_pick, replace=False)) if candidates else []
    return [
        EdgeProposal(None, candidates[i][0], candidates[i][1], Relation.INTERACT_UU)
        for i in picked_idx
    ]


def incorporate(
    g: InfoGraph,
    proposals,
    subgraphs: dict[str, InteractionSubGraph] | None = None,
) -> tuple[int, int]:
    """Apply proposals as interaction edges. Returns (added, duplicates).

    When a sub-graph registry is given, proposals carrying a sub-graph id are
    validated against it: unknown ids raise StaleSubgraph and endpoints
    outside the sub-graph raise InvalidEndpoint.
    """
    added = 0
    duplicates = 0
    for p in proposals:
        if p.subgraph_id is not None and subgraphs is not None:
            if p.subgraph_id not in subgraphs:
                raise StaleSubgraph(p.subgraph_id)
            sg_nodes = set(subgraphs[p.subgraph_id].nodes)
            if p.src not in sg_nodes or p.dst not in sg_nodes:
                raise InvalidEndpoint(f"{p.src.key()}-{p.dst.key()} outside {p.subgraph_id}")
        try:
            if g.add_edge(p.src, p.dst, p.relation):
                added += 1
            else:
                duplicates += 1
        except (UnknownNode, KindMismatch) as exc:
            raise InvalidEndpoint(str(exc)) from exc
    return added, duplicates


class Protocol:
    FULLY_INDUCTIVE = 1
    TRAIN_AMPLIFY = 2
    LEARN_TO_INCORPORATE = 3


PROTOCOL_INTERACTION_SPLITS = {
    Protocol.FULLY_INDUCTIVE: (Partition.E1_1, Partition.E2_1),
    Protocol.TRAIN_AMPLIFY: (Partition.E1_1,),
    Protocol.LEARN_TO_INCORPORATE: (Partition.E1_1, Partition.E2_1),
}

PROTOCOL_EVAL_SPLITS = {
    Protocol.FULLY_INDUCTIVE: (Partition.E1_1, Partition.E1_2, Partition.E2_1, Partition.E2_2),
    Protocol.TRAIN_AMPLIFY: (Partition.E1_2, Partition.E2_1),
    Protocol.LEARN_TO_INCORPORATE: (Partition.E1_2, Partition.E2_1, Partition.E2_2),
}


@dataclass
class ProtocolConfig:
    protocol: int
    retrain_epochs: int | None = None  # default: half the base epoch budget
    retrain_learning_rate: float | None = None  # default: the model's own rate
    # loss terms during P2/P3 retraining; dropping TRAIN focuses the update
    # on the event being adapted to
    retrain_loss_partitions: tuple = (Partition.TRAIN, Partition.E1_1)
    dev_partition: Partition | None = Partition.E1_1

    def validate(self) -> None:
        if self.protocol not in PROTOCOL_INTERACTION_SPLITS:
            raise ValidationError(f"unknown protocol {self.protocol}")
        if Partition.E1_1 not in self.retrain_loss_partitions:
            raise ValidationError("retraining must include the interaction half E1_1")


@dataclass
class ProtocolRun:
    protocol: int
    interaction_splits: list[str]
    retrain: bool
    reports: dict[str, EvalReport]
    edges_added: int
    edges_by_split: dict[str, int] = field(default_factory=dict)
    retrain_losses: list[float] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "interaction_splits": self.interaction_splits,
            "retrain": self.retrain,
            "reports": {k: r.to_json_dict() for k, r in self.reports.items()},
            "edges_added": self.edges_added,
            "edges_by_split": self.edges_by_split,
            "retrain_losses": self.retrain_losses,
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "ProtocolRun":
        return ProtocolRun(
            protocol=doc["protocol"],
            interaction_splits=list(doc["interaction_splits"]),
            retrain=doc["retrain"],
            reports={k: EvalReport.from_json_dict(r) for k, r in doc["reports"].items()},
            edges_added=doc["edges_added"],
            edges_by_split=dict(doc.get("edges_by_split", {})),
            retrain_losses=list(doc.get("retrain_losses", [])),
        )


def evaluate_splits(
    model: RgcnModel,
    g: InfoGraph,
    splits: SplitSpec,
    parts,
    edges_by_split: dict[str, int] | None = None,
) -> dict[str, EvalReport]:
    """Accuracy and macro-F1 per split; one encode per event fragment."""
    reports: dict[str, EvalReport] = {}
    by_group: dict[str, list[Partition]] = {}
    for part in parts:
        by_group.setdefault(part.event_group, []).append(part)
    for group, members in sorted(by_group.items()):
        emb = encode(model, g, splits.event_nodes(group))
        for part in members:
            sources = [n for n in splits.nodes_in(part) if n.kind is NodeKind.SOURCE]
            preds = predict_sources(model, g, sources, emb)
            pred_labels = {s: label for s, (_, label) in preds.items()}
            gold = {s: g.gold_labels[s] for s in sources}
            reports[part.value] = EvalReport(
                split=part.value,
                accuracy=accuracy(pred_labels, gold),
                macro_f1=macro_f1(pred_labels, gold),
                edges_added=(edges_by_split or {}).get(part.value, 0),
            )
    return reports


def _check_proposal_partitions(
    proposals_by_split: dict[Partition, list[EdgeProposal]],
    allowed,
    splits: SplitSpec,
) -> None:
    for part, proposals in proposals_by_split.items():
        if proposals and part not in allowed:
            raise ProtocolSplitMismatch(
                f"protocol does not interact on {part.value}"
            )
        group = part.event_group
        for p in proposals:
            for endpoint in (p.src, p.dst):
                if splits.of(endpoint).event_group != group:
                    raise ProtocolSplitMismatch(
                        f"proposal endpoint {endpoint.key()} outside event {group}"
                    )


def run_protocol(
    base_model: RgcnModel,
    g: InfoGraph,
    splits: SplitSpec,
    proposals_by_split: dict[Partition, list[EdgeProposal]],
    cfg: ProtocolConfig,
    deployment_solicit=None,
) -> ProtocolRun:
    """Execute one evaluation protocol without mutating the inputs.

    ``deployment_solicit``, when given for protocol 3, is called as
    ``fn(model, graph)`` after retraining to produce the second event's
    proposals from the deployed model's own state (instead of the
    pre-supplied ones), mirroring interaction at deployment time.
    """
    cfg.validate()
    allowed = PROTOCOL_INTERACTION_SPLITS[cfg.protocol]
    _check_proposal_partitions(proposals_by_split, allowed, splits)

    edges_by_split: dict[str, int] = {}
    retrain_losses: list[float] = []

    if cfg.protocol == Protocol.FULLY_INDUCTIVE:
        g1 = g.copy()
        for part in allowed:
            added, _ = incorporate(g1, proposals_by_split.get(part, []))
            edges_by_split[part.value] = added
        model = base_model
        eval_graph = g1
    else:
        g2 = g.copy()
        added, _ = incorporate(g2, proposals_by_split.get(Partition.E1_1, []))
        edges_by_split[Partition.E1_1.value] = added
        model = clone_model(base_model)
        epochs = cfg.retrain_epochs
        if epochs is None:
            epochs = max(1, model.config.epochs // 2)
        train_cfg = model.config
        if cfg.retrain_learning_rate is not None:
            from dataclasses import replace as _replace

            train_cfg = _replace(train_cfg, learning_rate=cfg.retrain_learning_rate)
        # P2 deploys without interactions, so its checkpoint is selected on the
        # interaction-free graph; P3 deploys with them and selects as trained
        dev_graph = g if cfg.protocol == Protocol.TRAIN_AMPLIFY else None
        result = train(
            model,
            g2,
            splits,
            train_cfg,
            loss_partitions=cfg.retrain_loss_partitions,
            dev_partition=cfg.dev_partition,
            epochs=epochs,
            dev_tie="latest",
            dev_graph=dev_graph,
        )
        retrain_losses = result.losses
        eval_graph = g2
        if cfg.protocol == Protocol.LEARN_TO_INCORPORATE:
            g3 = g2.copy()
            e2_proposals = proposals_by_split.get(Partition.E2_1, [])
            if deployment_solicit is not None:
                e2_proposals = deployment_solicit(model, g2)
                _check_proposal_partitions({Partition.E2_1: e2_proposals}, allowed, splits)
            added, _ = incorporate(g3, e2_proposals)
            edges_by_split[Partition.E2_1.value] = added
            eval_graph = g3

    violations = validate_splits(eval_graph, splits)
    if violations:
        raise ProtocolSplitMismatch(f"{len(violations)} incorporated edges cross events")

    # splits sharing an event fragment see the same incorporated edges
    for part in EVAL_SPLIT_ALIASES:
        twin = EVAL_SPLIT_ALIASES[part]
        if part.value in edges_by_split and twin.value not in edges_by_split:
            edges_by_split[twin.value] = edges_by_split[part.value]

    reports = evaluate_splits(
        model, eval_graph, splits, PROTOCOL_EVAL_SPLITS[cfg.protocol], edges_by_split
    )
    return ProtocolRun(
        protocol=cfg.protocol,
        interaction_splits=[p.value for p in allowed],
        retrain=cfg.protocol != Protocol.FULLY_INDUCTIVE,
        reports=reports,
        edges_added=sum(
            edges_by_split.get(p.value, 0) for p in allowed
        ),
        edges_by_split=edges_by_split,
        retrain_losses=retrain_losses,
    )


EVAL_SPLIT_ALIASES = {
    Partition.E1_1: Partition.E1_2,
    Partition.E2_1: Partition.E2_2,
}
