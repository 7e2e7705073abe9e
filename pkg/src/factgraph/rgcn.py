"""Relational GCN encoder and source-factuality classifier.

Every relation gets per-layer weight matrices for both edge directions plus
a shared self-loop transform; messages are averaged per (node, relation)
before summation. An optional config flag ties each interaction relation to
the social relation with the same endpoint signature, for experiments where
interaction edges should ride on already-trained transforms.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Var
from .errors import EmptyTrainSet, InfeasibleConfig, ValidationError
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
from .metrics import NUM_CLASSES

# Interaction relations reuse the weights of the social relation with the
# same endpoint signature (user-user, user-article, user-source). Article to
# article interactions have no social analogue and keep their own weights.
TIED_ANALOGUE = {
    Relation.INTERACT_UU: Relation.FOLLOWS_USER,
    Relation.INTERACT_UA: Relation.PROPAGATES,
    Relation.INTERACT_US: Relation.FOLLOWS_SOURCE,
}

DIRECTIONS = ("fwd", "inv")


@dataclass
class RgcnConfig:
    layers: int = 5
    hidden: int = 128
    learning_rate: float = 0.001
    batch_size: int = 128
    epochs: int = 100
    seed: int = 0
    use_basis_decomposition: bool = False
    num_bases: int = 4
    tie_interaction_weights: bool = False

    def validate(self) -> None:
        if self.layers < 1 or self.hidden < 1 or self.batch_size < 1 or self.epochs < 1:
            raise InfeasibleConfig("layers, hidden, batch_size, epochs must be positive")
        if self.hidden < NUM_CLASSES:
            raise InfeasibleConfig("hidden must be at least the number of classes")
        if self.learning_rate <= 0:
            raise InfeasibleConfig("learning_rate must be positive")
        if self.use_basis_decomposition and not 1 <= self.num_bases <= len(Relation):
            raise InfeasibleConfig("num_bases must be in [1, relation count]")

    def to_json_dict(self) -> dict:
        return {
            "layers": self.layers,
            "hidden": self.hidden,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "use_basis_decomposition": self.use_basis_decomposition,
            "num_bases": self.num_bases,
            "tie_interaction_weights": self.tie_interaction_weights,
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "RgcnConfig":
        return RgcnConfig(**doc)


def _weight_slot(rel: Relation, tie: bool) -> Relation:
    if tie and rel in TIED_ANALOGUE:
        return TIED_ANALOGUE[rel]
    return rel


class RgcnModel:
    """Trainable parameter set. Parameter creation order is fixed so that
    identical (config, dims) always produce identical initial weights."""

    def __init__(self, config: RgcnConfig, user_dim: int, content_dim: int):
        config.validate()
        self.config = config
        self.user_dim = user_dim
        self.content_dim = content_dim
        rng = np.random.default_rng(config.seed)

        def glorot(rows: int, cols: int) -> Var:
            limit = np.sqrt(6.0 / (rows + cols))
            return Var(rng.uniform(-limit, limit, size=(rows, cols)))

        h = config.hidden
        self.input_proj: dict[NodeKind, Var] = {}
        for kind in NodeKind:
            dim = user_dim if kind is NodeKind.USER else content_dim
            self.input_proj[kind] = glorot(dim, h)

        self._slots = sorted(
            {_weight_slot(r, config.tie_interaction_weights) for r in Relation},
            key=lambda r: r.value,
        )
        self.layers: list[dict] = []
        for _ in range(config.layers):
            layer: dict = {"self": glorot(h, h)}
            if config.use_basis_decomposition:
                layer["bases"] = [glorot(h, h) for _ in range(config.num_bases)]
                layer["coeffs"] = {
                    (slot, d): [
                        Var(rng.normal(0.0, 1.0 / np.sqrt(config.num_bases), (1, 1)))
                        for _ in range(config.num_bases)
                    ]
                    for slot in self._slots
                    for d in DIRECTIONS
                }
            else:
                layer["rel"] = {
                    (slot, d): glorot(h, h) for slot in self._slots for d in DIRECTIONS
                }
            self.layers.append(layer)
        self.classifier_w = glorot(h, NUM_CLASSES)
        self.classifier_b = Var(np.zeros((1, NUM_CLASSES)))

    def parameters(self) -> list[tuple[str, Var]]:
        """Unique named parameters in canonical order (tied weights appear once)."""
        params: list[tuple[str, Var]] = []
        for kind in NodeKind:
            params.append((f"input_proj.{kind.json_name}", self.input_proj[kind]))
        for li, layer in enumerate(self.layers):
            params.append((f"layer{li}.self", layer["self"]))
            if self.config.use_basis_decomposition:
                for bi, basis in enumerate(layer["bases"]):
                    params.append((f"layer{li}.basis{bi}", basis))
                for slot in self._slots:
                    for d in DIRECTIONS:
                        for bi, coeff in enumerate(layer["coeffs"][(slot, d)]):
                            params.append((f"layer{li}.coeff.{slot.value}.{d}.{bi}", coeff))
            else:
                for slot in self._slots:
                    for d in DIRECTIONS:
                        params.append((f"layer{li}.rel.{slot.value}.{d}", layer["rel"][(slot, d)]))
        params.append(("classifier.w", self.classifier_w))
        params.append(("classifier.b", self.classifier_b))
        return params

    def relation_weight(self, tape: Tape | None, layer_index: int, rel: Relation, direction: str) -> Var:
        slot = _weight_slot(rel, self.config.tie_interaction_weights)
        layer = self.layers[layer_index]
        if not self.config.use_basis_decomposition:
            return layer["rel"][(slot, direction)]
        coeffs = layer["coeffs"][(slot, direction)]
        w = ad.scalar_mul(tape, layer["bases"][0], coeffs[0])
        for basis, coeff in zip(layer["bases"][1:], coeffs[1:]):
            w = ad.add(tape, w, ad.scalar_mul(tape, basis, coeff))
        return w

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: var.data.copy() for name, var in self.parameters()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for name, var in self.parameters():
            var.data = snap[name].copy()


def clone_model(model: RgcnModel) -> RgcnModel:
    """Independent copy with identical weights (for protocol retraining)."""
    twin = RgcnModel(replace(model.config), model.user_dim, model.content_dim)
    twin.restore(model.snapshot())
    return twin


class NodeEmbeddings:
    """Final-layer embedding per node, in canonical node order."""

    def __init__(self, nodes: list[NodeId], matrix: np.ndarray):
        self.nodes = list(nodes)
        self.matrix = matrix
        self._row = {n: i for i, n in enumerate(self.nodes)}

    def __contains__(self, node: NodeId) -> bool:
        return node in self._row

    def vector(self, node: NodeId) -> np.ndarray:
        return self.matrix[self._row[node]]

    def subset(self, nodes: list[NodeId]) -> np.ndarray:
        return self.matrix[[self._row[n] for n in nodes]]


@dataclass
class EncodePlan:
    """Static message-passing layout for one node fragment."""

    nodes: list[NodeId]
    row_of: dict[NodeId, int]
    kind_rows: dict[NodeKind, np.ndarray]
    feature_vars: dict[NodeKind, Var]
    # (relation, direction) -> (src_rows, dst_rows, per-row 1/count coefficients)
    messages: dict[tuple[Relation, str], tuple[np.ndarray, np.ndarray, np.ndarray]]


def build_plan(g: InfoGraph, active) -> EncodePlan:
    nodes = sorted(active)
    if not nodes:
        raise ValidationError("encode over an empty node set")
    row_of = {n: i for i, n in enumerate(nodes)}
    n = len(nodes)
    kind_rows: dict[NodeKind, np.ndarray] = {}
    feature_vars: dict[NodeKind, Var] = {}
    for kind in NodeKind:
        members = [node for node in nodes if node.kind is kind]
        if not members:
            continue
        kind_rows[kind] = np.array([row_of[m] for m in members], dtype=np.intp)
        # per-node reads keep feature access auditable
        feature_vars[kind] = Var(np.stack([g.features(m) for m in members]))

    messages: dict[tuple[Relation, str], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    for rel in Relation:
        fwd_src, fwd_dst = [], []
        for src, dst in g.edges_of(rel):
            if src in row_of and dst in row_of:
                fwd_src.append(row_of[src])
                fwd_dst.append(row_of[dst])
        if not fwd_src:
            continue
        src_arr = np.array(fwd_src, dtype=np.intp)
        dst_arr = np.array(fwd_dst, dtype=np.intp)
        for direction, s_rows, d_rows in (("fwd", src_arr, dst_arr), ("inv", dst_arr, src_arr)):
            counts = np.bincount(d_rows, minlength=n).astype(np.float64)
            coeffs = np.zeros(n)
            nonzero = counts > 0
            coeffs[nonzero] = 1.0 / counts[nonzero]
            messages[(rel, direction)] = (s_rows, d_rows, coeffs)
    return EncodePlan(nodes, row_of, kind_rows, feature_vars, messages)


def encode_plan(model: RgcnModel, plan: EncodePlan, tape: Tape | None = None) -> Var:
    n = len(plan.nodes)
    h: Var | None = None
    for kind, rows in plan.kind_rows.items():
        projected = ad.matmul(tape, plan.feature_vars[kind], model.input_proj[kind])
        placed = ad.scatter_sum(tape, projected, rows, n)
        h = placed if h is None else ad.add(tape, h, placed)
    assert h is not None

    for li in range(model.config.layers):
        acc = ad.matmul(tape, h, model.layers[li]["self"])
        for (rel, direction), (src_rows, dst_rows, coeffs) in plan.messages.items():
            w = model.relation_weight(tape, li, rel, direction)
            transformed = ad.matmul(tape, h, w)
            msgs = ad.gather_rows(tape, transformed, src_rows)
            summed = ad.scatter_sum(tape, msgs, dst_rows, n)
            acc = ad.add(tape, acc, ad.row_scale(tape, summed, coeffs))
        h = ad.relu(tape, acc) if li < model.config.layers - 1 else acc
    return h


def encode(model: RgcnModel, g: InfoGraph, active) -> NodeEmbeddings:
    """Embed the given node fragment; messages never leave the active set."""
    plan = build_plan(g, active)
    h = encode_plan(model, plan, tape=None)
    return NodeEmbeddings(plan.nodes, h.data)


def classify_logits(model: RgcnModel, h: Var, rows: np.ndarray, tape: Tape | None = None) -> Var:
    picked = ad.gather_rows(tape, h, rows)
    return ad.bias_add(tape, ad.matmul(tape, picked, model.classifier_w), model.classifier_b)


def component_of(g: InfoGraph, seeds) -> set[NodeId]:
    """Nodes reachable from the seeds under bidirectional traversal."""
    seen = set(seeds)
    frontier = list(seeds)
    while frontier:
        node = frontier.pop()
        for nb in g.neighbors(node):
            if nb not in seen:
                seen.add(nb)
                frontier.append(nb)
    return seen


def predict_sources(
    model: RgcnModel,
    g: InfoGraph,
    sources,
    embeddings: NodeEmbeddings | None = None,
) -> dict[NodeId, tuple[np.ndarray, FactualityLabel]]:
    """Softmax probabilities and argmax label per source (ties go to LOW)."""
    sources = sorted(sources)
    for s in sources:
        if s.kind is not NodeKind.SOURCE:
            raise ValidationError(f"{s.key()} is not a source")
    if embeddings is None:
        embeddings = encode(model, g, component_of(g, sources))
    emb = embeddings.subset(sources)
    logits = emb @ model.classifier_w.data + model.classifier_b.data
    probs = ad.softmax(logits, axis=1)
    out = {}
    for i, node in enumerate(sources):
        label = FactualityLabel(int(np.argmax(probs[i])))
        out[node] = (probs[i], label)
    return out


class Adam:
    def __init__(self, params: list[Var], lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self) -> None:
        self.t += 1
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
            m_hat = self.m[i] / (1 - self.b1**self.t)
            v_hat = self.v[i] / (1 - self.b2**self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainResult:
    losses: list[float] = field(default_factory=list)
    dev_accuracy: list[float] = field(default_factory=list)
    best_epoch: int | None = None


def _split_accuracy(model: RgcnModel, g: InfoGraph, plan: EncodePlan, sources) -> float:
    h = encode_plan(model, plan, tape=None)
    preds = predict_sources(model, g, sources, NodeEmbeddings(plan.nodes, h.data))
    gold = {s: g.gold_labels[s] for s in sources}
    return float(np.mean([preds[s][1] == gold[s] for s in sources]))


def train(
    model: RgcnModel,
    g: InfoGraph,
    splits: SplitSpec,
    cfg: RgcnConfig | None = None,
    *,
    loss_partitions=(Partition.TRAIN,),
    dev_partition: Partition | None = None,
    epochs: int | None = None,
    dev_tie: str = "earliest",
    dev_graph: InfoGraph | None = None,
) -> TrainResult:
    """Optimize the classification cross-entropy over labeled split sources.

    Only sources in ``loss_partitions`` contribute loss terms; message passing
    covers the full event fragments those partitions belong to. When a dev
    partition is given, the parameters revert to the epoch with the best dev
    accuracy at the end; ``dev_tie`` picks the earliest or latest epoch among
    ties (protocol retraining uses latest so arms that saturate their dev set
    at different times still train equally long). ``dev_graph`` lets the dev
    score run on a different graph than the training one, e.g. checkpointing
    on interaction-free structure when the deployment target has none.
    """
    if dev_tie not in ("earliest", "latest"):
        raise ValidationError(f"dev_tie must be earliest or latest, got {dev_tie}")
    cfg = cfg or model.config
    violations = validate_splits(g, splits)
    if violations:
        raise ValidationError(f"{len(violations)} split violations; cannot train")

    loss_sources = sorted(
        s
        for part in loss_partitions
        for s in splits.nodes_in(part)
        if s.kind is NodeKind.SOURCE
    )
    if not loss_sources:
        raise EmptyTrainSet("no labeled sources in loss partitions")

    groups = sorted({p.event_group for p in loss_partitions})
    active: set[NodeId] = set()
    for group in groups:
        active |= set(splits.event_nodes(group))
    plan = build_plan(g, active)
    labels_by_source = {s: int(g.gold_labels[s]) for s in loss_sources}

    dev_plan = None
    dev_sources: list[NodeId] = []
    if dev_partition is not None:
        dev_sources = [s for s in splits.nodes_in(dev_partition) if s.kind is NodeKind.SOURCE]
        if not dev_sources:
            raise ValidationError(f"dev partition {dev_partition.value} has no sources")
        dev_source_graph = dev_graph if dev_graph is not None else g
        dev_plan = build_plan(dev_source_graph, splits.event_nodes(dev_partition.event_group))

    params = [p for _, p in model.parameters()]
    optimizer = Adam(params, lr=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    n_epochs = epochs if epochs is not None else cfg.epochs

    result = TrainResult()
    best_acc = -1.0
    best_snap: dict[str, np.ndarray] | None = None
    order = list(loss_sources)
    for epoch in range(n_epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            rows = np.array([plan.row_of[s] for s in batch], dtype=np.intp)
            labels = np.array([labels_by_source[s] for s in batch], dtype=np.intp)
            tape = Tape()
            h = encode_plan(model, plan, tape)
            logits = classify_logits(model, h, rows, tape)
            loss = ad.softmax_cross_entropy(tape, logits, labels)
            for p in params:
                p.zero_grad()
            for fv in plan.feature_vars.values():
                fv.zero_grad()
            ad.backward(tape, loss)
            optimizer.step()
            epoch_loss += loss.item() * len(batch)
        result.losses.append(epoch_loss / len(order))

        if dev_plan is not None:
            acc = _split_accuracy(model, g, dev_plan, dev_sources)
            result.dev_accuracy.append(acc)
            if acc > best_acc or (dev_tie == "latest" and acc == best_acc):
                best_acc = acc
                best_snap = model.snapshot()
                result.best_epoch = epoch

    if best_snap is not None:
        model.restore(best_snap)
    return result


# -- checkpoints ---------------------------------------------------------------

CHECKPOINT_FORMAT = "factgraph-rgcn-v1"


def save_checkpoint(model: RgcnModel, path) -> None:
    """One JSON document: config header plus base64 little-endian float64
    row-major payload per parameter matrix."""
    params = {}
    for name, var in model.parameters():
        payload = var.data.astype("<f8").tobytes(order="C")
        params[name] = {
            "shape": list(var.data.shape),
            "data": base64.b64encode(payload).decode("ascii"),
        }
    doc = {
        "format": CHECKPOINT_FORMAT,
        "config": model.config.to_json_dict(),
        "dims": {"user_dim": model.user_dim, "content_dim": model.content_dim},
        "params": params,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def load_checkpoint(path) -> RgcnModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValidationError(f"unknown checkpoint format: {doc.get('format')}")
    cfg = RgcnConfig.from_json_dict(doc["config"])
    model = RgcnModel(cfg, doc["dims"]["user_dim"], doc["dims"]["content_dim"])
    for name, var in model.parameters():
        entry = doc["params"][name]
        raw = np.frombuffer(base64.b64decode(entry["data"]), dtype="<f8")
        var.data = raw.reshape(entry["shape"]).astype(np.float64)
    return model
