"""Evaluation metrics: accuracy, macro-F1, cluster purity, embedding change."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clustering import kmeans
from .errors import EmptyInput, TooFewItems, ValidationError
from .graph import FactualityLabel, NodeId

NUM_CLASSES = 3


def _as_aligned_arrays(preds: dict, gold: dict) -> tuple[np.ndarray, np.ndarray]:
    if not preds:
        raise EmptyInput("no predictions")
    if set(preds) != set(gold):
        raise ValidationError("prediction and gold key sets differ")
    keys = sorted(preds)
    p = np.array([int(preds[k]) for k in keys])
    g = np.array([int(gold[k]) for k in keys])
    return p, g


def accuracy(preds: dict, gold: dict) -> float:
    p, g = _as_aligned_arrays(preds, gold)
    return float((p == g).mean())


def macro_f1(preds: dict, gold: dict) -> float:
    """Unweighted mean of per-class F1 over all 3 classes.

    A class absent from both predictions and gold contributes F1 = 0 and is
    still averaged over the 3 classes.
    """
    p, g = _as_aligned_arrays(preds, gold)
    f1s = []
    for c in range(NUM_CLASSES):
        tp = int(np.sum((p == c) & (g == c)))
        fp = int(np.sum((p == c) & (g != c)))
        fn = int(np.sum((p != c) & (g == c)))
        denom = 2 * tp + fp + fn
        f1s.append(0.0 if denom == 0 else 2 * tp / denom)
    return float(np.mean(f1s))


def purity(embeddings: np.ndarray, gold: list[FactualityLabel], k: int, seed: int) -> float:
    """Cluster the embeddings and score majority-class assignment accuracy."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    n = embeddings.shape[0]
    if n == 0:
        raise TooFewItems("no items to cluster")
    if len(gold) != n:
        raise ValidationError("gold label count != embedding count")
    if n < k:
        raise TooFewItems(f"{n} items for k={k}")
    result = kmeans(embeddings, k, seed)
    labels = np.array([int(l) for l in gold])
    correct = 0
    for c in range(k):
        members = labels[result.assignment == c]
        if members.size:
            correct += int(np.bincount(members, minlength=NUM_CLASSES).max())
    return correct / n


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; identical arrays return exactly 1.0."""
    if np.array_equal(a, b):
        if not np.any(a):
            raise ValidationError("cosine of zero vectors")
        return 1.0
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValidationError("cosine of zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def embedding_change(before, after, scope: list[NodeId]) -> tuple[float, list[NodeId]]:
    """Mean cosine similarity (x100) of per-user embeddings before vs after.

    100 means unchanged; lower means more change. Users whose embedding is a
    zero vector in either snapshot are excluded and returned separately.
    """
    if not scope:
        raise EmptyInput("empty scope")
    sims = []
    excluded = []
    for node in scope:
        a = before.vector(node)
        b = after.vector(node)
        if not np.any(a) or not np.any(b):
            excluded.append(node)
            continue
        sims.append(cosine(a, b))
    if not sims:
        raise EmptyInput("all scope embeddings were zero vectors")
    return float(np.mean(sims) * 100.0), excluded


@dataclass
class EvalReport:
    """Metrics for one data split."""

    split: str
    accuracy: float
    macro_f1: float
    edges_added: int = 0
    purity: tuple[float, float, float] | None = None
    embedding_change: float | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, value in (("accuracy", self.accuracy), ("macro_f1", self.macro_f1)):
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} out of [0,1]: {value}")
        if self.edges_added < 0:
            raise ValidationError("edges_added must be non-negative")
        if self.purity is not None and not all(0.0 <= v <= 1.0 for v in self.purity):
            raise ValidationError("purity components out of [0,1]")

    def to_json_dict(self) -> dict:
        doc = {
            "split": self.split,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "edges_added": self.edges_added,
        }
        if self.purity is not None:
            doc["purity"] = list(self.purity)
        if self.embedding_change is not None:
            doc["embedding_change"] = self.embedding_change
        if self.extra:
            doc["extra"] = self.extra
        return doc

    @staticmethod
    def from_json_dict(doc: dict) -> "EvalReport":
        return EvalReport(
            split=doc["split"],
            accuracy=doc["accuracy"],
            macro_f1=doc["macro_f1"],
            edges_added=doc.get("edges_added", 0),
            purity=tuple(doc["purity"]) if "purity" in doc else None,
            embedding_change=doc.get("embedding_change"),
            extra=doc.get("extra", {}),
        )
