import numpy as np
import pytest

from factgraph.errors import EmptyInput, TooFewItems
from factgraph.graph import FactualityLabel, NodeId, NodeKind
from factgraph.metrics import (
    EvalReport,
    accuracy,
    cosine,
    embedding_change,
    macro_f1,
    purity,
)
from factgraph.rgcn import NodeEmbeddings

L, M, H = FactualityLabel.LOW, FactualityLabel.MIXED, FactualityLabel.HIGH


def keyed(labels):
    return {i: l for i, l in enumerate(labels)}


def test_perfect_predictions():
    gold = keyed([L, M, H, L])
    assert accuracy(gold, gold) == 1.0
    assert macro_f1(gold, gold) == 1.0


def test_all_one_class_on_balanced_gold():
    gold = keyed([L, M, H, L, M, H])
    preds = keyed([L] * 6)
    assert accuracy(preds, gold) == pytest.approx(1 / 3)


def test_empty_input():
    with pytest.raises(EmptyInput):
        accuracy({}, {})


def confusion_oracle(preds, gold):
    """Independent arithmetic from an explicit 3x3 confusion matrix."""
    cm = np.zeros((3, 3), dtype=int)
    for k in preds:
        cm[int(gold[k]), int(preds[k])] += 1
    acc = np.trace(cm) / cm.sum()
    f1s = []
    for c in range(3):
        tp = cm[c, c]
        prec = tp / cm[:, c].sum() if cm[:, c].sum() else 0.0
        rec = tp / cm[c, :].sum() if cm[c, :].sum() else 0.0
        f1s.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    return float(acc), float(np.mean(f1s))


def test_fixed_confusion_matrix_case():
    # confusion matrix [[2,1,0],[0,2,1],[1,0,2]] laid out as gold x pred
    gold = keyed([L, L, L, M, M, M, H, H, H])
    preds = keyed([L, L, M, M, M, H, H, H, L])
    acc_expected, f1_expected = confusion_oracle(preds, gold)
    assert accuracy(preds, gold) == pytest.approx(acc_expected, abs=1e-12)
    assert macro_f1(preds, gold) == pytest.approx(f1_expected, abs=1e-12)
    # frozen values from the confusion-matrix oracle
    assert accuracy(preds, gold) == pytest.approx(6 / 9, abs=1e-12)
    assert macro_f1(preds, gold) == pytest.approx(2 / 3, abs=1e-12)


@pytest.mark.parametrize("seed", range(25))
def test_metrics_match_confusion_oracle_randomized(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 40))
    gold = {i: FactualityLabel(int(v)) for i, v in enumerate(rng.integers(0, 3, n))}
    preds = {i: FactualityLabel(int(v)) for i, v in enumerate(rng.integers(0, 3, n))}
    acc_o, f1_o = confusion_oracle(preds, gold)
    assert abs(accuracy(preds, gold) - acc_o) < 1e-12
    assert abs(macro_f1(preds, gold) - f1_o) < 1e-12


def test_macro_f1_invariant_to_consistent_relabeling():
    rng = np.random.default_rng(1)
    gold = {i: FactualityLabel(int(v)) for i, v in enumerate(rng.integers(0, 3, 30))}
    preds = {i: FactualityLabel(int(v)) for i, v in enumerate(rng.integers(0, 3, 30))}
    perm = {L: H, M: L, H: M}
    gold_p = {k: perm[v] for k, v in gold.items()}
    preds_p = {k: perm[v] for k, v in preds.items()}
    assert macro_f1(preds, gold) == pytest.approx(macro_f1(preds_p, gold_p), abs=1e-12)
    assert accuracy(preds, gold) == pytest.approx(accuracy(preds_p, gold_p), abs=1e-12)


def test_purity_perfect_alignment():
    x = np.vstack([np.zeros((5, 2)), np.ones((5, 2)) * 10])
    gold = [L] * 5 + [H] * 5
    assert purity(x, gold, k=2, seed=0) == 1.0


def test_purity_lower_bounded_by_majority_class():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(30, 3))
    gold = [L] * 20 + [M] * 5 + [H] * 5
    p = purity(x, gold, k=3, seed=0)
    assert p >= 20 / 30 - 1e-12


def brute_force_purity(assignment, gold):
    total = 0
    for c in set(assignment.tolist()):
        members = [int(gold[i]) for i in range(len(gold)) if assignment[i] == c]
        counts = {v: members.count(v) for v in set(members)}
        total += max(counts.values())
    return total / len(gold)


def test_purity_matches_brute_force_fixture():
    # fixed 12-point, 2-cluster fixture
    x = np.array(
        [[0, 0], [0.1, 0], [0, 0.1], [0.2, 0.1], [0.1, 0.2], [0.05, 0.05],
         [5, 5], [5.1, 5], [5, 5.1], [5.2, 5.1], [5.1, 5.2], [5.05, 5.05]]
    )
    gold = [L, L, L, L, M, M, H, H, H, H, H, L]
    from factgraph.clustering import kmeans

    result = kmeans(x, 2, seed=3)
    expected = brute_force_purity(result.assignment, gold)
    assert purity(x, gold, k=2, seed=3) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(9 / 12)


def test_purity_too_few_items():
    with pytest.raises(TooFewItems):
        purity(np.zeros((2, 2)), [L, H], k=3, seed=0)


def emb(node_vecs):
    nodes = sorted(node_vecs)
    return NodeEmbeddings(nodes, np.array([node_vecs[n] for n in nodes], dtype=float))


def users(*vecs):
    return {NodeId(NodeKind.USER, i): list(v) for i, v in enumerate(vecs)}


def test_embedding_change_identity_is_exactly_100():
    e = emb(users([1.0, 2.0], [3.0, -4.0], [0.5, 0.5]))
    value, excluded = embedding_change(e, e, e.nodes)
    assert value == 100.0
    assert excluded == []


def test_embedding_change_antipodal():
    before = emb(users([1.0, 2.0], [3.0, -4.0]))
    after = emb({n: (-np.asarray(v)).tolist() for n, v in users([1.0, 2.0], [3.0, -4.0]).items()})
    value, _ = embedding_change(before, after, before.nodes)
    assert value == pytest.approx(-100.0)


def test_embedding_change_matches_cosine_arithmetic():
    b = users([1.0, 0.0], [1.0, 1.0], [0.0, 2.0])
    a = users([1.0, 1.0], [1.0, 0.0], [0.0, 4.0])
    before, after = emb(b), emb(a)
    expected = np.mean(
        [
            np.dot(b[n], a[n]) / (np.linalg.norm(b[n]) * np.linalg.norm(a[n]))
            for n in before.nodes
        ]
    )
    value, _ = embedding_change(before, after, before.nodes)
    assert value == pytest.approx(expected * 100, abs=1e-9)


def test_embedding_change_excludes_zero_vectors():
    before = emb(users([0.0, 0.0], [1.0, 1.0]))
    after = emb(users([1.0, 1.0], [1.0, 1.0]))
    value, excluded = embedding_change(before, after, before.nodes)
    assert value == 100.0
    assert excluded == [NodeId(NodeKind.USER, 0)]


def test_cosine_identical_exact():
    v = np.array([0.3, 0.7, -0.1])
    assert cosine(v, v) == 1.0


def test_eval_report_validation():
    r = EvalReport(split="e2_1", accuracy=0.5, macro_f1=0.4, edges_added=3)
    assert r.to_json_dict()["accuracy"] == 0.5
    with pytest.raises(Exception):
        EvalReport(split="x", accuracy=1.5, macro_f1=0.2)
