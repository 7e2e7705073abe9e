"""Report rendering: paper-style tables, delimited output, and figures.

The report path takes benchmark outcomes (one per seed) and emits four
artifacts side by side: report.json (machine-readable), report.csv (one row
per seed/arm/split), report.txt (aligned table), and PNG figures.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .experiments import BenchmarkConfig, SeedOutcome, summarize

ARMS = ("baseline", "p1", "p1_random", "p2_baseline", "p2", "p3")

ARM_LABELS = {
    "baseline": "No interactions",
    "p1": "P1 incorporate only (mismatch)",
    "p1_random": "P1 incorporate only (random)",
    "p2_baseline": "Train on E1-1, no interactions",
    "p2": "P2 train with interactions",
    "p3": "P3 train + deploy interactions",
}

SPLITS = ("e1_1", "e1_2", "e2_1", "e2_2")


def _arm_reports(outcome: SeedOutcome, arm: str) -> dict:
    if arm == "baseline":
        return outcome.baseline
    return getattr(outcome, arm).reports


def outcome_rows(outcomes: list[SeedOutcome]) -> list[dict]:
    rows = []
    for outcome in outcomes:
        for arm in ARMS:
            reports = _arm_reports(outcome, arm)
            for split, report in sorted(reports.items()):
                rows.append(
                    {
                        "seed": outcome.seed,
                        "arm": arm,
                        "split": split,
                        "accuracy": report.accuracy,
                        "macro_f1": report.macro_f1,
                        "edges_added": report.edges_added,
                    }
                )
    return rows


def mean_table(outcomes: list[SeedOutcome]) -> list[dict]:
    """One row per arm: mean accuracy/F1 per split plus total edges added."""
    table = []
    for arm in ARMS:
        row: dict = {"arm": ARM_LABELS[arm]}
        for split in SPLITS:
            accs, f1s = [], []
            for outcome in outcomes:
                reports = _arm_reports(outcome, arm)
                if split in reports:
                    accs.append(reports[split].accuracy)
                    f1s.append(reports[split].macro_f1)
            row[f"{split}_acc"] = float(np.mean(accs)) if accs else None
            row[f"{split}_f1"] = float(np.mean(f1s)) if f1s else None
        if arm == "baseline":
            row["edges"] = 0
        else:
            row["edges"] = int(
                round(np.mean([getattr(o, arm).edges_added for o in outcomes]))
            )
        table.append(row)
    return table


def render_text_table(outcomes: list[SeedOutcome]) -> str:
    headers = ["Model"]
    for split in SPLITS:
        tag = split.replace("e", "E").replace("_", "-")
        headers += [f"{tag} Acc", f"{tag} F1"]
    headers.append("# Edges")

    lines = []
    rows = mean_table(outcomes)
    widths = [max(len(h), 34 if i == 0 else 9) for i, h in enumerate(headers)]

    def fmt_row(cells):
        return "  ".join(str(c).ljust(w) if i == 0 else str(c).rjust(w)
                         for i, (c, w) in enumerate(zip(cells, widths)))

    lines.append(fmt_row(headers))
    lines.append(fmt_row(["-" * w for w in widths]))
    for row in rows:
        cells = [row["arm"]]
        for split in SPLITS:
            acc, f1 = row[f"{split}_acc"], row[f"{split}_f1"]
            cells.append(f"{acc * 100:.2f}" if acc is not None else "-")
            cells.append(f"{f1 * 100:.2f}" if f1 is not None else "-")
        cells.append(row["edges"] if row["edges"] else "-")
        lines.append(fmt_row(cells))
    return "\n".join(lines) + "\n"


def _figure_accuracy(outcomes: list[SeedOutcome], path: Path) -> None:
    rows = mean_table(outcomes)
    arms = [r["arm"] for r in rows]
    fig, ax = plt.subplots(figsize=(9, 4.5))
    x = np.arange(len(SPLITS))
    width = 0.8 / len(arms)
    for i, row in enumerate(rows):
        values = [100 * (row[f"{s}_acc"] or 0) for s in SPLITS]
        ax.bar(x + i * width, values, width, label=arms[i])
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels([s.replace("e", "E").replace("_", "-") for s in SPLITS])
    ax.set_ylabel("accuracy (%)")
    ax.set_title("Mean accuracy by split and interaction protocol")
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _figure_improvement(outcomes: list[SeedOutcome], path: Path) -> None:
    seeds = [o.seed for o in outcomes]
    base = np.array([o.baseline["e2_1"].accuracy for o in outcomes])
    p1 = np.array([o.p1.reports["e2_1"].accuracy for o in outcomes])
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.axhline(0.0, color="gray", lw=0.8)
    ax.bar([str(s) for s in seeds], 100 * (p1 - base), color="#2c7fb8")
    ax.set_xlabel("seed")
    ax.set_ylabel("E2-1 accuracy gain (points)")
    ax.set_title("Protocol 1 gain over the no-interaction baseline")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _figure_purity(outcomes: list[SeedOutcome], path: Path) -> None:
    before = [o.purity_before for o in outcomes]
    after = [o.purity_after for o in outcomes]
    fig, ax = plt.subplots(figsize=(7, 4))
    x = np.arange(len(outcomes))
    ax.bar(x - 0.2, before, 0.4, label="before incorporation")
    ax.bar(x + 0.2, after, 0.4, label="after incorporation")
    ax.set_xticks(x)
    ax.set_xticklabels([str(o.seed) for o in outcomes])
    ax.set_xlabel("seed")
    ax.set_ylabel("user cluster purity")
    ax.set_title("Community purity on E2-1 users")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_reports(
    out_dir,
    outcomes: list[SeedOutcome],
    cfg: BenchmarkConfig | None = None,
) -> dict:
    """Emit report.json / report.csv / report.txt plus figures. Returns the
    JSON document."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(outcomes)
    doc = {
        "config": cfg.to_json_dict() if cfg is not None else None,
        "summary": summary,
        "outcomes": [o.to_json_dict() for o in outcomes],
    }
    (out / "report.json").write_text(
        json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )

    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["seed", "arm", "split", "accuracy", "macro_f1", "edges_added"]
        )
        writer.writeheader()
        writer.writerows(outcome_rows(outcomes))

    text = render_text_table(outcomes)
    stats = summary
    text += "\n"
    text += (
        f"P1 E2-1 gain: {100 * stats['p1_improvement_mean']:+.2f} points "
        f"(improved on {stats['p1_improved_seeds']}/{len(outcomes)} seeds)\n"
        f"Mismatch vs random (E2-1 acc): {100 * stats['mismatch_vs_random_mean_gap']:+.2f} points\n"
        f"P2 vs no-interaction train (E2-1 acc): {100 * stats['p2_vs_train_baseline_gap']:+.2f} points\n"
        f"P3 beats P2 on E2-1: {stats['p3_beats_p2_seeds']}/{len(outcomes)} seeds\n"
        f"User purity (E2-1): {stats['purity_before_mean']:.3f} -> {stats['purity_after_mean']:.3f}\n"
        f"Embedding change after incorporation: {stats['embedding_change_mean']:.2f}% (100 = unchanged)\n"
    )
    (out / "report.txt").write_text(text, encoding="utf-8")

    figures = out / "figures"
    figures.mkdir(exist_ok=True)
    _figure_accuracy(outcomes, figures / "accuracy_by_split.png")
    _figure_improvement(outcomes, figures / "p1_gain_by_seed.png")
    _figure_purity(outcomes, figures / "purity_before_after.png")
    return doc


def load_outcomes(path) -> tuple[list[SeedOutcome], BenchmarkConfig | None]:
    """Rehydrate outcomes from a report.json or a benchmark outcomes file."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    cfg = BenchmarkConfig.from_json_dict(doc["config"]) if doc.get("config") else None
    outcomes = [SeedOutcome.from_json_dict(o) for o in doc["outcomes"]]
    return outcomes, cfg
