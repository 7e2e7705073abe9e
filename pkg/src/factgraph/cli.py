"""Command line driver for the full pipeline.

Stages: datagen -> train -> sample -> simulate -> run -> eval -> report, plus
`benchmark` (all stages over many seeds) and `serve` (the interaction HTTP
service). Every stage records input hashes in a manifest so reruns can detect
drifted inputs. Errors exit with code 2 (validation) or 3 (numerical
divergence) and print machine-readable JSON on stderr.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

import click

from .datagen import GenConfig, GroundTruth, degrade, generate
from .errors import DivergenceError, FactGraphError, ValidationError
from .experiments import (
    BenchmarkConfig,
    run_benchmark,
    simulated_proposals_for_split,
    solicit_pairs,
)
from .graph import (
    InfoGraph,
    NodeKind,
    Partition,
    SplitSpec,
    dumps_canonical,
    load_graph,
    save_graph,
)
from .interactions import (
    Protocol,
    ProtocolConfig,
    evaluate_splits,
    load_proposals,
    run_protocol,
    simulate_bulk,
    simulate_interactions,
    write_proposals,
)
from .rgcn import RgcnConfig, RgcnModel, load_checkpoint, save_checkpoint, train
from .sampler import FocalPair, LabelMode, PairCriterion, user_factuality
from .subgraph import SubgraphLimits, build_subgraph


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _record_stage(out_dir: Path, stage: str, inputs: list[Path], outputs: list[Path], extra=None):
    """Append stage provenance to manifest.json; warn when inputs drifted."""
    manifest_path = out_dir / "manifest.json"
    manifest = {}
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
    entry = {
        "inputs": {str(p): _sha256(Path(p)) for p in inputs if Path(p).exists()},
        "outputs": [str(p) for p in outputs],
    }
    if extra:
        entry.update(extra)
    previous = manifest.get(stage)
    if previous and previous.get("inputs") != entry["inputs"]:
        click.echo(f"warning: inputs for stage '{stage}' changed since last run", err=True)
    manifest[stage] = entry
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _load_json(path) -> dict:
    return json.loads(Path(path).read_text())


def _parse_partition(name: str) -> Partition:
    try:
        return Partition(name)
    except ValueError:
        raise ValidationError(f"unknown split '{name}' (use train/e1_1/e1_2/e2_1/e2_2)")


@click.group()
def cli():
    """Interactive graph learning for news source factuality."""


@cli.command("datagen")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None, help="overrides the config seed")
@click.option("--out", "out_dir", type=click.Path(), required=True)
def datagen_cmd(config_path, seed, out_dir):
    """Generate a synthetic multi-event graph with splits and ground truth."""
    cfg = GenConfig.from_json_dict(_load_json(config_path)) if config_path else GenConfig()
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g, splits, truth = generate(cfg)
    graph_path = out / "graph.json"
    truth_path = out / "ground_truth.json"
    save_graph(graph_path, g, splits)
    truth.save(truth_path)
    _record_stage(out, "datagen", [Path(config_path)] if config_path else [],
                  [graph_path, truth_path], {"seed": cfg.seed})
    click.echo(f"wrote {graph_path} ({g.edge_count} edges) and {truth_path}")


@cli.command("degrade")
@click.option("--graph", "graph_path", type=click.Path(exists=True), required=True)
@click.option("--truth", "truth_path", type=click.Path(exists=True), required=True)
@click.option("--breakage", type=float, required=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(), required=True)
def degrade_cmd(graph_path, truth_path, breakage, seed, out_path):
    """Remove intra-community edges on the eval events."""
    g, splits = load_graph(graph_path)
    truth = GroundTruth.load(truth_path)
    degraded = degrade(g, truth, breakage, seed=seed, splits=splits)
    save_graph(out_path, degraded, splits)
    removed = g.edge_count - degraded.edge_count
    _record_stage(Path(out_path).parent, "degrade",
                  [Path(graph_path), Path(truth_path)], [Path(out_path)],
                  {"seed": seed, "breakage": breakage, "removed": removed})
    click.echo(f"removed {removed} edges -> {out_path}")


@cli.command("train")
@click.option("--graph", "graph_path", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--dev-split", default="e1_1")
@click.option("--out", "out_path", type=click.Path(), required=True)
def train_cmd(graph_path, config_path, seed, epochs, dev_split, out_path):
    """Train the relational GCN on the training event."""
    g, splits = load_graph(graph_path)
    if splits is None:
        raise ValidationError("graph file carries no splits")
    cfg = RgcnConfig.from_json_dict(_load_json(config_path)) if config_path else RgcnConfig()
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if epochs is not None:
        cfg = replace(cfg, epochs=epochs)
    model = RgcnModel(cfg, g.user_dim, g.content_dim)
    result = train(model, g, splits, cfg, dev_partition=_parse_partition(dev_split))
    save_checkpoint(model, out_path)
    curve_path = Path(out_path).with_suffix(".losses.json")
    curve_path.write_text(json.dumps(
        {"losses": result.losses, "dev_accuracy": result.dev_accuracy,
         "best_epoch": result.best_epoch}) + "\n")
    _record_stage(Path(out_path).parent, "train", [Path(graph_path)],
                  [Path(out_path), curve_path], {"seed": cfg.seed})
    click.echo(
        f"loss {result.losses[0]:.4f} -> {result.losses[-1]:.4f}; "
        f"best dev acc {max(result.dev_accuracy) if result.dev_accuracy else float('nan'):.3f}; "
        f"checkpoint {out_path}"
    )


@cli.command("sample")
@click.option("--graph", "graph_path", type=click.Path(exists=True), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--criterion", type=click.Choice([c.value for c in PairCriterion]), required=True)
@click.option("--split", default="e2_1")
@click.option("--seed", type=int, default=0)
@click.option("--count", type=int, default=None, help="pair budget (default: all mismatch pairs)")
@click.option("--k", type=int, default=None, help="cluster count for the mismatch criterion")
@click.option("--out", "out_path", type=click.Path(), required=True)
def sample_cmd(graph_path, model_path, criterion, split, seed, count, k, out_path):
    """Choose focal user pairs for interaction."""
    g, splits = load_graph(graph_path)
    model = load_checkpoint(model_path)
    pairs = solicit_pairs(
        model, g, splits, _parse_partition(split), PairCriterion(criterion), seed, count, k=k
    )
    doc = [p.to_json_dict() | {"seed": seed} for p in pairs]
    Path(out_path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _record_stage(Path(out_path).parent, f"sample:{split}",
                  [Path(graph_path), Path(model_path)], [Path(out_path)],
                  {"seed": seed, "criterion": criterion})
    click.echo(f"{len(pairs)} focal pairs -> {out_path}")


@cli.command("simulate")
@click.option("--graph", "graph_path", type=click.Path(exists=True), required=True)
@click.option("--pairs", "pairs_path", type=click.Path(exists=True), default=None)
@click.option("--fraction", type=float, default=None,
              help="bulk mode: connect this fraction of same-label user pairs")
@click.option("--split", default="e2_1")
@click.option("--seed", type=int, default=0)
@click.option("--max-articles", type=int, default=6)
@click.option("--max-co-propagators", type=int, default=10)
@click.option("--out", "out_path", type=click.Path(), required=True)
def simulate_cmd(graph_path, pairs_path, fraction, split, seed, max_articles,
                 max_co_propagators, out_path):
    """Oracle interactions: same-gold-label users get connected.

    With --pairs, builds a sub-graph per focal pair and connects inside each;
    with --fraction, samples from all same-label pairs in the split.
    """
    g, splits = load_graph(graph_path)
    part = _parse_partition(split)
    if (pairs_path is None) == (fraction is None):
        raise ValidationError("pass exactly one of --pairs or --fraction")
    if fraction is not None:
        proposals = simulate_bulk(g, splits, part, fraction, seed)
    else:
        pairs = [FocalPair.from_json_dict(p) for p in _load_json(pairs_path)]
        limits = SubgraphLimits(max_articles, max_co_propagators)
        subgraphs = [build_subgraph(g, p, limits) for p in pairs]
        event_users = [n for n in splits.event_nodes(part.event_group)
                       if n.kind is NodeKind.USER]
        gold = user_factuality(g, None, event_users, LabelMode.GOLD)
        proposals = simulate_interactions(g, subgraphs, gold)
    Path(out_path).write_text("")
    write_proposals(out_path, proposals)
    _record_stage(Path(out_path).parent, f"simulate:{split}",
                  [Path(graph_path)] + ([Path(pairs_path)] if pairs_path else []),
                  [Path(out_path)], {"seed": seed})
    click.echo(f"{len(proposals)} proposals -> {out_path}")


@cli.command("run")
@click.option("--graph", "graph_path", type=click.Path(exists=True), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--protocol", type=click.Choice(["1", "2", "3"]), required=True)
@click.option("--proposals", "proposal_specs", multiple=True,
              help="split=path.jsonl, repeatable (e.g. e1_1=props.jsonl)")
@click.option("--retrain-epochs", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
def run_cmd(graph_path, model_path, protocol, proposal_specs, retrain_epochs, out_path):
    """Execute one evaluation protocol and write its report."""
    g, splits = load_graph(graph_path)
    model = load_checkpoint(model_path)
    proposals = {}
    for spec in proposal_specs:
        if "=" not in spec:
            raise ValidationError(f"--proposals expects split=path, got '{spec}'")
        split, path = spec.split("=", 1)
        proposals[_parse_partition(split)] = load_proposals(path)
    cfg = ProtocolConfig(int(protocol), retrain_epochs=retrain_epochs)
    result = run_protocol(model, g, splits, proposals, cfg)
    Path(out_path).write_text(json.dumps(result.to_json_dict(), sort_keys=True, indent=2) + "\n")
    _record_stage(Path(out_path).parent, f"run:p{protocol}",
                  [Path(graph_path), Path(model_path)], [Path(out_path)])
    for split, report in sorted(result.reports.items()):
        click.echo(f"{split}: acc {report.accuracy:.3f} f1 {report.macro_f1:.3f} "
                   f"edges {report.edges_added}")


@cli.command("eval")
@click.option("--graph", "graph_path", type=click.Path(exists=True), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--splits", "split_names", default="e1_1,e1_2,e2_1,e2_2")
@click.option("--out", "out_path", type=click.Path(), required=True)
def eval_cmd(graph_path, model_path, split_names, out_path):
    """Evaluate the model on the given splits without interactions."""
    g, splits = load_graph(graph_path)
    model = load_checkpoint(model_path)
    parts = [_parse_partition(s) for s in split_names.split(",") if s]
    reports = evaluate_splits(model, g, splits, parts)
    doc = {k: r.to_json_dict() for k, r in sorted(reports.items())}
    Path(out_path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    _record_stage(Path(out_path).parent, "eval",
                  [Path(graph_path), Path(model_path)], [Path(out_path)])
    for split, report in sorted(reports.items()):
        click.echo(f"{split}: acc {report.accuracy:.3f} f1 {report.macro_f1:.3f}")


@cli.command("benchmark")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seeds", default="0,1,2,3,4,5,6,7,8,9",
              help="comma list or a-b range of seeds")
@click.option("--out", "out_path", type=click.Path(), required=True)
def benchmark_cmd(config_path, seeds, out_path):
    """Run the full interaction benchmark (all protocols) over many seeds."""
    cfg = (BenchmarkConfig.from_json_dict(_load_json(config_path))
           if config_path else BenchmarkConfig())
    if "-" in seeds and "," not in seeds:
        lo, hi = seeds.split("-")
        seed_list = list(range(int(lo), int(hi) + 1))
    else:
        seed_list = [int(s) for s in seeds.split(",") if s]
    outcomes = run_benchmark(cfg, seed_list)
    doc = {"config": cfg.to_json_dict(), "outcomes": [o.to_json_dict() for o in outcomes]}
    Path(out_path).write_text(json.dumps(doc, sort_keys=True) + "\n")
    _record_stage(Path(out_path).parent, "benchmark",
                  [Path(config_path)] if config_path else [], [Path(out_path)],
                  {"seeds": seed_list})
    click.echo(f"{len(outcomes)} seeds -> {out_path}")


@cli.command("report")
@click.option("--outcomes", "outcomes_path", type=click.Path(exists=True), required=True,
              help="benchmark output file (or a previous report.json)")
@click.option("--out", "out_dir", type=click.Path(), required=True)
def report_cmd(outcomes_path, out_dir):
    """Render tables (json/csv/txt) and figures from benchmark outcomes."""
    from .report import load_outcomes, write_reports

    outcomes, cfg = load_outcomes(outcomes_path)
    write_reports(out_dir, outcomes, cfg)
    _record_stage(Path(out_dir), "report", [Path(outcomes_path)],
                  [Path(out_dir) / "report.json", Path(out_dir) / "report.csv",
                   Path(out_dir) / "report.txt"])
    click.echo((Path(out_dir) / "report.txt").read_text())


@cli.command("serve")
@click.option("--graph", "graph_path", type=click.Path(exists=True), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--data-dir", type=click.Path(), default="./service-data")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
@click.option("--static-dir", type=click.Path(), default=None,
              help="directory with the browser UI build to serve at /")
def serve_cmd(graph_path, model_path, data_dir, host, port, static_dir):
    """Serve interaction sub-graphs and collect edge proposals over HTTP."""
    import uvicorn

    from .service import create_app

    app = create_app(graph_path, model_path, data_dir, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


def main():
    try:
        cli(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(130)
    except DivergenceError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        sys.exit(3)
    except (ValidationError, FactGraphError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        sys.exit(2)


if __name__ == "__main__":
    main()
