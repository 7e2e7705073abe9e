"""HTTP facade for interaction sessions, edge collection, and protocol runs.

Single-operator research service: no auth, JSON everywhere. Accepted edge
proposals are appended to a JSON-lines log and fsynced before the response;
replaying the log reconstructs the live graph exactly. Protocol runs execute
on a background thread, at most one retraining run at a time.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel

from .errors import FactGraphError, ValidationError
from .graph import (
    InfoGraph,
    NodeId,
    NodeKind,
    Partition,
    Relation,
    SplitSpec,
    load_graph,
)
from .interactions import (
    EdgeProposal,
    ProtocolConfig,
    evaluate_splits,
    incorporate,
    run_protocol,
)
from .rgcn import RgcnModel, encode, load_checkpoint, predict_sources
from .sampler import LabelMode, PairCriterion, user_factuality
from .subgraph import InteractionSubGraph, SubgraphLimits, attach_metadata, build_subgraph


@dataclass
class Session:
    id: str
    split: Partition
    criterion: PairCriterion
    interactor: str
    queue: list[str]
    served: set[str] = field(default_factory=set)
    cursor: int = 0


class ServiceState:
    def __init__(self, graph_path, model_path, data_dir, limits: SubgraphLimits | None = None):
        self.base_graph, self.splits = load_graph(graph_path)
        if self.splits is None:
            raise ValidationError("graph file carries no splits")
        self.model: RgcnModel = load_checkpoint(model_path)
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.log_path = self.data_dir / "interactions.jsonl"
        self.limits = limits or SubgraphLimits()
        self.lock = threading.Lock()
        self.run_lock = threading.Lock()
        self.sessions: dict[str, Session] = {}
        self.subgraphs: dict[str, InteractionSubGraph] = {}
        self.runs: dict[str, dict] = {}
        self._counter = 0
        # live graph = base graph + every accepted proposal so far
        self.live_graph = self.base_graph.copy()
        self.accepted: list[EdgeProposal] = []
        if self.log_path.exists():
            for line in self.log_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    proposal = EdgeProposal.from_json_dict(json.loads(line))
                    incorporate(self.live_graph, [proposal])
                    self.accepted.append(proposal)

    def next_id(self, prefix: str) -> str:
        self._counter += 1
        return f"{prefix}-{self._counter}"

    def append_durable(self, proposals: list[EdgeProposal]) -> None:
        with open(self.log_path, "a", encoding="utf-8") as fh:
            for p in proposals:
                fh.write(json.dumps(p.to_json_dict(), sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def proposals_by_event(self) -> dict[Partition, list[EdgeProposal]]:
        """Group logged proposals into the interaction half of their event."""
        by_part: dict[Partition, list[EdgeProposal]] = {}
        for p in self.accepted:
            group = self.splits.of(p.src).event_group
            part = Partition.E1_1 if group == "e1" else Partition.E2_1
            by_part.setdefault(part, []).append(p)
        return by_part


class SessionRequest(BaseModel):
    split: str
    criterion: str = "mismatch"
    count: int = 20
    interactor: str = "anonymous"
    seed: int = 0


class ProposalBody(BaseModel):
    subgraph_id: str
    src: str
    dst: str
    relation: str


class RunRequest(BaseModel):
    protocol: int
    retrain_epochs: int | None = None
    seed: int = 0


def create_app(graph_path, model_path, data_dir, static_dir=None,
               limits: SubgraphLimits | None = None) -> FastAPI:
    state = ServiceState(graph_path, model_path, data_dir, limits)
    app = FastAPI(title="factgraph interaction service")
    app.state.engine = state

    @app.post("/api/sessions")
    def create_session(req: SessionRequest):
        try:
            part = Partition(req.split)
            criterion = PairCriterion(req.criterion)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        with state.lock:
            from .experiments import solicit_pairs

            try:
                pairs = solicit_pairs(
                    state.model, state.live_graph, state.splits, part, criterion,
                    req.seed, req.count,
                )
            except FactGraphError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            frag = state.splits.event_nodes(part.event_group)
            emb = encode(state.model, state.live_graph, frag)
            sources = [n for n in frag if n.kind is NodeKind.SOURCE]
            preds = predict_sources(state.model, state.live_graph, sources, emb)
            scope = [n for n in frag if n.kind is NodeKind.USER]
            user_labels = user_factuality(state.live_graph, preds, scope, LabelMode.PREDICTED)
            queue = []
            for pair in pairs:
                sg = build_subgraph(state.live_graph, pair, state.limits)
                attach_metadata(state.live_graph, sg, preds=preds, user_labels=user_labels)
                state.subgraphs[sg.id] = sg
                queue.append(sg.id)
            session = Session(
                id=state.next_id("session"),
                split=part,
                criterion=criterion,
                interactor=req.interactor,
                queue=queue,
            )
            state.sessions[session.id] = session
        return {"session_id": session.id, "queued": len(queue)}

    def _get_session(session_id: str) -> Session:
        session = state.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    @app.get("/api/session/{session_id}/next")
    def next_subgraph(session_id: str):
        session = _get_session(session_id)
        with state.lock:
            if session.cursor >= len(session.queue):
                return Response(status_code=204)
            sg_id = session.queue[session.cursor]
            session.cursor += 1
            session.served.add(sg_id)
        return state.subgraphs[sg_id].to_json_dict()

    @app.post("/api/session/{session_id}/edges")
    def submit_edges(session_id: str, proposals: list[ProposalBody]):
        session = _get_session(session_id)
        parsed: list[EdgeProposal] = []
        for body in proposals:
            if body.subgraph_id not in session.served:
                raise HTTPException(
                    status_code=409,
                    detail=f"sub-graph {body.subgraph_id} was not served in this session",
                )
            sg = state.subgraphs[body.subgraph_id]
            try:
                proposal = EdgeProposal(
                    subgraph_id=body.subgraph_id,
                    src=NodeId.from_key(body.src),
                    dst=NodeId.from_key(body.dst),
                    relation=Relation(body.relation),
                    provenance="human",
                    interactor=session.interactor,
                    timestamp=time.time(),
                )
            except (FactGraphError, ValueError, KeyError) as exc:
                raise HTTPException(status_code=422, detail=f"invalid proposal: {exc}")
            sg_nodes = set(sg.nodes)
            if proposal.src not in sg_nodes or proposal.dst not in sg_nodes:
                raise HTTPException(
                    status_code=422,
                    detail=f"endpoint outside sub-graph {body.subgraph_id}",
                )
            sig = (proposal.src.kind, proposal.dst.kind)
            from .graph import RELATION_SIGNATURES

            if RELATION_SIGNATURES[proposal.relation] != sig:
                raise HTTPException(
                    status_code=422,
                    detail=f"{proposal.relation.value} cannot connect "
                    f"{proposal.src.kind.json_name} to {proposal.dst.kind.json_name}",
                )
            parsed.append(proposal)

        accepted, duplicate = 0, 0
        with state.lock:
            fresh = []
            for p in parsed:
                if state.live_graph.has_edge(p.src, p.dst, p.relation) or (
                    state.live_graph.has_edge(p.dst, p.src, p.relation)
                ):
                    duplicate += 1
                    continue
                incorporate(state.live_graph, [p])
                fresh.append(p)
                accepted += 1
            if fresh:
                state.append_durable(fresh)
                state.accepted.extend(fresh)
        return {"accepted": accepted, "duplicate": duplicate, "rejected": 0}

    @app.get("/api/graph/{split}")
    def graph_view(split: str):
        try:
            part = Partition(split)
        except ValueError:
            raise HTTPException(status_code=404, detail=f"unknown split {split}")
        nodes = state.splits.nodes_in(part)
        node_set = set(nodes)
        edges = [
            [s.key(), d.key(), r.value]
            for s, d, r in state.live_graph.edges()
            if s in node_set and d in node_set
        ]
        return {
            "split": split,
            "nodes": [n.key() for n in nodes],
            "edges": edges,
            "interaction_edges": state.live_graph.count_edges(
                [Relation.INTERACT_UU, Relation.INTERACT_UA,
                 Relation.INTERACT_AA, Relation.INTERACT_US]
            ),
        }

    @app.get("/api/metrics/{split}")
    def metrics_view(split: str):
        try:
            part = Partition(split)
        except ValueError:
            raise HTTPException(status_code=404, detail=f"unknown split {split}")
        reports = evaluate_splits(state.model, state.live_graph, state.splits, [part])
        return reports[part.value].to_json_dict()

    @app.post("/api/runs")
    def start_run(req: RunRequest):
        if not state.run_lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="a run is already in progress")
        try:
            cfg = ProtocolConfig(req.protocol, retrain_epochs=req.retrain_epochs)
            cfg.validate()
        except FactGraphError as exc:
            state.run_lock.release()
            raise HTTPException(status_code=400, detail=str(exc))
        run_id = state.next_id("run")
        state.runs[run_id] = {"status": "running"}

        def work():
            try:
                proposals = state.proposals_by_event()
                result = run_protocol(state.model, state.base_graph, state.splits,
                                      proposals, cfg)
                state.runs[run_id] = {"status": "done", "report": result.to_json_dict()}
            except Exception as exc:  # surfaced via the status endpoint
                state.runs[run_id] = {"status": "error", "message": str(exc)}
            finally:
                state.run_lock.release()

        threading.Thread(target=work, daemon=True).start()
        return {"run_id": run_id}

    @app.get("/api/runs/{run_id}")
    def run_status(run_id: str):
        run = state.runs.get(run_id)
        if run is None:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")
        return run

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
