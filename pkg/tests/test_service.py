import json
import time

import pytest
from fastapi.testclient import TestClient

from factgraph.datagen import GenConfig, generate
from factgraph.graph import save_graph
from factgraph.rgcn import RgcnConfig, RgcnModel, save_checkpoint, train
from factgraph.service import create_app


@pytest.fixture(scope="module")
def service_env(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    cfg = GenConfig(
        seed=0,
        sources_per_class=6,
        users_per_event=40,
        articles_per_source_mean=2.0,
        user_dim=8,
        content_dim=8,
    )
    g, splits, truth = generate(cfg)
    graph_path = root / "graph.json"
    save_graph(graph_path, g, splits)
    rc = RgcnConfig(layers=2, hidden=8, epochs=10, seed=0, learning_rate=0.01)
    model = RgcnModel(rc, cfg.user_dim, cfg.content_dim)
    train(model, g, splits, rc)
    model_path = root / "model.ckpt"
    save_checkpoint(model, model_path)
    return root, graph_path, model_path


@pytest.fixture()
def client(service_env, tmp_path):
    root, graph_path, model_path = service_env
    app = create_app(graph_path, model_path, tmp_path / "data")
    with TestClient(app) as c:
        c.data_dir = tmp_path / "data"
        yield c


def new_session(client, count=3, split="e2_1", criterion="random"):
    resp = client.post(
        "/api/sessions",
        json={"split": split, "criterion": criterion, "count": count, "seed": 1},
    )
    assert resp.status_code == 200, resp.text
    return resp.json()


def test_session_serves_each_subgraph_once_then_204(client):
    info = new_session(client, count=3)
    served_ids = []
    for _ in range(info["queued"]):
        resp = client.get(f"/api/session/{info['session_id']}/next")
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["questions"] and len(doc["questions"]) == 5
        served_ids.append(doc["id"])
    assert len(set(served_ids)) == len(served_ids)
    resp = client.get(f"/api/session/{info['session_id']}/next")
    assert resp.status_code == 204


def test_unknown_session_404(client):
    assert client.get("/api/session/nope/next").status_code == 404


def first_user_pair(doc):
    users = [n["id"] for n in doc["nodes"] if n["kind"] == "user"]
    return users[0], users[1]


def test_submit_accept_and_duplicate(client):
    info = new_session(client)
    doc = client.get(f"/api/session/{info['session_id']}/next").json()
    src, dst = first_user_pair(doc)
    body = [{"subgraph_id": doc["id"], "src": src, "dst": dst, "relation": "interact_uu"}]
    resp = client.post(f"/api/session/{info['session_id']}/edges", json=body)
    assert resp.status_code == 200
    assert resp.json() == {"accepted": 1, "duplicate": 0, "rejected": 0}
    resp = client.post(f"/api/session/{info['session_id']}/edges", json=body)
    assert resp.json() == {"accepted": 0, "duplicate": 1, "rejected": 0}
    # durable log holds exactly the accepted proposal
    log = (client.data_dir / "interactions.jsonl").read_text().splitlines()
    assert len(log) == 1
    entry = json.loads(log[0])
    assert entry["src"] == src and entry["dst"] == dst


def test_submit_unserved_subgraph_409(client):
    info = new_session(client)
    body = [{"subgraph_id": "sg-deadbeef0000", "src": "user:0", "dst": "user:1",
             "relation": "interact_uu"}]
    resp = client.post(f"/api/session/{info['session_id']}/edges", json=body)
    assert resp.status_code == 409


def test_submit_endpoint_outside_subgraph_422(client):
    info = new_session(client)
    doc = client.get(f"/api/session/{info['session_id']}/next").json()
    inside = [n["id"] for n in doc["nodes"] if n["kind"] == "user"][0]
    body = [{"subgraph_id": doc["id"], "src": inside, "dst": "user:9999",
             "relation": "interact_uu"}]
    resp = client.post(f"/api/session/{info['session_id']}/edges", json=body)
    assert resp.status_code == 422


def test_submit_bad_signature_422(client):
    info = new_session(client)
    doc = client.get(f"/api/session/{info['session_id']}/next").json()
    users = [n["id"] for n in doc["nodes"] if n["kind"] == "user"]
    body = [{"subgraph_id": doc["id"], "src": users[0], "dst": users[1],
             "relation": "interact_aa"}]
    resp = client.post(f"/api/session/{info['session_id']}/edges", json=body)
    assert resp.status_code == 422


def test_graph_and_metrics_views(client):
    resp = client.get("/api/graph/e2_1")
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["split"] == "e2_1"
    assert doc["nodes"]
    resp = client.get("/api/metrics/e2_1")
    assert resp.status_code == 200
    assert 0.0 <= resp.json()["accuracy"] <= 1.0
    assert client.get("/api/metrics/bogus").status_code == 404


def wait_run(client, run_id, timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        doc = client.get(f"/api/runs/{run_id}").json()
        if doc["status"] != "running":
            return doc
        time.sleep(0.05)
    raise TimeoutError("run did not finish")


def test_protocol_run_endpoint(client):
    info = new_session(client)
    doc = client.get(f"/api/session/{info['session_id']}/next").json()
    src, dst = first_user_pair(doc)
    client.post(
        f"/api/session/{info['session_id']}/edges",
        json=[{"subgraph_id": doc["id"], "src": src, "dst": dst, "relation": "interact_uu"}],
    )
    resp = client.post("/api/runs", json={"protocol": 1})
    assert resp.status_code == 200
    run_id = resp.json()["run_id"]
    result = wait_run(client, run_id)
    assert result["status"] == "done", result
    report = result["report"]
    assert report["edges_added"] == 1
    assert client.get("/api/runs/missing").status_code == 404


def test_run_reports_match_log_counts(client):
    # two identical runs with the same log produce identical reports
    info = new_session(client)
    doc = client.get(f"/api/session/{info['session_id']}/next").json()
    src, dst = first_user_pair(doc)
    client.post(
        f"/api/session/{info['session_id']}/edges",
        json=[{"subgraph_id": doc["id"], "src": src, "dst": dst, "relation": "interact_uu"}],
    )
    r1 = wait_run(client, client.post("/api/runs", json={"protocol": 1}).json()["run_id"])
    r2 = wait_run(client, client.post("/api/runs", json={"protocol": 1}).json()["run_id"])
    assert r1["report"] == r2["report"]


def test_log_replay_reconstructs_state(service_env, tmp_path):
    root, graph_path, model_path = service_env
    data_dir = tmp_path / "data"
    app = create_app(graph_path, model_path, data_dir)
    with TestClient(app) as client:
        client.data_dir = data_dir
        info = new_session(client)
        doc = client.get(f"/api/session/{info['session_id']}/next").json()
        src, dst = first_user_pair(doc)
        client.post(
            f"/api/session/{info['session_id']}/edges",
            json=[{"subgraph_id": doc["id"], "src": src, "dst": dst,
                   "relation": "interact_uu"}],
        )
        before = client.app.state.engine.live_graph.edge_count

    # new service instance over the same data dir replays the log
    app2 = create_app(graph_path, model_path, data_dir)
    assert app2.state.engine.live_graph.edge_count == before
    assert len(app2.state.engine.accepted) == 1
