import json

import pytest
from fastapi.testclient import TestClient

from arcforge.project import ProjectStore
from arcforge.service import create_app

PROMPT = "a cartographer maps the drowned quarter before the tide returns"


@pytest.fixture
def client(tmp_path):
    store = ProjectStore(tmp_path / "projects")
    return TestClient(create_app(store))


def create_project(client, **overrides):
    body = {"prompt": PROMPT, "arc": "cinderella", "node_budget": 7, "seed": 4}
    body.update(overrides)
    resp = client.post("/projects", json=body)
    assert resp.status_code == 201, resp.text
    return resp.json()


def test_create_and_get(client):
    doc = create_project(client)
    assert doc["revision"] == 1
    assert len(doc["graph"]["nodes"]) == 7
    got = client.get(f"/projects/{doc['id']}")
    assert got.status_code == 200
    assert got.json() == doc


def test_prompt_too_long_rejected(client):
    resp = client.post("/projects", json={"prompt": "word " * 31, "arc": "none"})
    assert resp.status_code == 422
    assert resp.json()["code"] == "PROMPT_TOO_LONG"


def test_baseline_arc_none(client):
    doc = create_project(client, arc="none")
    assert all(n["label"] is None for n in doc["graph"]["nodes"])


def test_unknown_project_404(client):
    resp = client.get("/projects/missing")
    assert resp.status_code == 404
    assert resp.json()["code"] == "NOT_FOUND"


def test_edit_and_conflict(client):
    doc = create_project(client)
    node_idx = doc["graph"]["nodes"][0]["idx"]
    edit = {"op": "rewrite_storyline", "idx": node_idx, "storyline": "rewritten"}
    ok = client.post(
        f"/projects/{doc['id']}/edits", json={"expected_revision": 1, "edit": edit}
    )
    assert ok.status_code == 200
    assert ok.json()["revision"] == 2

    stale = client.post(
        f"/projects/{doc['id']}/edits", json={"expected_revision": 1, "edit": edit}
    )
    assert stale.status_code == 409
    assert stale.json()["code"] == "CONFLICT"


def test_cycle_edit_rejected(client):
    doc = create_project(client)
    edges = doc["graph"]["edges"]
    ending_ids = {n["idx"] for n in doc["graph"]["nodes"]} - {e["from"] for e in edges}
    ending = sorted(ending_ids)[0]
    edit = {
        "op": "add_edge",
        "from": ending,
        "to": doc["graph"]["root"],
        "criteria": "talk to Mira",
    }
    resp = client.post(
        f"/projects/{doc['id']}/edits", json={"expected_revision": 1, "edit": edit}
    )
    assert resp.status_code == 422
    body = resp.json()
    assert body["code"] == "EDIT_REJECTED"
    assert body["details"]["violation"] == "CYCLE"


def test_finalize_export_flow(client):
    doc = create_project(client)
    fin = client.post(f"/projects/{doc['id']}/finalize")
    assert fin.status_code == 200
    body = fin.json()
    assert body["spec"] is not None
    assert body["reports"]["ok"] is True

    exp = client.get(f"/projects/{doc['id']}/export")
    assert exp.status_code == 200
    game = json.loads(exp.content)
    assert set(game) == {"playerData", "levelList"}
    assert len(game["levelList"]) == 7


def test_export_before_finalize_conflicts(client):
    doc = create_project(client)
    resp = client.get(f"/projects/{doc['id']}/export")
    assert resp.status_code == 409
    assert resp.json()["code"] == "NOT_FINALIZED"


def test_finalize_blocked_surfaces_violations(client):
    doc = create_project(client)
    edit = {"op": "relabel", "idx": doc["graph"]["root"], "label": "Fall"}
    client.post(f"/projects/{doc['id']}/edits", json={"expected_revision": 1, "edit": edit})
    resp = client.post(f"/projects/{doc['id']}/finalize")
    assert resp.status_code == 422
    body = resp.json()
    assert body["code"] == "FINALIZE_BLOCKED"
    assert any(v["code"] == "ARC_MISMATCH" for v in body["details"]["violations"])


def test_analysis_endpoints(client):
    doc = create_project(client, arc="tragedy", seed=2)
    missing = client.get(f"/projects/{doc['id']}/analysis/latest")
    assert missing.status_code == 404

    run = client.post(f"/projects/{doc['id']}/analysis", json={"runs": 3})
    assert run.status_code == 200
    report = run.json()
    assert report["runs"] == 3
    assert report["shape"]["matched"] is True

    latest = client.get(f"/projects/{doc['id']}/analysis/latest")
    assert latest.status_code == 200
    assert latest.json() == report


def test_generation_failed_maps_to_422(client):
    resp = client.post(
        "/projects",
        json={"prompt": PROMPT, "arc": "cinderella", "node_budget": 2},
    )
    assert resp.status_code == 422
    body = resp.json()
    assert body["code"] == "GENERATION_FAILED"
    assert body["details"]["violations"][0]["code"] == "NODE_BUDGET_TOO_SMALL"


def test_bad_arc_name_rejected(client):
    resp = client.post("/projects", json={"prompt": PROMPT, "arc": "spiral"})
    assert resp.status_code == 422
    assert resp.json()["code"] == "BAD_REQUEST"
