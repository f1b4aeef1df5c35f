import json

import httpx
import pytest

from arcforge.backends import RemoteBackend
from arcforge.cli import EXIT_BACKEND, EXIT_OK, EXIT_VALIDATION, main
from arcforge.errors import BackendError

PROMPT = "a stonemason repairs the bell tower before the winter fair"


def run(tmp_path, *argv):
    return main(["--store", str(tmp_path / "projects"), *argv])


def generate(tmp_path, capsys, arc="cinderella", seed="5", nodes="7"):
    code = run(
        tmp_path,
        "generate",
        "--prompt",
        PROMPT,
        "--arc",
        arc,
        "--seed",
        seed,
        "--nodes",
        nodes,
    )
    assert code == EXIT_OK
    out = capsys.readouterr().out
    return out.split()[1]  # "project <id> (revision 1)"


def test_generate_finalize_export_simulate(tmp_path, capsys):
    project_id = generate(tmp_path, capsys)

    assert run(tmp_path, "finalize", "--project", project_id) == EXIT_OK
    capsys.readouterr()

    out_file = tmp_path / "story.game.json"
    assert run(tmp_path, "export", "--project", project_id, "--out", str(out_file)) == EXIT_OK
    game = json.loads(out_file.read_text())
    assert set(game) == {"playerData", "levelList"}
    capsys.readouterr()

    assert run(tmp_path, "simulate", "--project", project_id) == EXIT_OK
    assert "traversable" in capsys.readouterr().out


def test_simulate_single_path_trace(tmp_path, capsys):
    project_id = generate(tmp_path, capsys)
    run(tmp_path, "finalize", "--project", project_id)
    capsys.readouterr()

    store_dir = tmp_path / "projects"
    doc = json.loads((store_dir / project_id / "project.json").read_text())
    edges = {e["from"]: e["to"] for e in doc["graph"]["edges"]}
    path = [doc["graph"]["root"]]
    while path[-1] in edges:
        path.append(edges[path[-1]])
    trace_file = tmp_path / "trace.jsonl"
    code = run(
        tmp_path,
        "simulate",
        "--project",
        project_id,
        "--path",
        ",".join(map(str, path)),
        "--out",
        str(trace_file),
    )
    assert code == EXIT_OK
    lines = trace_file.read_text().strip().splitlines()
    assert json.loads(lines[-1])["kind"] == "End"


def test_edit_conflict_exit_code(tmp_path, capsys):
    project_id = generate(tmp_path, capsys)
    edit = json.dumps({"op": "rewrite_storyline", "idx": 0, "storyline": "changed"})
    assert run(tmp_path, "edit", "--project", project_id, "--edit", edit) == EXIT_OK
    code = run(
        tmp_path,
        "edit",
        "--project",
        project_id,
        "--edit",
        edit,
        "--expected-revision",
        "1",
    )
    assert code == EXIT_VALIDATION


def test_generate_validation_failure_exit_code(tmp_path, capsys):
    code = run(
        tmp_path,
        "generate",
        "--prompt",
        PROMPT,
        "--arc",
        "cinderella",
        "--nodes",
        "2",
    )
    assert code == EXIT_VALIDATION


def test_analyze_writes_report(tmp_path, capsys):
    project_id = generate(tmp_path, capsys, arc="icarus", seed="11")
    report_file = tmp_path / "analysis.json"
    code = run(
        tmp_path,
        "analyze",
        "--project",
        project_id,
        "--runs",
        "3",
        "--out",
        str(report_file),
    )
    assert code == EXIT_OK
    report = json.loads(report_file.read_text())
    assert report["shape"]["matched"] is True


# ---------------------------------------------------------------------------
# Remote backend wire format
# ---------------------------------------------------------------------------


def test_remote_backend_chat_completions():
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen["url"] = str(request.url)
        seen["auth"] = request.headers.get("authorization")
        seen["body"] = json.loads(request.content)
        return httpx.Response(
            200,
            json={"choices": [{"message": {"content": '{"storyline": "done"}'}}]},
        )

    backend = RemoteBackend(
        "https://llm.example/v1",
        api_key="sk-test",
        model="small-model",
        transport=httpx.MockTransport(handler),
    )
    out = backend.complete("system words", "user words", "revision")
    assert out == '{"storyline": "done"}'
    assert seen["url"] == "https://llm.example/v1/chat/completions"
    assert seen["auth"] == "Bearer sk-test"
    assert seen["body"]["model"] == "small-model"
    assert seen["body"]["messages"][0] == {"role": "system", "content": "system words"}
    assert seen["body"]["messages"][1]["role"] == "user"


def test_remote_backend_retries_then_fails():
    calls = []

    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(1)
        return httpx.Response(503, text="overloaded")

    backend = RemoteBackend(
        "https://llm.example/v1",
        api_key="k",
        model="m",
        retries=2,
        transport=httpx.MockTransport(handler),
    )
    backend2 = backend
    import arcforge.backends as b

    # Skip the real sleep during retry.
    original_sleep = b.time.sleep
    b.time.sleep = lambda s: None
    try:
        with pytest.raises(BackendError):
            backend2.complete("s", "u", "revision")
    finally:
        b.time.sleep = original_sleep
    assert len(calls) == 3


def test_remote_backend_non_retryable_error():
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(401, text="bad key")

    backend = RemoteBackend(
        "https://llm.example/v1",
        api_key="k",
        model="m",
        transport=httpx.MockTransport(handler),
    )
    with pytest.raises(BackendError) as exc:
        backend.complete("s", "u", "revision")
    assert "401" in str(exc.value)


def test_remote_backend_from_env(monkeypatch):
    monkeypatch.delenv("ARCFORGE_BASE_URL", raising=False)
    monkeypatch.delenv("ARCFORGE_API_KEY", raising=False)
    with pytest.raises(BackendError):
        RemoteBackend.from_env()
    monkeypatch.setenv("ARCFORGE_BASE_URL", "https://llm.example/v1")
    monkeypatch.setenv("ARCFORGE_API_KEY", "sk-x")
    monkeypatch.setenv("ARCFORGE_MODEL", "tiny")
    backend = RemoteBackend.from_env(timeout=12.0, retries=1)
    assert backend.model == "tiny"
    assert backend.timeout == 12.0
