"""File-backed project store: one directory per project, canonical documents.

A project owns the editable story graph (skeleton plus designer edits),
the generation request and seed, and, after finalization, the derived game
spec with its validation reports. Finalization is a pure function of
(request, seed, graph), so re-finalizing an unedited project reproduces the
export byte for byte. Mutations serialize behind a per-project lock and use
optimistic revision checks.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .arcs import ArcDirection, ArcKind, canonical_template
from .backends import RemoteBackend, TemplateBackend
from .entities import GameSpec, spec_from_dict, spec_to_dict, validate_spec
from .errors import (
    ConflictError,
    ExportError,
    FinalizeBlockedError,
    NotFoundError,
)
from .graph import (
    AddEdge,
    AddNode,
    Relabel,
    RemoveEdge,
    RemoveNode,
    RewriteCriteria,
    RewriteStoryline,
    StoryGraph,
    StoryNode,
    ValidationReport,
    apply_edit,
    graph_from_dict,
    graph_to_dict,
    linearize,
    parse_trigger,
    validate_graph,
)
from .pipeline import (
    GenerationRequest,
    PromptRecord,
    TextGenBackend,
    finalize_chain,
    generate_skeleton,
)
from .sim import check_traversability
from .valence import (
    LexiconScorer,
    Trajectory,
    build_analysis_report,
    story_trajectory,
    trajectories_to_csv,
)

DEFAULT_ANALYSIS_RUNS = 10


@dataclass
class Project:
    id: str
    seed: int
    backend: str
    request: GenerationRequest
    graph: StoryGraph
    revision: int
    spec: GameSpec | None = None
    reports: dict | None = None
    prompt_log: list[PromptRecord] = field(default_factory=list)


def make_backend(
    name: str, seed: int, timeout: float = 60.0, retries: int = 2
) -> TextGenBackend:
    if name == "template":
        return TemplateBackend(seed=seed)
    if name == "remote":
        return RemoteBackend.from_env(timeout=timeout, retries=retries)
    raise ValueError(f"unknown backend {name!r} (expected template or remote)")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _report_to_dict(report: ValidationReport) -> list[dict]:
    return [
        {"code": v.code, "ref": v.ref, "message": v.message} for v in report.violations
    ]


def project_to_dict(project: Project) -> dict:
    return {
        "id": project.id,
        "revision": project.revision,
        "seed": project.seed,
        "backend": project.backend,
        "request": {
            "prompt": project.request.prompt,
            "arc": project.request.arc.value,
            "min_endings": project.request.min_endings,
            "node_budget": project.request.node_budget,
            "storyline_word_cap": project.request.storyline_word_cap,
        },
        "graph": graph_to_dict(project.graph),
        "spec": spec_to_dict(project.spec) if project.spec else None,
        "reports": project.reports,
        "prompt_log": [
            {
                "step": r.step,
                "system_text": r.system_text,
                "user_text": r.user_text,
                "response": r.response,
            }
            for r in project.prompt_log
        ],
    }


def project_from_dict(data: dict) -> Project:
    req = data["request"]
    return Project(
        id=data["id"],
        seed=data["seed"],
        backend=data["backend"],
        request=GenerationRequest(
            prompt=req["prompt"],
            arc=ArcKind(req["arc"]),
            min_endings=req["min_endings"],
            node_budget=req["node_budget"],
            storyline_word_cap=req["storyline_word_cap"],
        ),
        graph=graph_from_dict(data["graph"]),
        revision=data["revision"],
        spec=spec_from_dict(data["spec"]) if data.get("spec") else None,
        reports=data.get("reports"),
        prompt_log=[
            PromptRecord(r["step"], r["system_text"], r["user_text"], r["response"])
            for r in data.get("prompt_log", [])
        ],
    )


def parse_edit(data: dict):
    """Wire-format edit payload -> graph edit value."""
    op = data.get("op")
    if op == "add_node":
        label = data.get("label")
        return AddNode(
            StoryNode(
                idx=data["idx"],
                label=ArcDirection(label) if label else None,
                storyline=data.get("storyline", ""),
                goal=data.get("goal", ""),
                level_index=data["level_index"],
            )
        )
    if op == "remove_node":
        return RemoveNode(idx=data["idx"])
    if op == "add_edge":
        return AddEdge(
            src=data["from"], dst=data["to"], criteria=parse_trigger(data["criteria"])
        )
    if op == "remove_edge":
        return RemoveEdge(
            src=data["from"], dst=data["to"], raw_text=data.get("criteria")
        )
    if op == "relabel":
        label = data.get("label")
        return Relabel(idx=data["idx"], label=ArcDirection(label) if label else None)
    if op == "rewrite_storyline":
        return RewriteStoryline(idx=data["idx"], storyline=data["storyline"])
    if op == "rewrite_criteria":
        return RewriteCriteria(
            src=data["from"], dst=data["to"], criteria=parse_trigger(data["criteria"])
        )
    raise ValueError(f"unknown edit op {op!r}")


# ---------------------------------------------------------------------------
# Store
# ---------------------------------------------------------------------------


class ProjectStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, project_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(project_id, threading.Lock())

    def _dir(self, project_id: str) -> Path:
        return self.root / project_id

    def _save(self, project: Project) -> None:
        path = self._dir(project.id)
        path.mkdir(parents=True, exist_ok=True)
        blob = json.dumps(project_to_dict(project), ensure_ascii=False, indent=2) + "\n"
        tmp = path / "project.json.tmp"
        tmp.write_text(blob, encoding="utf-8")
        os.replace(tmp, path / "project.json")

    def list_ids(self) -> list[str]:
        return sorted(
            p.name for p in self.root.iterdir() if (p / "project.json").exists()
        )

    def get(self, project_id: str) -> Project:
        path = self._dir(project_id) / "project.json"
        if not path.exists():
            raise NotFoundError(f"no project {project_id}")
        return project_from_dict(json.loads(path.read_text(encoding="utf-8")))

    # -- operations ----------------------------------------------------------

    def create(
        self,
        request: GenerationRequest,
        seed: int = 0,
        backend_name: str = "template",
        backend: TextGenBackend | None = None,
    ) -> Project:
        backend = backend or make_backend(backend_name, seed)
        prompt_log: list[PromptRecord] = []
        graph = generate_skeleton(request, backend, prompt_log=prompt_log)
        project = Project(
            id=uuid.uuid4().hex[:12],
            seed=seed,
            backend=backend_name,
            request=request,
            graph=graph,
            revision=1,
            prompt_log=prompt_log,
        )
        with self._lock(project.id):
            self._save(project)
        return project

    def commit_edit(self, project_id: str, edit, expected_revision: int) -> Project:
        with self._lock(project_id):
            project = self.get(project_id)
            if project.revision != expected_revision:
                raise ConflictError(expected_revision, project.revision)
            project.graph = apply_edit(project.graph, edit)
            project.revision += 1
            self._save(project)
            return project

    def finalize(
        self, project_id: str, backend: TextGenBackend | None = None
    ) -> Project:
        with self._lock(project_id):
            project = self.get(project_id)
            template = (
                canonical_template(project.request.arc)
                if project.request.arc is not ArcKind.NONE
                else None
            )
            report = validate_graph(
                project.graph,
                template,
                project.request.min_endings,
                project.request.storyline_word_cap,
            )
            if not report.ok:
                raise FinalizeBlockedError(report)
            backend = backend or make_backend(project.backend, project.seed)
            prompt_log: list[PromptRecord] = []
            result = finalize_chain(
                project.request, project.graph, backend, prompt_log=prompt_log
            )
            spec_report = validate_spec(result.spec, result.graph)
            traverse_report = check_traversability(result.spec, result.graph)
            project.spec = result.spec
            project.reports = {
                "spec": _report_to_dict(spec_report),
                "traversability": _report_to_dict(traverse_report),
                "continuity": _report_to_dict(result.continuity),
                "ok": spec_report.ok and traverse_report.ok and result.continuity.ok,
            }
            project.prompt_log.extend(prompt_log)
            project.revision += 1
            self._save(project)
            return project

    def export(self, project_id: str) -> bytes:
        from .entities import export_game_json

        project = self.get(project_id)
        if project.spec is None:
            raise ExportError(f"project {project_id} is not finalized")
        blob = export_game_json(project.spec, project.graph)
        out = self._dir(project_id) / "export.game.json"
        out.write_bytes(blob)
        return blob

    def analyze(
        self,
        project_id: str,
        runs: int = DEFAULT_ANALYSIS_RUNS,
        scorer=None,
        backend_factory=None,
    ) -> dict:
        """Multi-run valence study at the project's settings.

        Generates ``runs`` fresh stories (seeds seed..seed+runs-1), finalizes
        each, scores the revised storylines, and stores the mean-trajectory
        shape report plus a plot-ready CSV under analysis/.
        """
        with self._lock(project_id):
            project = self.get(project_id)
            scorer = scorer or LexiconScorer()
            factory = backend_factory or (
                lambda s: make_backend(project.backend, s)
            )
            template = (
                canonical_template(project.request.arc)
                if project.request.arc is not ArcKind.NONE
                else None
            )
            trajectories: list[Trajectory] = []
            for i in range(runs):
                backend = factory(project.seed + i)
                graph = generate_skeleton(project.request, backend)
                result = finalize_chain(project.request, graph, backend)
                nodes = linearize(result.graph)
                trajectories.append(story_trajectory(nodes, scorer))
            report = build_analysis_report(
                project.request.arc.value, trajectories, template, scorer.name
            )
            adir = self._dir(project_id) / "analysis"
            adir.mkdir(exist_ok=True)
            (adir / "latest.json").write_text(
                json.dumps(report, ensure_ascii=False, indent=2) + "\n",
                encoding="utf-8",
            )
            (adir / "latest.csv").write_text(
                trajectories_to_csv(project.request.arc.value, trajectories),
                encoding="utf-8",
            )
            return report

    def latest_analysis(self, project_id: str) -> dict:
        path = self._dir(project_id) / "analysis" / "latest.json"
        if not path.exists():
            raise NotFoundError(f"no analysis for project {project_id}")
        return json.loads(path.read_text(encoding="utf-8"))
