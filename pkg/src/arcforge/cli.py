"""Command-line entry points: generate, edit, finalize, export, simulate,
analyze, serve.

Exit codes: 0 success, 2 validation failure, 3 backend failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .arcs import ArcKind
from .errors import (
    ArcforgeError,
    BackendError,
    ConflictError,
    EditRejectedError,
    ExportError,
    FinalizeBlockedError,
    GenerationFailedError,
    NotFoundError,
    RequestError,
    UnknownTriggerError,
)
from .pipeline import GenerationRequest
from .project import ProjectStore, parse_edit
from .sim import check_traversability, simulate_path, trace_to_jsonl

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BACKEND = 3

_VALIDATION_ERRORS = (
    RequestError,
    GenerationFailedError,
    EditRejectedError,
    FinalizeBlockedError,
    ExportError,
    ConflictError,
    UnknownTriggerError,
    NotFoundError,
    ValueError,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arcforge",
        description="Emotional-arc-guided story graph and game level generation.",
    )
    parser.add_argument(
        "--store", default="projects", help="project store directory (default: projects)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="create a project with a fresh story graph")
    gen.add_argument("--prompt", required=True, help="narrative prompt, at most 30 words")
    gen.add_argument(
        "--arc",
        default="none",
        choices=[k.value for k in ArcKind],
        help="emotional arc kind",
    )
    gen.add_argument("--endings", type=int, default=1, help="minimum story endings")
    gen.add_argument("--nodes", type=int, default=7, help="node budget")
    gen.add_argument("--backend", default="template", choices=["template", "remote"])
    gen.add_argument("--seed", type=int, default=0)

    edit = sub.add_parser("edit", help="apply one graph edit")
    edit.add_argument("--project", required=True)
    edit.add_argument("--edit", required=True, help="edit JSON, e.g. {\"op\": \"relabel\", ...}")
    edit.add_argument(
        "--expected-revision",
        type=int,
        default=None,
        help="optimistic concurrency check (default: current revision)",
    )

    fin = sub.add_parser("finalize", help="run revision and entity generation")
    fin.add_argument("--project", required=True)

    exp = sub.add_parser("export", help="write the .game.json export")
    exp.add_argument("--project", required=True)
    exp.add_argument("--out", default=None, help="output file (default: <id>.game.json)")

    sim = sub.add_parser("simulate", help="simulate paths through a finalized project")
    sim.add_argument("--project", required=True)
    sim.add_argument("--path", default=None, help="comma-separated node idx list")
    sim.add_argument("--out", default=None, help="write the trace as JSON lines")

    ana = sub.add_parser("analyze", help="run the multi-story valence analysis")
    ana.add_argument("--project", required=True)
    ana.add_argument("--runs", type=int, default=10)
    ana.add_argument("--out", default=None, help="also write the report JSON here")

    srv = sub.add_parser("serve", help="serve the REST API")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    return parser


def _cmd_generate(store: ProjectStore, args) -> int:
    request = GenerationRequest(
        prompt=args.prompt,
        arc=ArcKind(args.arc),
        min_endings=args.endings,
        node_budget=args.nodes,
    )
    project = store.create(request, seed=args.seed, backend_name=args.backend)
    print(f"project {project.id} (revision {project.revision})")
    print(f"  arc={project.request.arc.value} nodes={len(project.graph.nodes)} "
          f"endings={len(project.graph.endings())}")
    return EXIT_OK


def _cmd_edit(store: ProjectStore, args) -> int:
    expected = args.expected_revision
    if expected is None:
        expected = store.get(args.project).revision
    project = store.commit_edit(args.project, parse_edit(json.loads(args.edit)), expected)
    print(f"project {project.id} now at revision {project.revision}")
    return EXIT_OK


def _cmd_finalize(store: ProjectStore, args) -> int:
    project = store.finalize(args.project)
    reports = project.reports or {}
    print(f"project {project.id} finalized (revision {project.revision})")
    for name in ("spec", "traversability", "continuity"):
        issues = reports.get(name, [])
        print(f"  {name}: {'ok' if not issues else f'{len(issues)} violation(s)'}")
        for v in issues:
            print(f"    {v['code']} [{v['ref']}] {v['message']}")
    return EXIT_OK if reports.get("ok") else EXIT_VALIDATION


def _cmd_export(store: ProjectStore, args) -> int:
    blob = store.export(args.project)
    out = args.out or f"{args.project}.game.json"
    with open(out, "wb") as fh:
        fh.write(blob)
    print(f"wrote {out} ({len(blob)} bytes)")
    return EXIT_OK


def _cmd_simulate(store: ProjectStore, args) -> int:
    project = store.get(args.project)
    if project.spec is None:
        print("project is not finalized", file=sys.stderr)
        return EXIT_VALIDATION
    if args.path:
        path = [int(p) for p in args.path.split(",")]
        state = simulate_path(project.spec, path)
        text = trace_to_jsonl(state.trace)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            print(text, end="")
        return EXIT_OK
    report = check_traversability(project.spec, project.graph)
    if report.ok:
        print("all paths traversable")
        return EXIT_OK
    for v in report.violations:
        print(f"{v.code} [{v.ref}] {v.message}")
    return EXIT_VALIDATION


def _cmd_analyze(store: ProjectStore, args) -> int:
    report = store.analyze(args.project, runs=args.runs)
    shape = report.get("shape")
    print(f"arc={report['arc']} runs={report['runs']} scorer={report['scorer']}")
    if shape:
        status = "matched" if shape["matched"] else "NOT matched"
        print(f"  mean trajectory {status}; slopes={shape['per_segment_slopes']}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, ensure_ascii=False, indent=2)
            fh.write("\n")
    if shape and not shape["matched"]:
        return EXIT_VALIDATION
    return EXIT_OK


def _cmd_serve(store: ProjectStore, args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(store), host=args.host, port=args.port)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    store = ProjectStore(args.store)
    handlers = {
        "generate": _cmd_generate,
        "edit": _cmd_edit,
        "finalize": _cmd_finalize,
        "export": _cmd_export,
        "simulate": _cmd_simulate,
        "analyze": _cmd_analyze,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](store, args)
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ArcforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
