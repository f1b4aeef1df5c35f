"""Branching story DAG: nodes, trigger edges, edits, and validation.

Graphs are immutable values; every edit builds a new graph. Validation never
throws — structural and arc-consistency problems come back as a
ValidationReport so callers (and the designer UI) can show all of them at
once.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum

from .arcs import ArcDirection, ArcKind, ArcTemplate
from .errors import CycleError, EditRejectedError, NotFoundError, UnknownTriggerError

DEFAULT_STORYLINE_WORD_CAP = 50
DEFAULT_PATH_CAP = 10000


class TriggerKind(Enum):
    TALK_TO = "talk_to"
    PICK_UP = "pick_up"
    DEFEAT = "defeat"


@dataclass(frozen=True)
class Trigger:
    """Actionable condition gating an edge: talk to, pick up, or defeat a target."""

    kind: TriggerKind
    target: str
    raw_text: str

    def __post_init__(self):
        if not self.target:
            raise ValueError("trigger target must be non-empty")


@dataclass(frozen=True)
class StoryNode:
    idx: int
    storyline: str
    goal: str
    level_index: int
    label: ArcDirection | None = None


@dataclass(frozen=True)
class StoryEdge:
    src: int
    dst: int
    criteria: Trigger


@dataclass(frozen=True)
class Violation:
    code: str
    ref: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(f"{v.code}[{v.ref}]: {v.message}" for v in self.violations)


@dataclass(frozen=True)
class StoryGraph:
    nodes: tuple[StoryNode, ...]
    edges: tuple[StoryEdge, ...]
    root: int
    arc: ArcKind = ArcKind.NONE

    def node(self, idx: int) -> StoryNode:
        for n in self.nodes:
            if n.idx == idx:
                return n
        raise NotFoundError(f"no node with idx {idx}")

    def has_node(self, idx: int) -> bool:
        return any(n.idx == idx for n in self.nodes)

    def outgoing(self, idx: int) -> list[StoryEdge]:
        return sorted(
            (e for e in self.edges if e.src == idx),
            key=lambda e: (e.dst, e.criteria.raw_text),
        )

    def endings(self) -> list[int]:
        """Nodes with out-degree 0, in idx order."""
        sources = {e.src for e in self.edges}
        return sorted(n.idx for n in self.nodes if n.idx not in sources)


# ---------------------------------------------------------------------------
# Structural checks
# ---------------------------------------------------------------------------


def _has_cycle(graph: StoryGraph) -> bool:
    # Kahn's algorithm over the declared node set; dangling edges are
    # reported separately and ignored here.
    ids = {n.idx for n in graph.nodes}
    indeg = {i: 0 for i in ids}
    adj: dict[int, list[int]] = {i: [] for i in ids}
    for e in graph.edges:
        if e.src in ids and e.dst in ids:
            adj[e.src].append(e.dst)
            indeg[e.dst] += 1
    queue = [i for i, d in indeg.items() if d == 0]
    seen = 0
    while queue:
        u = queue.pop()
        seen += 1
        for v in adj[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    return seen != len(ids)


def _compress_runs(labels: list[ArcDirection]) -> list[ArcDirection]:
    runs: list[ArcDirection] = []
    for lab in labels:
        if not runs or runs[-1] is not lab:
            runs.append(lab)
    return runs


def validate_graph(
    graph: StoryGraph,
    template: ArcTemplate | None = None,
    min_endings: int = 1,
    storyline_word_cap: int = DEFAULT_STORYLINE_WORD_CAP,
) -> ValidationReport:
    """Check structure and, if a template is given, per-path arc consistency.

    Every root-to-ending path's label sequence must run-compress to exactly
    the template's segments. Violations are collected, never raised.
    """
    violations: list[Violation] = []
    ids = [n.idx for n in graph.nodes]
    id_set = set(ids)

    if len(ids) != len(id_set):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        violations.append(
            Violation("DUPLICATE_IDX", str(dupes), "node idx values must be unique")
        )
    for n in graph.nodes:
        if len(n.storyline.split()) > storyline_word_cap:
            violations.append(
                Violation(
                    "STORYLINE_TOO_LONG",
                    f"node {n.idx}",
                    f"storyline exceeds {storyline_word_cap} words",
                )
            )
        if n.level_index < 0:
            violations.append(
                Violation("BAD_LEVEL", f"node {n.idx}", "level_index must be >= 0")
            )
    for e in graph.edges:
        if e.src == e.dst:
            violations.append(
                Violation("SELF_LOOP", f"edge {e.src}->{e.dst}", "edge endpoints equal")
            )
        for end in (e.src, e.dst):
            if end not in id_set:
                violations.append(
                    Violation(
                        "DANGLING_EDGE",
                        f"edge {e.src}->{e.dst}",
                        f"endpoint {end} does not exist",
                    )
                )

    if graph.root not in id_set:
        violations.append(
            Violation("ROOT_MISSING", f"node {graph.root}", "root idx not in graph")
        )
        return ValidationReport(tuple(violations))

    targets = {e.dst for e in graph.edges if e.src in id_set and e.dst in id_set}
    roots = sorted(i for i in id_set if i not in targets)
    if roots != [graph.root]:
        violations.append(
            Violation(
                "ROOT_VIOLATION",
                str(roots),
                f"expected a single in-degree-0 node {graph.root}, found {roots}",
            )
        )

    if _has_cycle(graph):
        violations.append(Violation("CYCLE", "graph", "graph contains a cycle"))
        return ValidationReport(tuple(violations))

    # Reachability from root.
    adj: dict[int, list[int]] = {i: [] for i in id_set}
    for e in graph.edges:
        if e.src in id_set and e.dst in id_set:
            adj[e.src].append(e.dst)
    reachable = set()
    stack = [graph.root]
    while stack:
        u = stack.pop()
        if u in reachable:
            continue
        reachable.add(u)
        stack.extend(adj[u])
    for i in sorted(id_set - reachable):
        violations.append(
            Violation("UNREACHABLE", f"node {i}", "not reachable from root")
        )

    endings = graph.endings()
    if len(endings) < min_endings:
        violations.append(
            Violation(
                "TOO_FEW_ENDINGS",
                str(endings),
                f"{len(endings)} endings, {min_endings} required",
            )
        )

    if template is not None and not violations:
        want = list(template.segments)
        for path in enumerate_paths(graph).paths:
            labels = [graph.node(i).label for i in path]
            if any(lab is None for lab in labels):
                violations.append(
                    Violation("ARC_MISMATCH", str(path), "path has unlabeled nodes")
                )
                continue
            if _compress_runs(labels) != want:
                violations.append(
                    Violation(
                        "ARC_MISMATCH",
                        str(path),
                        "label runs do not match template "
                        + "->".join(d.value for d in want),
                    )
                )

    return ValidationReport(tuple(violations))


# ---------------------------------------------------------------------------
# Path enumeration and linearization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathSet:
    paths: tuple[tuple[int, ...], ...]
    truncated: bool = False


def enumerate_paths(graph: StoryGraph, cap: int = DEFAULT_PATH_CAP) -> PathSet:
    """All root-to-ending paths in lexicographic edge order, capped."""
    if _has_cycle(graph):
        raise CycleError("cannot enumerate paths of a cyclic graph")
    id_set = {n.idx for n in graph.nodes}
    adj: dict[int, list[int]] = {i: [] for i in id_set}
    for e in graph.edges:
        if e.src in id_set and e.dst in id_set:
            adj[e.src].append(e.dst)
    for succ in adj.values():
        succ.sort()

    paths: list[tuple[int, ...]] = []
    truncated = False

    def walk(node: int, prefix: list[int]) -> bool:
        nonlocal truncated
        prefix.append(node)
        succ = adj[node]
        if not succ:
            if len(paths) >= cap:
                truncated = True
                prefix.pop()
                return False
            paths.append(tuple(prefix))
        else:
            for nxt in succ:
                if not walk(nxt, prefix):
                    prefix.pop()
                    return False
        prefix.pop()
        return True

    if graph.root in id_set:
        walk(graph.root, [])
    return PathSet(paths=tuple(paths), truncated=truncated)


def linearize(graph: StoryGraph) -> list[StoryNode]:
    """Nodes ordered by level_index, ties broken by idx."""
    return sorted(graph.nodes, key=lambda n: (n.level_index, n.idx))


# ---------------------------------------------------------------------------
# Edits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AddNode:
    node: StoryNode


@dataclass(frozen=True)
class RemoveNode:
    idx: int


@dataclass(frozen=True)
class AddEdge:
    src: int
    dst: int
    criteria: Trigger


@dataclass(frozen=True)
class RemoveEdge:
    src: int
    dst: int
    raw_text: str | None = None  # disambiguates parallel edges; None removes all


@dataclass(frozen=True)
class Relabel:
    idx: int
    label: ArcDirection | None


@dataclass(frozen=True)
class RewriteStoryline:
    idx: int
    storyline: str


@dataclass(frozen=True)
class RewriteCriteria:
    src: int
    dst: int
    criteria: Trigger


Edit = (
    AddNode
    | RemoveNode
    | AddEdge
    | RemoveEdge
    | Relabel
    | RewriteStoryline
    | RewriteCriteria
)


def _check_structural(graph: StoryGraph) -> None:
    """Reject edits that introduce cycles or dangling references."""
    ids = {n.idx for n in graph.nodes}
    for e in graph.edges:
        if e.src == e.dst:
            raise EditRejectedError("CYCLE", f"edge {e.src}->{e.dst} is a self loop")
        if e.src not in ids or e.dst not in ids:
            raise EditRejectedError(
                "DANGLING_EDGE", f"edge {e.src}->{e.dst} references a missing node"
            )
    if _has_cycle(graph):
        raise EditRejectedError("CYCLE", "edit would create a cycle")


def apply_edit(graph: StoryGraph, edit: Edit) -> StoryGraph:
    """Apply one edit, returning a new graph.

    Structural invariants (acyclicity, no dangling edges, root survives) are
    re-checked; a violating edit raises EditRejectedError and leaves the
    input untouched. Removing a node cascades to its incident edges.
    """
    if isinstance(edit, AddNode):
        if graph.has_node(edit.node.idx):
            raise EditRejectedError(
                "DUPLICATE_IDX", f"node {edit.node.idx} already exists"
            )
        out = replace(graph, nodes=graph.nodes + (edit.node,))
    elif isinstance(edit, RemoveNode):
        if not graph.has_node(edit.idx):
            raise NotFoundError(f"no node with idx {edit.idx}")
        if edit.idx == graph.root:
            raise EditRejectedError("ROOT_REMOVAL", "cannot remove the root node")
        out = replace(
            graph,
            nodes=tuple(n for n in graph.nodes if n.idx != edit.idx),
            edges=tuple(
                e for e in graph.edges if edit.idx not in (e.src, e.dst)
            ),
        )
    elif isinstance(edit, AddEdge):
        for end in (edit.src, edit.dst):
            if not graph.has_node(end):
                raise NotFoundError(f"no node with idx {end}")
        out = replace(
            graph, edges=graph.edges + (StoryEdge(edit.src, edit.dst, edit.criteria),)
        )
    elif isinstance(edit, RemoveEdge):
        keep = []
        removed = 0
        for e in graph.edges:
            match = e.src == edit.src and e.dst == edit.dst
            if match and edit.raw_text is not None:
                match = e.criteria.raw_text == edit.raw_text
            if match:
                removed += 1
            else:
                keep.append(e)
        if not removed:
            raise NotFoundError(f"no edge {edit.src}->{edit.dst}")
        out = replace(graph, edges=tuple(keep))
    elif isinstance(edit, Relabel):
        graph.node(edit.idx)
        out = replace(
            graph,
            nodes=tuple(
                replace(n, label=edit.label) if n.idx == edit.idx else n
                for n in graph.nodes
            ),
        )
    elif isinstance(edit, RewriteStoryline):
        graph.node(edit.idx)
        out = replace(
            graph,
            nodes=tuple(
                replace(n, storyline=edit.storyline) if n.idx == edit.idx else n
                for n in graph.nodes
            ),
        )
    elif isinstance(edit, RewriteCriteria):
        hits = [e for e in graph.edges if e.src == edit.src and e.dst == edit.dst]
        if not hits:
            raise NotFoundError(f"no edge {edit.src}->{edit.dst}")
        replaced = False
        edges = []
        for e in graph.edges:
            if not replaced and e.src == edit.src and e.dst == edit.dst:
                edges.append(StoryEdge(e.src, e.dst, edit.criteria))
                replaced = True
            else:
                edges.append(e)
        out = replace(graph, edges=tuple(edges))
    else:
        raise TypeError(f"unknown edit type {type(edit).__name__}")

    _check_structural(out)
    return out


# ---------------------------------------------------------------------------
# Trigger parsing
# ---------------------------------------------------------------------------

# Keyword-first with a synonym table; unknown phrasing is an explicit error.
_VERB_PATTERNS: list[tuple[TriggerKind, re.Pattern]] = [
    (TriggerKind.TALK_TO, re.compile(r"\b(?:talk|speak|chat|converse)\s+(?:to|with)\s+(.+)", re.I)),
    (TriggerKind.PICK_UP, re.compile(r"\b(?:pick\s+up|take|collect|grab|obtain|acquire)\s+(.+)", re.I)),
    (TriggerKind.DEFEAT, re.compile(r"\b(?:defeat|kill|slay|vanquish|beat)\s+(.+)", re.I)),
]
_NAMED = re.compile(r"\b(?:named|called)\s+(.+)$", re.I)
_ARTICLES = ("the ", "a ", "an ")


def parse_trigger(text: str) -> Trigger:
    """Parse natural-language criteria into a Trigger; raw text is preserved."""
    stripped = text.strip()
    if not stripped:
        raise UnknownTriggerError(text)
    body = stripped.rstrip(".!")
    for kind, pattern in _VERB_PATTERNS:
        m = pattern.search(body)
        if not m:
            continue
        rest = m.group(1).strip()
        named = _NAMED.search(rest)
        if named:
            target = named.group(1).strip()
        else:
            target = rest
            low = target.lower()
            for art in _ARTICLES:
                if low.startswith(art):
                    target = target[len(art):]
                    break
        target = target.strip(" \"'")
        if not target:
            raise UnknownTriggerError(text)
        return Trigger(kind=kind, target=target, raw_text=text)
    raise UnknownTriggerError(text)


# ---------------------------------------------------------------------------
# Serialization (canonical: stable ordering, fixed key order)
# ---------------------------------------------------------------------------


def _node_to_dict(n: StoryNode) -> dict:
    return {
        "idx": n.idx,
        "label": n.label.value if n.label else None,
        "storyline": n.storyline,
        "goal": n.goal,
        "level_index": n.level_index,
    }


def _edge_to_dict(e: StoryEdge) -> dict:
    return {
        "from": e.src,
        "to": e.dst,
        "criteria": {
            "kind": e.criteria.kind.value,
            "target": e.criteria.target,
            "raw_text": e.criteria.raw_text,
        },
    }


def graph_to_dict(graph: StoryGraph) -> dict:
    nodes = sorted(graph.nodes, key=lambda n: n.idx)
    edges = sorted(graph.edges, key=lambda e: (e.src, e.dst, e.criteria.raw_text))
    return {
        "arc": graph.arc.value,
        "root": graph.root,
        "nodes": [_node_to_dict(n) for n in nodes],
        "edges": [_edge_to_dict(e) for e in edges],
    }


def graph_from_dict(data: dict) -> StoryGraph:
    nodes = tuple(
        StoryNode(
            idx=nd["idx"],
            label=ArcDirection(nd["label"]) if nd.get("label") else None,
            storyline=nd["storyline"],
            goal=nd["goal"],
            level_index=nd["level_index"],
        )
        for nd in data["nodes"]
    )
    edges = tuple(
        StoryEdge(
            src=ed["from"],
            dst=ed["to"],
            criteria=Trigger(
                kind=TriggerKind(ed["criteria"]["kind"]),
                target=ed["criteria"]["target"],
                raw_text=ed["criteria"]["raw_text"],
            ),
        )
        for ed in data["edges"]
    )
    return StoryGraph(
        nodes=nodes, edges=edges, root=data["root"], arc=ArcKind(data["arc"])
    )


def dump_graph(graph: StoryGraph) -> bytes:
    """Canonical UTF-8 serialization; stable under load/dump round trips."""
    return (json.dumps(graph_to_dict(graph), ensure_ascii=False, indent=2) + "\n").encode(
        "utf-8"
    )


def load_graph(data: bytes | str) -> StoryGraph:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return graph_from_dict(json.loads(data))
