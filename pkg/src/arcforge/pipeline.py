"""Chained generation: skeleton -> criteria -> per-node revision -> entities.

The chain decomposes generation into focused steps with validation between
them. Each step talks to a pluggable text backend through prompts that embed
a JSON context block; structured output is extracted and schema-checked, and
failures re-prompt with the error appended (bounded repair loop).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Protocol

import jsonschema

from .arcs import ArcDirection, ArcKind, ArcTemplate, assign_phases, canonical_template
from .backends import extract_json_block
from .entities import (
    ContinuityLedger,
    DifficultyParams,
    Door,
    GameSpec,
    Item,
    LevelEntities,
    LevelSpec,
    NextEntry,
    Npc,
    PlayerData,
    apply_difficulty,
    carry_over,
    validate_spec,
)
from .errors import (
    BackendError,
    EntityGenError,
    GenerationFailedError,
    ParseError,
    PreconditionError,
    RequestError,
    SchemaError,
    UnknownTriggerError,
)
from .graph import (
    StoryEdge,
    StoryGraph,
    StoryNode,
    TriggerKind,
    ValidationReport,
    Violation,
    linearize,
    parse_trigger,
    validate_graph,
)

log = logging.getLogger(__name__)

MAX_PROMPT_WORDS = 30
DEFAULT_SKELETON_ATTEMPTS = 3
DEFAULT_REPAIR_ATTEMPTS = 2


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    arc: ArcKind = ArcKind.NONE
    min_endings: int = 1
    node_budget: int = 7
    storyline_word_cap: int = 50

    def __post_init__(self):
        if len(self.prompt.split()) > MAX_PROMPT_WORDS:
            raise RequestError(
                "PROMPT_TOO_LONG",
                f"prompt must be at most {MAX_PROMPT_WORDS} words",
            )
        if not self.prompt.strip():
            raise RequestError("PROMPT_EMPTY", "prompt must be non-empty")
        if self.min_endings < 1:
            raise RequestError("BAD_MIN_ENDINGS", "min_endings must be >= 1")
        if self.node_budget < 1:
            raise RequestError("BAD_NODE_BUDGET", "node_budget must be >= 1")
        if self.storyline_word_cap < 1:
            raise RequestError("BAD_WORD_CAP", "storyline_word_cap must be >= 1")


class TextGenBackend(Protocol):
    name: str

    def complete(self, system_text: str, user_text: str, schema_hint: str) -> str: ...


@dataclass(frozen=True)
class MindReset:
    direction: ArcDirection
    instruction: str


MIND_RESETS: dict[ArcDirection, MindReset] = {
    ArcDirection.RISE: MindReset(
        ArcDirection.RISE,
        "Embrace an uplifting and hopeful tone, highlighting progress and "
        "positive transformation.",
    ),
    ArcDirection.FALL: MindReset(
        ArcDirection.FALL,
        "Adopt a more somber and challenging tone, emphasizing setbacks and "
        "internal or external conflicts.",
    ),
}


@dataclass
class ChainState:
    request: GenerationRequest
    graph: StoryGraph
    history: list[str] = field(default_factory=list)
    ledger: ContinuityLedger = field(default_factory=ContinuityLedger)


@dataclass
class PromptRecord:
    step: str
    system_text: str
    user_text: str
    response: str


def _ask(
    backend: TextGenBackend,
    step: str,
    system_text: str,
    user_text: str,
    schema_hint: str,
    prompt_log: list[PromptRecord] | None,
) -> str:
    try:
        response = backend.complete(system_text, user_text, schema_hint)
    except BackendError:
        raise
    except Exception as exc:
        raise BackendError(f"backend {backend.name} failed: {exc}") from exc
    if prompt_log is not None:
        prompt_log.append(PromptRecord(step, system_text, user_text, response))
    return response


# ---------------------------------------------------------------------------
# Structured-output parsing
# ---------------------------------------------------------------------------

SCHEMAS: dict[str, dict] = {
    "story_graph": {
        "type": "object",
        "required": ["nodes", "edges"],
        "properties": {
            "nodes": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "required": ["idx", "label", "storyline", "goal", "level_index"],
                    "properties": {
                        "idx": {"type": "integer"},
                        "label": {"enum": ["Rise", "Fall", None]},
                        "storyline": {"type": "string", "minLength": 1},
                        "goal": {"type": "string"},
                        "level_index": {"type": "integer", "minimum": 0},
                    },
                },
            },
            "edges": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["from", "to", "criteria"],
                    "properties": {
                        "from": {"type": "integer"},
                        "to": {"type": "integer"},
                        "criteria": {"type": "string", "minLength": 1},
                    },
                },
            },
        },
    },
    "revision": {
        "type": "object",
        "required": ["storyline"],
        "properties": {"storyline": {"type": "string", "minLength": 1}},
    },
    "level_entities": {
        "type": "object",
        "required": ["NPCs", "items", "doors"],
        "properties": {
            "NPCs": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["name", "desc", "dialogue", "atk", "ranged", "hp", "friend", "door"],
                    "properties": {
                        "name": {"type": "string", "minLength": 1},
                        "desc": {"type": "string"},
                        "dialogue": {"type": "array", "items": {"type": "string"}},
                        "atk": {"type": "number", "minimum": 0},
                        "ranged": {"type": "boolean"},
                        "hp": {"type": "number", "exclusiveMinimum": 0},
                        "friend": {"type": "boolean"},
                        "door": {"type": ["integer", "null"]},
                    },
                },
            },
            "items": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["name", "desc", "pickable", "atk", "hp"],
                    "properties": {
                        "name": {"type": "string", "minLength": 1},
                        "desc": {"type": "string"},
                        "pickable": {"type": "boolean"},
                        "atk": {"type": "number"},
                        "hp": {"type": "number"},
                    },
                },
            },
            "doors": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["idx", "sprite"],
                    "properties": {
                        "idx": {"type": "integer"},
                        "sprite": {"type": "string"},
                    },
                },
            },
        },
    },
    "player_data": {
        "type": "object",
        "required": ["playerData"],
        "properties": {
            "playerData": {
                "type": "object",
                "required": ["name", "health", "attack", "desc", "sprite"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "health": {"type": "number", "exclusiveMinimum": 0},
                    "attack": {"type": "number", "minimum": 0},
                    "desc": {"type": "string"},
                    "sprite": {"type": "string"},
                },
            }
        },
    },
}


def parse_structured_output(text: str, schema_id: str):
    """Extract the first well-formed JSON document and validate it.

    Tolerates code fences and prose before or after the document. Schema
    violations list dotted instance paths; for missing required properties
    the path names the absent field itself.
    """
    schema = SCHEMAS[schema_id]
    try:
        doc = extract_json_block(text)
    except ValueError as exc:
        raise ParseError(f"no structured document in backend output: {exc}") from exc
    validator = jsonschema.Draft202012Validator(schema)
    paths = []
    for err in validator.iter_errors(doc):
        prefix = ".".join(str(p) for p in err.absolute_path)
        if err.validator == "required":
            missing = [p for p in err.validator_value if p not in err.instance]
            for name in missing:
                paths.append(f"{prefix}.{name}" if prefix else name)
        else:
            paths.append(prefix or "(root)")
    if paths:
        raise SchemaError(sorted(set(paths)))
    return doc


# ---------------------------------------------------------------------------
# Skeleton generation
# ---------------------------------------------------------------------------


def _skeleton_feasible(req: GenerationRequest, segments: int) -> str | None:
    needed = segments + req.min_endings - 1
    if req.node_budget < needed:
        return (
            f"{segments} arc segments with {req.min_endings} endings need at "
            f"least {needed} nodes, budget is {req.node_budget}"
        )
    if req.min_endings >= 2 and req.node_budget < req.min_endings + 1:
        return "multiple endings need a root plus one node per ending"
    return None


def _graph_from_doc(doc: dict, arc: ArcKind) -> StoryGraph:
    nodes = tuple(
        StoryNode(
            idx=nd["idx"],
            label=ArcDirection(nd["label"]) if nd["label"] else None,
            storyline=nd["storyline"],
            goal=nd["goal"],
            level_index=nd["level_index"],
        )
        for nd in doc["nodes"]
    )
    edges = tuple(
        StoryEdge(src=ed["from"], dst=ed["to"], criteria=parse_trigger(ed["criteria"]))
        for ed in doc["edges"]
    )
    targets = {e.dst for e in edges}
    roots = sorted(n.idx for n in nodes if n.idx not in targets)
    root = roots[0] if roots else nodes[0].idx
    return StoryGraph(nodes=nodes, edges=edges, root=root, arc=arc)


def _skeleton_prompts(
    req: GenerationRequest, template: ArcTemplate | None, attempt: int, feedback: str
) -> tuple[str, str]:
    segments = [d.value for d in template.segments] if template else []
    system = (
        "You design branching game narratives. Produce a story graph as JSON "
        "with nodes [idx, label, storyline, goal, level_index] and edges "
        "[from, to, criteria]. Respond with JSON only."
    )
    arc_line = (
        f"Emotional arc: {req.arc.value} ({' -> '.join(segments)}). Every "
        "root-to-ending path must follow the arc segments in order."
        if segments
        else "Emotional arc: none. Leave every node label null."
    )
    user = (
        f"Narrative prompt: {req.prompt}\n"
        f"{arc_line}\n"
        f"Use exactly {req.node_budget} nodes and at least {req.min_endings} ending(s).\n"
        "Edge criteria must each be one actionable player interaction: talk to "
        "a named NPC, pick up a named item, or defeat a named enemy.\n"
        f"Keep each storyline under {req.storyline_word_cap} words.\n"
        + (f"Previous attempt was rejected: {feedback}\n" if feedback else "")
        + "Context:\n"
        + json.dumps(
            {
                "task": "skeleton",
                "prompt": req.prompt,
                "arc": req.arc.value,
                "segments": segments,
                "min_endings": req.min_endings,
                "node_budget": req.node_budget,
                "word_cap": req.storyline_word_cap,
                "attempt": attempt,
            }
        )
    )
    return system, user


def generate_skeleton(
    req: GenerationRequest,
    backend: TextGenBackend,
    max_attempts: int = DEFAULT_SKELETON_ATTEMPTS,
    prompt_log: list[PromptRecord] | None = None,
) -> StoryGraph:
    """Labeled story graph with trigger edges, validated against the request.

    Regenerates with the validation report appended for up to ``max_attempts``
    tries, then raises GenerationFailedError carrying the last report.
    """
    template = canonical_template(req.arc) if req.arc is not ArcKind.NONE else None
    reason = _skeleton_feasible(req, len(template.segments) if template else 1)
    if reason:
        report = ValidationReport(
            (Violation("NODE_BUDGET_TOO_SMALL", f"budget {req.node_budget}", reason),)
        )
        raise GenerationFailedError(f"infeasible request: {reason}", report)

    feedback = ""
    last_report: ValidationReport | None = None
    for attempt in range(1, max_attempts + 1):
        system, user = _skeleton_prompts(req, template, attempt, feedback)
        response = _ask(backend, "skeleton", system, user, "story_graph", prompt_log)
        try:
            doc = parse_structured_output(response, "story_graph")
            graph = _graph_from_doc(doc, req.arc)
        except (ParseError, SchemaError, UnknownTriggerError, ValueError, KeyError) as exc:
            feedback = str(exc)
            last_report = ValidationReport(
                (Violation("MALFORMED_OUTPUT", f"attempt {attempt}", str(exc)),)
            )
            log.warning("skeleton attempt %d unusable: %s", attempt, exc)
            continue
        report = validate_graph(
            graph, template, req.min_endings, req.storyline_word_cap
        )
        if report.ok:
            return graph
        last_report = report
        feedback = str(report)
        log.warning("skeleton attempt %d rejected: %s", attempt, report)
    raise GenerationFailedError(
        f"no valid skeleton after {max_attempts} attempts", last_report
    )


# ---------------------------------------------------------------------------
# Per-node revision
# ---------------------------------------------------------------------------


def revise_node(
    reset: MindReset,
    history: list[str],
    node: StoryNode,
    backend: TextGenBackend,
    word_cap: int = 50,
    intensity: float = 1.0,
    prompt_log: list[PromptRecord] | None = None,
) -> StoryNode:
    """Rewrite a node's storyline under the direction-specific tone instruction.

    The word cap is enforced here, not trusted to the model: one re-prompt on
    overrun, then hard truncation with a logged flag. Label and structure are
    never touched.
    """
    if node.label is None:
        raise PreconditionError(f"node {node.idx} has no arc label to revise under")
    if reset.direction is not node.label:
        raise PreconditionError(
            f"mind reset for {reset.direction.value} applied to a "
            f"{node.label.value} node"
        )
    system = (
        f"{reset.instruction} Rewrite the storyline of the current node. "
        "Respond as JSON: {\"storyline\": ...}."
    )
    feedback = ""
    for attempt in (1, 2):
        user = (
            "Polish the current story node, staying consistent with what came "
            "before.\n"
            + (f"Previous attempt was rejected: {feedback}\n" if feedback else "")
            + "Context:\n"
            + json.dumps(
                {
                    "task": "revise",
                    "idx": node.idx,
                    "label": node.label.value,
                    "storyline": node.storyline,
                    "goal": node.goal,
                    "history": list(history),
                    "word_cap": word_cap,
                    "intensity": intensity,
                    "attempt": attempt,
                }
            )
        )
        response = _ask(backend, "revise", system, user, "revision", prompt_log)
        doc = parse_structured_output(response, "revision")
        storyline = doc["storyline"].strip()
        words = storyline.split()
        if len(words) <= word_cap:
            return replace(node, storyline=storyline)
        feedback = f"storyline has {len(words)} words, cap is {word_cap}"
    log.warning(
        "node %d revision overran the %d-word cap twice; truncating", node.idx, word_cap
    )
    return replace(node, storyline=" ".join(words[:word_cap]))


def revision_intensity(
    template: ArcTemplate, node_level: int, total_levels: int
) -> float:
    """Position of a level within its phase run, in (0, 1]."""
    phases = assign_phases(template, total_levels)
    pos = 0
    for start, size in zip(phases.boundaries, phases.run_lengths):
        if start <= node_level < start + size:
            return (node_level - start + 1) / size
        pos += size
    return 1.0


# ---------------------------------------------------------------------------
# Entity generation
# ---------------------------------------------------------------------------


def _entities_from_doc(doc: dict) -> LevelEntities:
    return LevelEntities(
        npcs=tuple(
            Npc(
                name=n["name"],
                desc=n["desc"],
                dialogue=tuple(n["dialogue"]),
                atk=n["atk"],
                ranged=n["ranged"],
                hp=n["hp"],
                friend=n["friend"],
                door=n["door"],
            )
            for n in doc["NPCs"]
        ),
        items=tuple(
            Item(
                name=i["name"],
                desc=i["desc"],
                pickable=i["pickable"],
                atk=i["atk"],
                hp=i["hp"],
            )
            for i in doc["items"]
        ),
        doors=tuple(Door(d["idx"], d["sprite"]) for d in doc["doors"]),
    )


def _entity_problems(entity: LevelEntities, outgoing: list[StoryEdge]) -> list[str]:
    problems = []
    names = entity.names()
    if len(names) != len(set(names)):
        problems.append("entity names must be unique within the level")
    door_ids = {d.idx for d in entity.doors}
    for edge in outgoing:
        if edge.dst not in door_ids:
            problems.append(f"missing door to node {edge.dst}")
        trig = edge.criteria
        if trig.kind is TriggerKind.TALK_TO:
            if not any(n.name == trig.target for n in entity.npcs):
                problems.append(f"missing NPC {trig.target!r} for talk trigger")
        elif trig.kind is TriggerKind.DEFEAT:
            if not any(n.name == trig.target and not n.friend for n in entity.npcs):
                problems.append(f"missing hostile NPC {trig.target!r} for defeat trigger")
        elif trig.kind is TriggerKind.PICK_UP:
            if not any(i.name == trig.target and i.pickable for i in entity.items):
                problems.append(f"missing pickable item {trig.target!r} for pickup trigger")
    return problems


def generate_entities(
    node: StoryNode,
    state: ChainState,
    backend: TextGenBackend,
    difficulty_mode: str = "programmatic",
    repair_attempts: int = DEFAULT_REPAIR_ATTEMPTS,
    prompt_log: list[PromptRecord] | None = None,
) -> LevelEntities:
    """Entities for one level, consistent with its outgoing triggers and the
    continuity ledger. Schema or referential failures re-prompt with the
    error; after the repair budget the chain fails with EntityGenError.
    """
    if node.level_index > 0 and state.ledger.last_level_index < node.level_index - 1:
        raise PreconditionError(
            f"level {node.level_index} generated before its predecessors"
        )
    outgoing = state.graph.outgoing(node.idx)
    system = (
        "You instantiate game level entities. Respond as JSON with NPCs, "
        "items, and doors for the current story node."
    )
    ctx = {
        "task": "entities",
        "node": {
            "idx": node.idx,
            "label": node.label.value if node.label else None,
            "level_index": node.level_index,
            "storyline": node.storyline,
            "goal": node.goal,
        },
        "outgoing": [
            {
                "to": e.dst,
                "kind": e.criteria.kind.value,
                "target": e.criteria.target,
                "raw_text": e.criteria.raw_text,
            }
            for e in outgoing
        ],
        "history": list(state.history),
        "acquired_items": sorted(state.ledger.acquired_items),
        "player_desc": state.ledger.descriptors.get("player", ""),
        "difficulty_mode": difficulty_mode,
    }
    feedback = ""
    last_error = "no attempts made"
    for attempt in range(1, repair_attempts + 2):
        user = (
            "Populate this level. Every outgoing trigger target must exist "
            "among the generated entities; previously acquired items must not "
            "reappear as pickable.\n"
            + (f"Previous attempt was rejected: {feedback}\n" if feedback else "")
            + "Context:\n"
            + json.dumps({**ctx, "attempt": attempt})
        )
        response = _ask(backend, "entities", system, user, "level_entities", prompt_log)
        try:
            doc = parse_structured_output(response, "level_entities")
        except (ParseError, SchemaError) as exc:
            feedback = str(exc)
            last_error = feedback
            continue
        entity = _entities_from_doc(doc)
        problems = _entity_problems(entity, outgoing)
        if not problems:
            return entity
        feedback = "; ".join(problems)
        last_error = feedback
        log.warning("entities for node %d rejected: %s", node.idx, feedback)
    raise EntityGenError(
        f"entities for node {node.idx} invalid after {repair_attempts} repairs: {last_error}"
    )


def generate_player(
    req: GenerationRequest,
    backend: TextGenBackend,
    prompt_log: list[PromptRecord] | None = None,
) -> PlayerData:
    system = (
        "You define the player character. Respond as JSON with a playerData "
        "object holding name, health, attack, desc, sprite."
    )
    user = (
        "Create the player character for this story.\nContext:\n"
        + json.dumps({"task": "player", "prompt": req.prompt})
    )
    response = _ask(backend, "player", system, user, "player_data", prompt_log)
    doc = parse_structured_output(response, "player_data")["playerData"]
    return PlayerData(
        name=doc["name"],
        health=doc["health"],
        attack=doc["attack"],
        desc=doc["desc"],
        sprite=doc["sprite"],
    )


# ---------------------------------------------------------------------------
# Full chain: finalize a graph into a game spec
# ---------------------------------------------------------------------------


@dataclass
class ChainResult:
    graph: StoryGraph
    spec: GameSpec
    continuity: ValidationReport
    state: ChainState


def finalize_chain(
    req: GenerationRequest,
    graph: StoryGraph,
    backend: TextGenBackend,
    difficulty_mode: str = "programmatic",
    params: DifficultyParams | None = None,
    prompt_log: list[PromptRecord] | None = None,
) -> ChainResult:
    """Run revision, entity generation, difficulty, and continuity level-wise.

    Nodes are processed in linearized order; each node's revision sees the
    finalized texts of strictly earlier levels. In programmatic mode the
    difficulty post-pass scales hostile stats after generation; in
    prompt-only mode the backend's stats are trusted as-is.
    """
    params = params or DifficultyParams()
    template = canonical_template(req.arc) if req.arc is not ArcKind.NONE else None
    total_levels = max(n.level_index for n in graph.nodes) + 1

    state = ChainState(request=req, graph=graph, history=[], ledger=ContinuityLedger())
    player = generate_player(req, backend, prompt_log)

    finalized: list[tuple[int, str]] = []  # (level_index, storyline)
    revised_nodes: dict[int, StoryNode] = {}
    level_entities: dict[int, LevelEntities] = {}
    continuity: list[Violation] = []

    for node in linearize(graph):
        state.history = [text for lv, text in finalized if lv < node.level_index]
        if template is not None and node.label is not None:
            intensity = revision_intensity(template, node.level_index, total_levels)
            node = revise_node(
                MIND_RESETS[node.label],
                state.history,
                node,
                backend,
                word_cap=req.storyline_word_cap,
                intensity=intensity,
                prompt_log=prompt_log,
            )
        revised_nodes[node.idx] = node
        state.graph = replace(
            graph, nodes=tuple(revised_nodes.get(n.idx, n) for n in graph.nodes)
        )

        entity = generate_entities(
            node, state, backend, difficulty_mode=difficulty_mode,
            prompt_log=prompt_log,
        )
        if difficulty_mode == "programmatic" and node.label is not None:
            entity = apply_difficulty(entity, node.label, node.level_index, params)
        state.ledger, report = carry_over(state.ledger, node, entity)
        continuity.extend(report.violations)
        level_entities[node.idx] = entity
        finalized.append((node.level_index, node.storyline))

    final_graph = state.graph
    levels = tuple(
        LevelSpec(
            idx=node.idx,
            arc=node.label,
            storyline=node.storyline,
            next=tuple(
                NextEntry(e.dst, e.criteria.raw_text)
                for e in final_graph.outgoing(node.idx)
            ),
            entity=level_entities[node.idx],
        )
        for node in linearize(final_graph)
    )
    spec = GameSpec(player_data=player, level_list=levels)
    return ChainResult(
        graph=final_graph,
        spec=spec,
        continuity=ValidationReport(tuple(continuity)),
        state=state,
    )
