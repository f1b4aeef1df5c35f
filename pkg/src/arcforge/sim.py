"""Headless playthrough simulation over exported game specs.

A desk-scale proxy for the real-time runtime: the greedy policy walks a
chosen graph path, satisfies each door's gating trigger (talk, pickup, or a
deterministic alternating combat exchange with the player striking first),
and records a replayable trace. Aggregate checks audit difficulty against
arc labels and verify that every path can actually be finished.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum

from .arcs import ArcDirection
from .entities import DifficultyParams, GameSpec, LevelSpec, PlayerData
from .errors import DefeatedError, DegenerateError, StuckError
from .graph import (
    StoryGraph,
    Trigger,
    TriggerKind,
    ValidationReport,
    Violation,
    enumerate_paths,
    parse_trigger,
)


class EventKind(Enum):
    TALK = "Talk"
    PICKUP = "Pickup"
    COMBAT = "Combat"
    DOOR_TRANSIT = "DoorTransit"
    END = "End"


@dataclass(frozen=True)
class TraceEvent:
    kind: EventKind
    subject: str
    level: int


@dataclass
class SimState:
    current: int
    player: PlayerData
    inventory: set[str] = field(default_factory=set)
    defeated: set[str] = field(default_factory=set)
    trace: list[TraceEvent] = field(default_factory=list)

    def snapshot(self) -> tuple:
        return (
            self.current,
            self.player.health,
            self.player.attack,
            frozenset(self.inventory),
            frozenset(self.defeated),
        )


@dataclass(frozen=True)
class DifficultyScore:
    level: int
    score: float


class Policy(Enum):
    GREEDY = "Greedy"


# ---------------------------------------------------------------------------
# Challenge scoring
# ---------------------------------------------------------------------------


def challenge_score(
    level: LevelSpec,
    player: PlayerData,
    params: DifficultyParams | None = None,
) -> DifficultyScore:
    """Hostile threat relative to player power.

    score = sum over hostile NPCs of atk * hp * (1 + ranged_weight if ranged)
    divided by player attack * health. Friendly NPCs contribute nothing.
    """
    p = params or DifficultyParams()
    power = player.attack * player.health
    if power == 0:
        raise DegenerateError("player attack * health is zero")
    total = 0.0
    for npc in level.entity.npcs:
        if npc.friend:
            continue
        total += npc.atk * npc.hp * (1 + (p.ranged_weight if npc.ranged else 0))
    return DifficultyScore(level=level.idx, score=total / power)


# ---------------------------------------------------------------------------
# Path simulation
# ---------------------------------------------------------------------------


def _resolve_trigger(state: SimState, level: LevelSpec, trigger: Trigger) -> None:
    if trigger.kind is TriggerKind.TALK_TO:
        npc = next((n for n in level.entity.npcs if n.name == trigger.target), None)
        if npc is None:
            raise StuckError(level.idx, trigger, f"no NPC {trigger.target!r} to talk to")
        state.trace.append(TraceEvent(EventKind.TALK, npc.name, level.idx))
    elif trigger.kind is TriggerKind.PICK_UP:
        item = next(
            (i for i in level.entity.items if i.name == trigger.target and i.pickable),
            None,
        )
        if item is None:
            raise StuckError(
                level.idx, trigger, f"no pickable item {trigger.target!r}"
            )
        if item.name not in state.inventory:
            state.inventory.add(item.name)
            state.player = replace(
                state.player,
                attack=state.player.attack + item.atk,
                health=state.player.health + item.hp,
            )
        state.trace.append(TraceEvent(EventKind.PICKUP, item.name, level.idx))
    elif trigger.kind is TriggerKind.DEFEAT:
        npc = next(
            (n for n in level.entity.npcs if n.name == trigger.target and not n.friend),
            None,
        )
        if npc is None:
            raise StuckError(
                level.idx, trigger, f"no hostile NPC {trigger.target!r} to defeat"
            )
        key = f"{level.idx}:{npc.name}"
        if key not in state.defeated:
            _fight(state, level.idx, npc)
            state.defeated.add(key)
        state.trace.append(TraceEvent(EventKind.COMBAT, npc.name, level.idx))


def _fight(state: SimState, level_idx: int, npc) -> None:
    # Alternating exchange, player strikes first.
    enemy_hp = npc.hp
    health = state.player.health
    while True:
        enemy_hp -= state.player.attack
        if enemy_hp <= 0:
            break
        health -= npc.atk
        if health <= 0:
            raise DefeatedError(level_idx)
    state.player = replace(state.player, health=health)


def simulate_path(
    spec: GameSpec,
    path: list[int],
    policy: Policy = Policy.GREEDY,
) -> SimState:
    """Walk one root-to-ending path, satisfying each door's gating trigger.

    Raises StuckError when a trigger cannot be satisfied and DefeatedError if
    combat kills the player. The final node emits an End event.
    """
    if policy is not Policy.GREEDY:
        raise ValueError(f"unsupported policy {policy}")
    if not path:
        raise ValueError("path must be non-empty")
    state = SimState(current=path[0], player=spec.player_data)
    for here, there in zip(path, path[1:]):
        level = spec.level(here)
        state.current = here
        entry = next((n for n in level.next if n.idx == there), None)
        if entry is None:
            raise ValueError(f"path step {here}->{there} has no transition")
        trigger = parse_trigger(entry.criteria)
        _resolve_trigger(state, level, trigger)
        if not any(d.idx == there for d in level.entity.doors):
            raise StuckError(here, trigger, f"no door from level {here} to {there}")
        state.trace.append(TraceEvent(EventKind.DOOR_TRANSIT, str(there), here))
        state.current = there
    final = spec.level(path[-1])
    state.trace.append(TraceEvent(EventKind.END, final.storyline[:24], final.idx))
    return state


def replay_trace(spec: GameSpec, trace: list[TraceEvent]) -> SimState:
    """Re-execute a recorded trace; used to check traces are deterministic."""
    if not trace:
        raise ValueError("empty trace")
    start = trace[0].level
    state = SimState(current=start, player=spec.player_data)
    for event in trace:
        level = spec.level(event.level)
        state.current = event.level
        if event.kind is EventKind.TALK:
            state.trace.append(event)
        elif event.kind is EventKind.PICKUP:
            item = next(i for i in level.entity.items if i.name == event.subject)
            if item.name not in state.inventory:
                state.inventory.add(item.name)
                state.player = replace(
                    state.player,
                    attack=state.player.attack + item.atk,
                    health=state.player.health + item.hp,
                )
            state.trace.append(event)
        elif event.kind is EventKind.COMBAT:
            npc = next(n for n in level.entity.npcs if n.name == event.subject)
            key = f"{level.idx}:{npc.name}"
            if key not in state.defeated:
                _fight(state, level.idx, npc)
                state.defeated.add(key)
            state.trace.append(event)
        elif event.kind is EventKind.DOOR_TRANSIT:
            state.current = int(event.subject)
            state.trace.append(event)
        elif event.kind is EventKind.END:
            state.trace.append(event)
    return state


def trace_to_jsonl(trace: list[TraceEvent]) -> str:
    """Line-delimited trace records, diff-friendly."""
    return (
        "\n".join(
            json.dumps({"kind": e.kind.value, "subject": e.subject, "level": e.level})
            for e in trace
        )
        + "\n"
    )


# ---------------------------------------------------------------------------
# Aggregate audits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DifficultyAudit:
    mean_fall: float | None
    mean_rise: float | None
    aligned: bool
    per_level: tuple[DifficultyScore, ...]


def audit_difficulty(
    spec: GameSpec,
    graph: StoryGraph,
    params: DifficultyParams | None = None,
) -> DifficultyAudit:
    """Mean challenge score by arc label; aligned iff Fall strictly exceeds
    Rise (or one group is absent)."""
    fall: list[float] = []
    rise: list[float] = []
    scores: list[DifficultyScore] = []
    for level in spec.level_list:
        node = graph.node(level.idx)
        score = challenge_score(level, spec.player_data, params)
        scores.append(score)
        if node.label is ArcDirection.FALL:
            fall.append(score.score)
        elif node.label is ArcDirection.RISE:
            rise.append(score.score)
    mean_fall = sum(fall) / len(fall) if fall else None
    mean_rise = sum(rise) / len(rise) if rise else None
    if mean_fall is None or mean_rise is None:
        aligned = True
    else:
        aligned = mean_fall > mean_rise
    return DifficultyAudit(
        mean_fall=mean_fall,
        mean_rise=mean_rise,
        aligned=aligned,
        per_level=tuple(scores),
    )


def check_traversability(
    spec: GameSpec,
    graph: StoryGraph,
    path_cap: int = 1000,
) -> ValidationReport:
    """Simulate every enumerated path; report stuck or fatal paths and
    endings no successful path reaches."""
    violations: list[Violation] = []
    paths = enumerate_paths(graph, cap=path_cap)
    reached: set[int] = set()
    for path in paths.paths:
        try:
            simulate_path(spec, list(path))
        except StuckError as exc:
            violations.append(
                Violation(
                    "STUCK",
                    f"path {list(path)} level {exc.level}",
                    str(exc.trigger.raw_text if exc.trigger else exc),
                )
            )
            continue
        except DefeatedError as exc:
            violations.append(
                Violation("DEFEATED", f"path {list(path)} level {exc.level}", str(exc))
            )
            continue
        reached.add(path[-1])
    for ending in graph.endings():
        if ending not in reached:
            violations.append(
                Violation("ENDING_UNREACHED", f"node {ending}", "no successful path")
            )
    if paths.truncated:
        violations.append(
            Violation("PATHS_TRUNCATED", "graph", f"more than {path_cap} paths")
        )
    return ValidationReport(tuple(violations))
