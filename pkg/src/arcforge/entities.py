"""Game-spec schema, arc-driven difficulty, cross-level continuity, export.

The exported document mirrors the runtime schema exactly: a top-level
playerData block plus a levelList, each level carrying idx/arc/storyline,
its outgoing transitions (next) and its entity block (NPCs, items, doors).
Export is canonical: fixed key order, UTF-8, byte-stable round trips.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from .arcs import ArcDirection
from .errors import ExportError, OrderError
from .graph import (
    StoryGraph,
    StoryNode,
    Trigger,
    TriggerKind,
    ValidationReport,
    Violation,
    parse_trigger,
)


@dataclass(frozen=True)
class PlayerData:
    name: str
    health: float
    attack: float
    desc: str
    sprite: str

    def __post_init__(self):
        if self.health <= 0:
            raise ValueError("player health must be > 0")
        if self.attack < 0:
            raise ValueError("player attack must be >= 0")


@dataclass(frozen=True)
class Npc:
    name: str
    desc: str
    dialogue: tuple[str, ...]
    atk: float
    ranged: bool
    hp: float
    friend: bool
    door: int | None = None


@dataclass(frozen=True)
class Item:
    name: str
    desc: str
    pickable: bool
    atk: float
    hp: float


@dataclass(frozen=True)
class Door:
    idx: int
    sprite: str


@dataclass(frozen=True)
class LevelEntities:
    npcs: tuple[Npc, ...] = ()
    items: tuple[Item, ...] = ()
    doors: tuple[Door, ...] = ()

    def names(self) -> list[str]:
        return [n.name for n in self.npcs] + [i.name for i in self.items]


@dataclass(frozen=True)
class NextEntry:
    idx: int
    criteria: str


@dataclass(frozen=True)
class LevelSpec:
    idx: int
    arc: ArcDirection | None
    storyline: str
    next: tuple[NextEntry, ...]
    entity: LevelEntities


@dataclass(frozen=True)
class GameSpec:
    player_data: PlayerData
    level_list: tuple[LevelSpec, ...]

    def level(self, idx: int) -> LevelSpec:
        for lv in self.level_list:
            if lv.idx == idx:
                return lv
        raise KeyError(f"no level with idx {idx}")


@dataclass
class ContinuityLedger:
    """Cross-level record of acquired items and entity state changes."""

    acquired_items: dict[str, int] = field(default_factory=dict)
    stat_deltas: dict[str, dict[str, float]] = field(default_factory=dict)
    descriptors: dict[str, str] = field(default_factory=dict)
    last_level_index: int = -1
    last_node_idx: int | None = None


@dataclass(frozen=True)
class DifficultyParams:
    fall_multiplier: float = 1.5
    rise_multiplier: float = 0.75
    depth_slope: float = 0.1
    ranged_weight: float = 0.5

    def __post_init__(self):
        if not self.fall_multiplier > self.rise_multiplier > 0:
            raise ValueError("need fall_multiplier > rise_multiplier > 0")


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _trigger_satisfiable(trigger: Trigger, entity: LevelEntities) -> str | None:
    """Return a violation code if the trigger has no matching entity."""
    if trigger.kind is TriggerKind.TALK_TO:
        if not any(n.name == trigger.target for n in entity.npcs):
            return "TRIGGER_TARGET_MISSING"
    elif trigger.kind is TriggerKind.PICK_UP:
        hits = [i for i in entity.items if i.name == trigger.target]
        if not hits:
            return "TRIGGER_TARGET_MISSING"
        if not any(i.pickable for i in hits):
            return "TRIGGER_TARGET_UNPICKABLE"
    elif trigger.kind is TriggerKind.DEFEAT:
        hits = [n for n in entity.npcs if n.name == trigger.target]
        if not hits:
            return "TRIGGER_TARGET_MISSING"
        if all(n.friend for n in hits):
            return "TRIGGER_TARGET_FRIENDLY"
    return None


def validate_spec(spec: GameSpec, graph: StoryGraph) -> ValidationReport:
    """Referential integrity between spec, entities, and the story graph."""
    violations: list[Violation] = []
    level_ids = {lv.idx for lv in spec.level_list}
    node_ids = {n.idx for n in graph.nodes}

    if level_ids != node_ids:
        violations.append(
            Violation(
                "LEVEL_NODE_MISMATCH",
                f"levels {sorted(level_ids)} vs nodes {sorted(node_ids)}",
                "level idx set must equal graph node idx set",
            )
        )

    for lv in spec.level_list:
        ref = f"level {lv.idx}"
        names = lv.entity.names()
        if len(names) != len(set(names)):
            dupes = sorted({n for n in names if names.count(n) > 1})
            violations.append(
                Violation("DUPLICATE_NAME", ref, f"duplicate entity names {dupes}")
            )
        for npc in lv.entity.npcs:
            if npc.hp <= 0:
                violations.append(
                    Violation("NONPOSITIVE_STAT", f"{ref} npc {npc.name}", "hp must be > 0")
                )
            if npc.atk < 0:
                violations.append(
                    Violation("NONPOSITIVE_STAT", f"{ref} npc {npc.name}", "atk must be >= 0")
                )
            if npc.door is not None and not any(
                d.idx == npc.door for d in lv.entity.doors
            ):
                violations.append(
                    Violation(
                        "NPC_DOOR_DANGLING",
                        f"{ref} npc {npc.name}",
                        f"guards door {npc.door} which is not in this level",
                    )
                )
        edge_targets = {e.dst for e in graph.outgoing(lv.idx)} if lv.idx in node_ids else set()
        for door in lv.entity.doors:
            if door.idx not in node_ids:
                violations.append(
                    Violation("DOOR_DANGLING", f"{ref} door {door.idx}", "no such node")
                )
            elif door.idx not in edge_targets:
                violations.append(
                    Violation(
                        "DOOR_EDGE_MISMATCH",
                        f"{ref} door {door.idx}",
                        "door has no matching outgoing edge",
                    )
                )
        next_ids = {n.idx for n in lv.next}
        if lv.idx in node_ids and next_ids != edge_targets:
            violations.append(
                Violation(
                    "NEXT_EDGE_MISMATCH",
                    ref,
                    f"next {sorted(next_ids)} vs edges {sorted(edge_targets)}",
                )
            )
        door_ids = {d.idx for d in lv.entity.doors}
        for entry in lv.next:
            if entry.idx not in door_ids:
                violations.append(
                    Violation(
                        "DOOR_MISSING",
                        f"{ref} next {entry.idx}",
                        "transition has no door",
                    )
                )
            try:
                trigger = parse_trigger(entry.criteria)
            except Exception:
                violations.append(
                    Violation(
                        "CRITERIA_UNPARSEABLE", f"{ref} next {entry.idx}", entry.criteria
                    )
                )
                continue
            code = _trigger_satisfiable(trigger, lv.entity)
            if code:
                violations.append(
                    Violation(code, f"{ref} next {entry.idx}", entry.criteria)
                )

    return ValidationReport(tuple(violations))


# ---------------------------------------------------------------------------
# Difficulty
# ---------------------------------------------------------------------------


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def apply_difficulty(
    entity: LevelEntities,
    label: ArcDirection,
    depth: int,
    params: DifficultyParams | None = None,
) -> LevelEntities:
    """Scale hostile NPC stats by arc direction and story depth.

    Multiplier is fall_multiplier or rise_multiplier times (1 + depth *
    depth_slope); results round half-up with a floor of 1. Friendly NPCs and
    items are untouched.
    """
    p = params or DifficultyParams()
    mult = p.fall_multiplier if label is ArcDirection.FALL else p.rise_multiplier
    factor = mult * (1 + depth * p.depth_slope)
    npcs = tuple(
        npc
        if npc.friend
        else replace(
            npc,
            atk=max(1, _round_half_up(npc.atk * factor)),
            hp=max(1, _round_half_up(npc.hp * factor)),
        )
        for npc in entity.npcs
    )
    return replace(entity, npcs=npcs)


# ---------------------------------------------------------------------------
# Continuity
# ---------------------------------------------------------------------------


def carry_over(
    ledger: ContinuityLedger, node: StoryNode, entity: LevelEntities
) -> tuple[ContinuityLedger, ValidationReport]:
    """Record a level's state changes; flag re-introduced acquired items.

    Levels must be processed in level_index order. A pickable item counts as
    acquired at the level where it first appears; the player's descriptor and
    cumulative stat deltas track what it grants. Reprocessing an unchanged
    level leaves the ledger as-is.
    """
    if node.level_index < ledger.last_level_index:
        raise OrderError(
            f"level_index {node.level_index} after {ledger.last_level_index}"
        )
    violations: list[Violation] = []
    for item in entity.items:
        if not item.pickable:
            continue
        acquired_at = ledger.acquired_items.get(item.name)
        if acquired_at is not None and acquired_at != node.idx:
            violations.append(
                Violation(
                    "ITEM_REINTRODUCED",
                    f"level {node.idx} item {item.name}",
                    f"already acquired at level {acquired_at}",
                )
            )
            continue
        if acquired_at is None:
            ledger.acquired_items[item.name] = node.idx
            if item.atk or item.hp:
                deltas = ledger.stat_deltas.setdefault("player", {"atk": 0.0, "hp": 0.0})
                deltas["atk"] += item.atk
                deltas["hp"] += item.hp
            ledger.descriptors["player"] = _player_desc(ledger)
    for npc in entity.npcs:
        if ledger.descriptors.get(npc.name) != npc.desc:
            ledger.descriptors[npc.name] = npc.desc
    ledger.last_level_index = node.level_index
    ledger.last_node_idx = node.idx
    return ledger, ValidationReport(tuple(violations))


def _player_desc(ledger: ContinuityLedger) -> str:
    items = sorted(ledger.acquired_items)
    return "carries " + ", ".join(items) if items else ""


# ---------------------------------------------------------------------------
# Export / parse (canonical JSON)
# ---------------------------------------------------------------------------


def _npc_to_dict(n: Npc) -> dict:
    return {
        "name": n.name,
        "desc": n.desc,
        "dialogue": list(n.dialogue),
        "atk": n.atk,
        "ranged": n.ranged,
        "hp": n.hp,
        "friend": n.friend,
        "door": n.door,
    }


def _item_to_dict(i: Item) -> dict:
    return {"name": i.name, "desc": i.desc, "pickable": i.pickable, "atk": i.atk, "hp": i.hp}


def spec_to_dict(spec: GameSpec) -> dict:
    return {
        "playerData": {
            "name": spec.player_data.name,
            "health": spec.player_data.health,
            "attack": spec.player_data.attack,
            "desc": spec.player_data.desc,
            "sprite": spec.player_data.sprite,
        },
        "levelList": [
            {
                "idx": lv.idx,
                "arc": lv.arc.value if lv.arc else "None",
                "storyline": lv.storyline,
                "next": [{"idx": n.idx, "criteria": n.criteria} for n in lv.next],
                "entity": {
                    "NPCs": [_npc_to_dict(n) for n in lv.entity.npcs],
                    "items": [_item_to_dict(i) for i in lv.entity.items],
                    "doors": [{"idx": d.idx, "sprite": d.sprite} for d in lv.entity.doors],
                },
            }
            for lv in spec.level_list
        ],
    }


def spec_from_dict(data: dict) -> GameSpec:
    pd = data["playerData"]
    player = PlayerData(
        name=pd["name"],
        health=pd["health"],
        attack=pd["attack"],
        desc=pd["desc"],
        sprite=pd["sprite"],
    )
    levels = []
    for lv in data["levelList"]:
        ent = lv["entity"]
        levels.append(
            LevelSpec(
                idx=lv["idx"],
                arc=None if lv["arc"] == "None" else ArcDirection(lv["arc"]),
                storyline=lv["storyline"],
                next=tuple(NextEntry(n["idx"], n["criteria"]) for n in lv["next"]),
                entity=LevelEntities(
                    npcs=tuple(
                        Npc(
                            name=n["name"],
                            desc=n["desc"],
                            dialogue=tuple(n["dialogue"]),
                            atk=n["atk"],
                            ranged=n["ranged"],
                            hp=n["hp"],
                            friend=n["friend"],
                            door=n.get("door"),
                        )
                        for n in ent["NPCs"]
                    ),
                    items=tuple(
                        Item(
                            name=i["name"],
                            desc=i["desc"],
                            pickable=i["pickable"],
                            atk=i["atk"],
                            hp=i["hp"],
                        )
                        for i in ent["items"]
                    ),
                    doors=tuple(Door(d["idx"], d["sprite"]) for d in ent["doors"]),
                ),
            )
        )
    return GameSpec(player_data=player, level_list=tuple(levels))


def export_game_json(spec: GameSpec, graph: StoryGraph) -> bytes:
    """Canonical .game.json bytes; refuses specs that fail validation."""
    report = validate_spec(spec, graph)
    if not report.ok:
        raise ExportError(f"spec invalid: {report}")
    return (json.dumps(spec_to_dict(spec), ensure_ascii=False, indent=2) + "\n").encode(
        "utf-8"
    )


def parse_game_json(data: bytes | str) -> GameSpec:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return spec_from_dict(json.loads(data))
