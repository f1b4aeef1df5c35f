"""Text-generation backends.

Two implementations of the backend interface used by the chain:

* TemplateBackend — deterministic, seeded slot-filler over word banks with
  direction-tagged tone lexicons. Identical input always yields identical
  output, which keeps the whole pipeline hermetic and bit-reproducible.
* RemoteBackend — OpenAI-compatible chat-completions client, configured via
  environment variables, with retry on transient failures.

Backends only see prompt text. The pipeline embeds a JSON context block in
each user prompt; the template backend parses that block the way a real model
reads instructions.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import time

from .errors import BackendError
from .lexicon import FALL_ANCHOR_LABELS, LEXICON, RISE_ANCHOR_LABELS

# ---------------------------------------------------------------------------
# Word banks (kept disjoint from the emotion lexicon so baseline storylines
# score neutral)
# ---------------------------------------------------------------------------

NEUTRAL_FRAGMENTS = (
    "the road bends past a shuttered mill",
    "gulls wheel over the grey harbor wall",
    "rain taps on the canvas awning",
    "the caravan rests beside a dry ford",
    "smoke threads from a distant kiln",
    "lantern glow pools on the wet flagstones",
    "footsteps echo along the cloister walk",
    "moths circle the tavern candle",
    "the river slides beneath an arched span",
    "dust settles in the counting house",
    "wind moves through the terraced orchard",
    "a bell tolls across the tide flats",
)

GOAL_PHRASES = (
    "reach the far gate",
    "press on to the next chamber",
    "find the way forward",
    "cross into the next hall",
    "follow the marked trail",
    "clear the passage ahead",
)

FRIENDLY_NPC_NAMES = (
    "Mira", "Elder Rowan", "Bramble", "Seren", "Tobin", "Wren", "Hale",
    "Petra", "Ilya", "Maren", "Odette", "Casper", "Nima", "Fenn", "Isolde",
    "Garrick", "Tamsin", "Bren", "Liora", "Edda",
)

ENEMY_NAMES = (
    "bandit chief", "marsh wyrm", "night warden", "hollow knight",
    "grave stalker", "iron golem", "pit fiend", "ashen reaver", "bog troll",
    "wolf matriarch", "rift shade", "storm drake", "barrow wight",
    "flint raider", "dusk sentinel", "cairn beast", "sable hunter",
    "mire lurker", "thorn fiend", "dread boar",
)

QUEST_ITEM_NAMES = (
    "bronze key", "rusty sword", "moonstone", "signal horn", "healing tonic",
    "silver locket", "iron sigil", "old map", "ember charm", "rope ladder",
    "lens of truth", "warding bell", "cracked compass", "sun amulet",
    "glass vial", "runed coin", "hermit staff", "night lantern",
    "sealed letter", "wax seal",
)

AMBIENT_FRIENDLY_NAMES = (
    "traveling tinker", "quiet shepherd", "ferry keeper", "old miller",
    "apprentice scribe", "village cook", "lamplighter", "peddler",
)

AMBIENT_HOSTILE_NAMES = (
    "stray cutpurse", "feral hound", "scrap golem", "tunnel rat",
    "carrion crow", "mud creeper", "pale serpent", "gutter imp",
)

TRINKET_NAMES = (
    "stone bench", "clay pot", "weathered signpost", "empty cart",
    "cracked fountain", "moss ledge", "broken wheel", "tattered banner",
)

DOOR_SPRITES = (
    "oak door", "iron gate", "stone arch", "rope bridge", "cellar hatch",
    "brass portal", "thorn gap", "rune door",
)

DIALOGUE_LINES = (
    "the path is safer at first light",
    "mind the loose stones ahead",
    "few travel this road anymore",
    "the gate answers to the right key",
    "keep your voice low near the warrens",
    "the old span holds if you walk it slow",
)

HERO_NAMES = ("Arlen", "Kestrel", "Rhoswen", "Dain", "Sable", "Corin", "Vessa", "Iri")

HERO_SPRITES = (
    "cloaked wanderer with a short blade",
    "pilgrim in travel leathers",
    "scout with a patched satchel",
    "quiet duelist in grey",
)

DESC_TEMPLATES = (
    "{name}, marked by long roads",
    "{name}, keeping to the lantern light",
    "{name}, of few words",
    "{name}, watching the passage",
)

ITEM_DESC_TEMPLATES = (
    "{name} left by an earlier traveler",
    "{name} half wrapped in oilcloth",
    "{name} set on a stone shelf",
)

# Difficulty shaping used in prompt-only mode, mirroring the programmatic
# defaults so either mode yields the same ordering.
_FALL_MULT = 1.5
_RISE_MULT = 0.75
_DEPTH_SLOPE = 0.1


def extract_json_block(text: str) -> dict | list:
    """First well-formed JSON document in text, tolerating fences and prose."""
    decoder = json.JSONDecoder()
    for i, ch in enumerate(text):
        if ch in "{[":
            try:
                value, _ = decoder.raw_decode(text[i:])
            except json.JSONDecodeError:
                continue
            return value
    raise ValueError("no JSON document found")


def _round_half_up(x: float) -> int:
    import math

    return int(math.floor(x + 0.5))


class TemplateBackend:
    """Deterministic slot-filling backend over seeded word banks."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.name = f"template:{seed}"
        # Base storyline length is fixed per backend instance so valence
        # ordering within one story is exact; it varies across seeds.
        self._base_len = 18 + random.Random(f"{seed}:base").randint(0, 4)

    # -- backend interface ---------------------------------------------------

    def complete(self, system_text: str, user_text: str, schema_hint: str) -> str:
        digest = hashlib.sha256(
            f"{self.seed}|{schema_hint}|{system_text}|{user_text}".encode()
        ).hexdigest()
        rng = random.Random(digest)
        ctx = extract_json_block(user_text)
        if schema_hint == "story_graph":
            doc = self._skeleton(ctx, rng)
        elif schema_hint == "revision":
            doc = self._revision(ctx, rng)
        elif schema_hint == "level_entities":
            doc = self._entities(ctx, rng)
        elif schema_hint == "player_data":
            doc = self._player(ctx, rng)
        else:
            raise BackendError(f"template backend cannot answer schema {schema_hint!r}")
        # Fenced like a chatty model; the parser must cope either way.
        return "Here is the requested JSON.\n```json\n" + json.dumps(doc, indent=2) + "\n```\n"

    # -- storyline text ------------------------------------------------------

    def _base_text(self, rng: random.Random, words: int) -> list[str]:
        fragments = list(NEUTRAL_FRAGMENTS)
        rng.shuffle(fragments)
        tokens: list[str] = []
        for frag in fragments:
            tokens.extend(frag.split())
            if len(tokens) >= words:
                break
        return tokens[:words]

    def _storyline(self, rng: random.Random) -> str:
        tokens = self._base_text(rng, self._base_len)
        return (" ".join(tokens)).capitalize() + "."

    def _toned_storyline(self, rng: random.Random, direction: str, intensity: float) -> str:
        anchors = RISE_ANCHOR_LABELS if direction == "Rise" else FALL_ANCHOR_LABELS
        anchor = rng.choice(anchors)
        count = 4 + _round_half_up(4 * intensity)
        tone_words = rng.sample(list(LEXICON[anchor]), count)
        base = " ".join(self._base_text(rng, self._base_len)).capitalize()
        tone = ", ".join(tone_words).capitalize()
        return f"{base}. {tone}."

    # -- skeleton ------------------------------------------------------------

    def _skeleton(self, ctx: dict, rng: random.Random) -> dict:
        n = int(ctx["node_budget"])
        endings = int(ctx["min_endings"])
        segments: list[str] = list(ctx.get("segments") or [])
        k = max(1, len(segments))

        # Level count: prefer one spare node for a mid-story branch, else a
        # pure chain with the endings fanned out at the last level. The
        # branch level must keep the linearized label runs proportional, so
        # fall back to the chain when no level qualifies.
        branch_at = None
        if n == 1:
            depths = 1
        elif n - endings >= max(k, 2):
            depths = n - endings
            branch_at = _branch_level(segments, depths, rng)
            if branch_at < 1:
                branch_at = None
                depths = min(n - endings + 1, n)
        else:
            depths = max(k, min(n - endings + 1, n))
        depths = max(1, min(depths, n))
        extra = n - (depths - 1 + endings) if depths > 1 else 0

        level_labels = _spread_segments(segments, depths) if segments else [None] * depths
        widths = [1] * (depths - 1) + [endings] if depths > 1 else [n]
        if extra > 0 and depths > 1 and branch_at is not None:
            widths[branch_at] += extra

        nodes = []
        ids_by_level: list[list[int]] = []
        idx = 0
        for level, width in enumerate(widths):
            row = []
            for _ in range(width):
                nodes.append(
                    {
                        "idx": idx,
                        "label": level_labels[level],
                        "storyline": self._storyline(rng),
                        "goal": rng.choice(GOAL_PHRASES),
                        "level_index": level,
                    }
                )
                row.append(idx)
                idx += 1
            ids_by_level.append(row)

        npc_pool = _pool(FRIENDLY_NPC_NAMES, rng)
        enemy_pool = _pool(ENEMY_NAMES, rng)
        item_pool = _pool(QUEST_ITEM_NAMES, rng)

        edges = []
        for level in range(depths - 1):
            srcs, dsts = ids_by_level[level], ids_by_level[level + 1]
            label = level_labels[level]
            for i in range(max(len(srcs), len(dsts))):
                src = srcs[i % len(srcs)]
                dst = dsts[i % len(dsts)]
                edges.append(
                    {
                        "from": src,
                        "to": dst,
                        "criteria": self._criteria(label, rng, npc_pool, enemy_pool, item_pool),
                    }
                )
        return {"nodes": nodes, "edges": edges}

    def _criteria(self, label, rng, npc_pool, enemy_pool, item_pool) -> str:
        if label == "Fall":
            kind = rng.choices(("defeat", "talk", "pick"), weights=(6, 2, 2))[0]
        elif label == "Rise":
            kind = rng.choices(("talk", "pick"), weights=(1, 1))[0]
        else:
            kind = rng.choice(("defeat", "talk", "pick"))
        if kind == "talk":
            return f"talk to a friendly NPC named {npc_pool.pop()}"
        if kind == "pick":
            return f"pick up the {item_pool.pop()}"
        return f"defeat the {enemy_pool.pop()}"

    # -- revision ------------------------------------------------------------

    def _revision(self, ctx: dict, rng: random.Random) -> dict:
        return {
            "storyline": self._toned_storyline(
                rng, ctx["label"], float(ctx.get("intensity", 1.0))
            )
        }

    # -- entities ------------------------------------------------------------

    def _entities(self, ctx: dict, rng: random.Random) -> dict:
        label = ctx["node"].get("label")
        depth = int(ctx["node"].get("level_index", 0))
        prompt_only = ctx.get("difficulty_mode") == "prompt-only"
        acquired = set(ctx.get("acquired_items") or ())

        npcs: list[dict] = []
        items: list[dict] = []
        doors: list[dict] = []
        used = set()

        for out in ctx.get("outgoing", ()):
            doors.append({"idx": out["to"], "sprite": rng.choice(DOOR_SPRITES)})

        for out in ctx.get("outgoing", ()):
            kind, target, to = out["kind"], out["target"], out["to"]
            if target in used:
                continue
            used.add(target)
            if kind == "talk_to":
                npcs.append(self._npc(rng, target, friend=True, door=to))
            elif kind == "defeat":
                npcs.append(
                    self._npc(
                        rng, target, friend=False, door=to,
                        label=label, depth=depth, prompt_only=prompt_only,
                    )
                )
            elif kind == "pick_up":
                items.append(
                    {
                        "name": target,
                        "desc": rng.choice(ITEM_DESC_TEMPLATES).format(name=target),
                        "pickable": True,
                        "atk": rng.randint(0, 3),
                        "hp": rng.randint(0, 2),
                    }
                )

        # Ambient population: Fall levels always field at least one hostile,
        # Rise levels stay friendly, unlabeled levels mix.
        if label == "Fall":
            name = _fresh(AMBIENT_HOSTILE_NAMES, used, rng)
            npcs.append(
                self._npc(rng, name, friend=False, label=label, depth=depth,
                          prompt_only=prompt_only)
            )
        elif label == "Rise":
            if rng.random() < 0.5:
                npcs.append(self._npc(rng, _fresh(AMBIENT_FRIENDLY_NAMES, used, rng), friend=True))
        else:
            if rng.random() < 0.4:
                npcs.append(self._npc(rng, _fresh(AMBIENT_HOSTILE_NAMES, used, rng), friend=False))
            if rng.random() < 0.4:
                npcs.append(self._npc(rng, _fresh(AMBIENT_FRIENDLY_NAMES, used, rng), friend=True))

        if rng.random() < 0.5:
            name = _fresh(TRINKET_NAMES, used, rng)
            if name not in acquired:
                items.append(
                    {"name": name, "desc": f"{name} fixed in place", "pickable": False,
                     "atk": 0, "hp": 0}
                )

        return {"NPCs": npcs, "items": items, "doors": doors}

    def _npc(
        self,
        rng: random.Random,
        name: str,
        friend: bool,
        door: int | None = None,
        label: str | None = None,
        depth: int = 0,
        prompt_only: bool = False,
    ) -> dict:
        if friend:
            atk, hp, ranged = 0, rng.randint(2, 5), False
        else:
            atk, hp = rng.randint(1, 2), rng.randint(3, 6)
            ranged = rng.random() < (0.4 if label == "Fall" else 0.1)
            if prompt_only and label in ("Rise", "Fall"):
                mult = _FALL_MULT if label == "Fall" else _RISE_MULT
                factor = mult * (1 + depth * _DEPTH_SLOPE)
                atk = max(1, _round_half_up(atk * factor))
                hp = max(1, _round_half_up(hp * factor))
        return {
            "name": name,
            "desc": rng.choice(DESC_TEMPLATES).format(name=name),
            "dialogue": [rng.choice(DIALOGUE_LINES)] if friend else [],
            "atk": atk,
            "ranged": ranged,
            "hp": hp,
            "friend": friend,
            "door": door,
        }

    # -- player --------------------------------------------------------------

    def _player(self, ctx: dict, rng: random.Random) -> dict:
        prompt_words = str(ctx.get("prompt", "")).split()
        theme = " ".join(prompt_words[:6]) if prompt_words else "a long road"
        return {
            "playerData": {
                "name": rng.choice(HERO_NAMES),
                "health": rng.choice((100, 110, 120, 130, 140)),
                "attack": rng.choice((10, 11, 12)),
                "desc": f"set out after {theme}",
                "sprite": rng.choice(HERO_SPRITES),
            }
        }


def _pool(bank, rng: random.Random) -> list[str]:
    names = list(bank)
    rng.shuffle(names)
    return names


def _fresh(bank, used: set, rng: random.Random) -> str:
    candidates = [n for n in bank if n not in used]
    name = rng.choice(candidates or list(bank))
    used.add(name)
    return name


def _spread_segments(segments: list[str], depths: int) -> list[str]:
    """Per-level labels: proportional split, earlier segments first."""
    k = len(segments)
    base, rem = divmod(depths, k)
    labels = []
    for i, seg in enumerate(segments):
        labels.extend([seg] * (base + 1 if i < rem else base))
    return labels


def _branch_level(segments: list[str], depths: int, rng: random.Random) -> int:
    """Level that widens to two nodes, or a value < 1 when none qualifies.

    For labeled arcs this is the last level of the segment that would grow if
    the path were one position longer, which keeps the linearized label
    sequence aligned with the one-longer phase split."""
    if depths < 2:
        return 0
    if not segments:
        return rng.randint(1, depths - 1)
    k = len(segments)
    base, rem = divmod(depths, k)
    grow = rem  # segment index that gains the next position
    last = 0
    for i in range(grow + 1):
        last += base + 1 if i < rem else base
    return last - 1


# ---------------------------------------------------------------------------
# Remote backend
# ---------------------------------------------------------------------------

ENV_API_KEY = "ARCFORGE_API_KEY"
ENV_BASE_URL = "ARCFORGE_BASE_URL"
ENV_MODEL = "ARCFORGE_MODEL"

_RETRYABLE = {429, 500, 502, 503, 529}


class RemoteBackend:
    """OpenAI-compatible chat-completions client."""

    def __init__(
        self,
        base_url: str,
        api_key: str,
        model: str,
        timeout: float = 60.0,
        retries: int = 2,
        transport=None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.timeout = timeout
        self.retries = retries
        self.name = f"remote:{model}"
        self._transport = transport

    @classmethod
    def from_env(cls, timeout: float = 60.0, retries: int = 2) -> "RemoteBackend":
        base_url = os.environ.get(ENV_BASE_URL)
        api_key = os.environ.get(ENV_API_KEY)
        model = os.environ.get(ENV_MODEL, "gpt-4o-mini")
        if not base_url or not api_key:
            raise BackendError(
                f"remote backend needs {ENV_BASE_URL} and {ENV_API_KEY} set"
            )
        return cls(base_url, api_key, model, timeout=timeout, retries=retries)

    def complete(self, system_text: str, user_text: str, schema_hint: str) -> str:
        import httpx

        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system_text},
                {"role": "user", "content": user_text},
            ],
            "temperature": 0.7,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"}
        url = f"{self.base_url}/chat/completions"
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                with httpx.Client(timeout=self.timeout, transport=self._transport) as client:
                    resp = client.post(url, json=payload, headers=headers)
                if resp.status_code in _RETRYABLE:
                    last_error = BackendError(f"status {resp.status_code}")
                elif resp.status_code != 200:
                    raise BackendError(f"remote backend error {resp.status_code}: {resp.text[:200]}")
                else:
                    return resp.json()["choices"][0]["message"]["content"]
            except BackendError:
                raise
            except Exception as exc:
                last_error = exc
            if attempt < self.retries:
                time.sleep(min(2**attempt, 8))
        raise BackendError(f"remote backend failed after {self.retries + 1} attempts: {last_error}")
