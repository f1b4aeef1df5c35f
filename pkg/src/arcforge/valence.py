"""Composite valence scoring, trajectories, and arc-shape matching.

Each story node gets a composite valence V = sum of prob * value over the
emotion predictions whose probability clears the retention threshold, with
category values mapped to {-1, 0, +1}. Trajectories are sequences of these
scores over a linearized story; arc shapes are checked by per-segment slope
sign against the template directions.
"""

from __future__ import annotations

import re
import statistics
from dataclasses import dataclass
from typing import Protocol

from .arcs import ArcTemplate, assign_phases
from .errors import ScorerError, ShapeError, UnknownLabelError
from .graph import StoryNode
from .lexicon import LEXICON

DEFAULT_THRESHOLD = 0.1

POSITIVE_LABELS = (
    "admiration",
    "amusement",
    "approval",
    "caring",
    "desire",
    "excitement",
    "gratitude",
    "joy",
    "love",
    "optimism",
    "pride",
    "relief",
)
NEGATIVE_LABELS = (
    "anger",
    "annoyance",
    "disappointment",
    "disapproval",
    "disgust",
    "embarrassment",
    "fear",
    "grief",
    "nervousness",
    "remorse",
    "sadness",
)
NEUTRAL_LABELS = ("confusion", "curiosity", "realization", "surprise", "neutral")

# The taxonomy: 27 emotion categories plus the neutral catch-all.
EMOTION_LABELS = POSITIVE_LABELS + NEGATIVE_LABELS + NEUTRAL_LABELS


@dataclass(frozen=True)
class EmotionPrediction:
    label: str
    prob: float


@dataclass(frozen=True)
class ValenceMap:
    mapping: dict[str, int]

    def value(self, label: str) -> int:
        try:
            return self.mapping[label]
        except KeyError:
            raise UnknownLabelError(f"label {label!r} not in valence map") from None


def default_valence_map() -> ValenceMap:
    mapping: dict[str, int] = {}
    for lab in POSITIVE_LABELS:
        mapping[lab] = 1
    for lab in NEGATIVE_LABELS:
        mapping[lab] = -1
    for lab in NEUTRAL_LABELS:
        mapping[lab] = 0
    return ValenceMap(mapping)


@dataclass(frozen=True)
class Trajectory:
    values: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.values)


class EmotionScorer(Protocol):
    name: str

    def score(self, text: str) -> list[EmotionPrediction]: ...


@dataclass(frozen=True)
class ShapeMatch:
    per_segment_slopes: tuple[float, ...]
    sign_match: tuple[bool, ...]

    @property
    def matched(self) -> bool:
        return all(self.sign_match)


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


def node_valence(
    preds: list[EmotionPrediction],
    valence_map: ValenceMap | None = None,
    threshold: float = DEFAULT_THRESHOLD,
) -> float:
    """V = sum of prob * mapped value over predictions with prob >= threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    vmap = valence_map or default_valence_map()
    total = 0.0
    for p in preds:
        value = vmap.value(p.label)  # unknown labels error even below threshold
        if p.prob >= threshold:
            total += p.prob * value
    return total


def story_trajectory(
    nodes: list[StoryNode],
    scorer: EmotionScorer,
    valence_map: ValenceMap | None = None,
    threshold: float = DEFAULT_THRESHOLD,
) -> Trajectory:
    """Composite valence per node, in the given (linearized) order."""
    if not nodes:
        raise ValueError("cannot score an empty story")
    values = []
    for node in nodes:
        try:
            preds = scorer.score(node.storyline)
        except Exception as exc:
            raise ScorerError(node.level_index, f"scorer failed: {exc}") from exc
        values.append(node_valence(preds, valence_map, threshold))
    return Trajectory(tuple(values))


def mean_trajectory(trajectories: list[Trajectory]) -> Trajectory:
    if not trajectories:
        raise ShapeError("no trajectories to average")
    length = len(trajectories[0])
    for t in trajectories:
        if len(t) != length:
            raise ShapeError(f"trajectory lengths differ: {len(t)} vs {length}")
    values = tuple(
        sum(t.values[i] for t in trajectories) / len(trajectories)
        for i in range(length)
    )
    return Trajectory(values)


def shape_match(trajectory: Trajectory, template: ArcTemplate) -> ShapeMatch:
    """Per-segment least-squares slope signs against the template directions.

    Each segment after the first is extended one point left across the run
    boundary, so single-node runs still yield a measurable slope. A first
    segment of a single node has nothing to regress against and counts as
    unmatched.
    """
    phases = assign_phases(template, len(trajectory))
    slopes: list[float] = []
    matches: list[bool] = []
    pos = 0
    for seg_i, (direction, size) in enumerate(
        zip(template.segments, phases.run_lengths)
    ):
        xs = list(range(pos, pos + size))
        if seg_i > 0:
            xs = [pos - 1] + xs
        pos += size
        if len(xs) < 2:
            slopes.append(0.0)
            matches.append(False)
            continue
        vs = [trajectory.values[x] for x in xs]
        slope = statistics.linear_regression(xs, vs).slope
        slopes.append(slope)
        matches.append(slope * direction.sign > 0)
    return ShapeMatch(per_segment_slopes=tuple(slopes), sign_match=tuple(matches))


# ---------------------------------------------------------------------------
# Bundled lexicon scorer and optional remote-classifier client
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"[a-z']+")


class LexiconScorer:
    """Keyword scorer: per-label probability is the text's hit fraction."""

    name = "lexicon"

    def __init__(self, lexicon: dict[str, tuple[str, ...]] | None = None):
        self._lexicon = {
            label: frozenset(words) for label, words in (lexicon or LEXICON).items()
        }

    def score(self, text: str) -> list[EmotionPrediction]:
        tokens = _TOKEN.findall(text.lower())
        if not tokens:
            return []
        preds = []
        for label, words in self._lexicon.items():
            hits = sum(1 for tok in tokens if tok in words)
            if hits:
                preds.append(EmotionPrediction(label, min(1.0, hits / len(tokens))))
        return preds


class HttpScorer:
    """Client for an external classifier service exposing the same interface.

    Expects POST {url} with {"text": ...} returning
    [{"label": ..., "prob": ...}, ...].
    """

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout
        self.name = f"http:{url}"

    def score(self, text: str) -> list[EmotionPrediction]:
        import httpx

        resp = httpx.post(self.url, json={"text": text}, timeout=self.timeout)
        resp.raise_for_status()
        return [EmotionPrediction(d["label"], float(d["prob"])) for d in resp.json()]


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------


def build_analysis_report(
    arc: str,
    trajectories: list[Trajectory],
    template: ArcTemplate | None,
    scorer_name: str,
) -> dict:
    """Structured analysis document: per-story trajectories, mean, shape match."""
    mean = mean_trajectory(trajectories)
    report = {
        "arc": arc,
        "scorer": scorer_name,
        "runs": len(trajectories),
        "trajectories": [list(t.values) for t in trajectories],
        "mean": list(mean.values),
        "shape": None,
    }
    if template is not None:
        match = shape_match(mean, template)
        report["shape"] = {
            "segments": [d.value for d in template.segments],
            "per_segment_slopes": list(match.per_segment_slopes),
            "sign_match": list(match.sign_match),
            "matched": match.matched,
        }
    return report


def trajectories_to_csv(arc: str, trajectories: list[Trajectory]) -> str:
    """Plot-ready long-format CSV: level_index, valence, story_id, arc."""
    lines = ["level_index,valence,story_id,arc"]
    for story_id, t in enumerate(trajectories):
        for level_index, v in enumerate(t.values):
            lines.append(f"{level_index},{v:.6f},{story_id},{arc}")
    return "\n".join(lines) + "\n"
