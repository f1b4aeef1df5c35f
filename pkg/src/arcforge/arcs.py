"""The six canonical emotional arcs and their mapping onto node sequences.

An arc is an ordered list of Rise/Fall segments. Story paths are split
proportionally over the segments, and a piecewise-linear reference curve in
[-1, 1] gives the target valence shape for each arc.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import NoArcError, PathTooShortError


class ArcDirection(Enum):
    RISE = "Rise"
    FALL = "Fall"

    @property
    def sign(self) -> int:
        return 1 if self is ArcDirection.RISE else -1


class ArcKind(Enum):
    RAGS_TO_RICHES = "rags_to_riches"
    TRAGEDY = "tragedy"
    MAN_IN_A_HOLE = "man_in_a_hole"
    ICARUS = "icarus"
    CINDERELLA = "cinderella"
    OEDIPUS = "oedipus"
    NONE = "none"


_RISE = ArcDirection.RISE
_FALL = ArcDirection.FALL

# Segment lists for the six canonical arcs.
_CANONICAL_SEGMENTS: dict[ArcKind, tuple[ArcDirection, ...]] = {
    ArcKind.RAGS_TO_RICHES: (_RISE,),
    ArcKind.TRAGEDY: (_FALL,),
    ArcKind.MAN_IN_A_HOLE: (_FALL, _RISE),
    ArcKind.ICARUS: (_RISE, _FALL),
    ArcKind.CINDERELLA: (_RISE, _FALL, _RISE),
    ArcKind.OEDIPUS: (_FALL, _RISE, _FALL),
}


@dataclass(frozen=True)
class ArcTemplate:
    """Ordered Rise/Fall segments for one arc kind."""

    kind: ArcKind
    segments: tuple[ArcDirection, ...]

    def __post_init__(self):
        if not 1 <= len(self.segments) <= 3:
            raise ValueError("template must have 1-3 segments")
        for a, b in zip(self.segments, self.segments[1:]):
            if a is b:
                raise ValueError("adjacent segments must alternate direction")


@dataclass(frozen=True)
class PhaseAssignment:
    """Per-position direction labels plus the start index of each segment run."""

    labels: tuple[ArcDirection, ...]
    boundaries: tuple[int, ...]

    @property
    def run_lengths(self) -> tuple[int, ...]:
        ends = self.boundaries[1:] + (len(self.labels),)
        return tuple(e - s for s, e in zip(self.boundaries, ends))


def canonical_template(kind: ArcKind) -> ArcTemplate:
    """Return the fixed segment list for one of the six arcs."""
    if kind is ArcKind.NONE:
        raise NoArcError("the 'none' kind has no template (baseline mode)")
    return ArcTemplate(kind=kind, segments=_CANONICAL_SEGMENTS[kind])


def assign_phases(template: ArcTemplate, path_length: int) -> PhaseAssignment:
    """Split ``path_length`` positions proportionally over the template segments.

    Remainder positions go to earlier segments first; every segment gets at
    least one position.
    """
    k = len(template.segments)
    if path_length < k:
        raise PathTooShortError(
            f"path of length {path_length} cannot host {k} nonempty segments"
        )
    base, rem = divmod(path_length, k)
    sizes = [base + 1 if i < rem else base for i in range(k)]
    labels: list[ArcDirection] = []
    boundaries: list[int] = []
    for direction, size in zip(template.segments, sizes):
        boundaries.append(len(labels))
        labels.extend([direction] * size)
    return PhaseAssignment(labels=tuple(labels), boundaries=tuple(boundaries))


def target_valence_curve(template: ArcTemplate, n: int) -> list[float]:
    """Piecewise-linear reference curve over ``n`` positions.

    Rise runs climb to +1 at their last position, Fall runs descend to -1,
    and the curve is continuous at run boundaries. The first run starts from
    a virtual anchor one step before position 0 at the opposite extreme, so
    single-position runs stay well defined.
    """
    phases = assign_phases(template, n)
    values: list[float] = []
    prev_pos = -1.0
    prev_val = -float(template.segments[0].sign)
    for direction, start, size in zip(
        template.segments, phases.boundaries, phases.run_lengths
    ):
        end = start + size - 1
        target = float(direction.sign)
        for i in range(start, end + 1):
            frac = (i - prev_pos) / (end - prev_pos)
            values.append(prev_val + frac * (target - prev_val))
        prev_pos = float(end)
        prev_val = target
    return values
