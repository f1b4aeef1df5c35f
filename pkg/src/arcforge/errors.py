"""Exception types shared across the package."""


class ArcforgeError(Exception):
    """Base class for all package-specific errors."""


class NoArcError(ArcforgeError):
    """Raised when an arc template is requested for the 'none' kind."""


class PathTooShortError(ArcforgeError):
    """Path has fewer positions than the template has segments."""


class CycleError(ArcforgeError):
    """Graph contains a cycle where a DAG is required."""


class NotFoundError(ArcforgeError):
    """Referenced id does not exist."""


class EditRejectedError(ArcforgeError):
    """Graph edit would break a structural invariant.

    `code` carries the violation code (e.g. CYCLE, ROOT_REMOVAL).
    """

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class UnknownTriggerError(ArcforgeError):
    """Criteria text could not be parsed into a trigger."""

    def __init__(self, raw_text: str):
        super().__init__(f"unparseable trigger criteria: {raw_text!r}")
        self.raw_text = raw_text


class BackendError(ArcforgeError):
    """Text-generation backend failed."""


class GenerationFailedError(ArcforgeError):
    """All generation attempts exhausted without a valid result."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class PreconditionError(ArcforgeError):
    """Operation called with an unmet precondition."""


class EntityGenError(ArcforgeError):
    """Entity generation produced schema-invalid output after all repairs."""


class ParseError(ArcforgeError):
    """No structured document could be extracted from backend text."""


class SchemaError(ArcforgeError):
    """Extracted document violates its schema.

    `paths` lists dotted paths of the offending fields.
    """

    def __init__(self, paths: list[str], message: str = ""):
        super().__init__(message or "schema violation at: " + ", ".join(paths))
        self.paths = paths


class OrderError(ArcforgeError):
    """Levels processed out of level_index order."""


class ExportError(ArcforgeError):
    """Game spec failed validation at export time."""


class DegenerateError(ArcforgeError):
    """Player power product is zero; challenge score undefined."""


class StuckError(ArcforgeError):
    """A path's gating trigger cannot be satisfied."""

    def __init__(self, level: int, trigger, message: str = ""):
        super().__init__(message or f"stuck at level {level}: {trigger}")
        self.level = level
        self.trigger = trigger


class DefeatedError(ArcforgeError):
    """Player died during simulation."""

    def __init__(self, level: int):
        super().__init__(f"player defeated at level {level}")
        self.level = level


class UnknownLabelError(ArcforgeError):
    """Emotion label outside the fixed taxonomy."""


class ScorerError(ArcforgeError):
    """Emotion scorer failed on a node."""

    def __init__(self, level: int, message: str = ""):
        super().__init__(message or f"scorer failed at level {level}")
        self.level = level


class ShapeError(ArcforgeError):
    """Trajectory lengths do not agree."""


class RequestError(ArcforgeError):
    """Generation request violates its invariants."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class ConflictError(ArcforgeError):
    """Optimistic-concurrency revision mismatch."""

    def __init__(self, expected: int, actual: int):
        super().__init__(f"expected revision {expected}, project is at {actual}")
        self.expected = expected
        self.actual = actual


class FinalizeBlockedError(ArcforgeError):
    """Graph fails validation for the project's arc and ending count."""

    def __init__(self, report):
        super().__init__(f"graph not ready to finalize: {report}")
        self.report = report
