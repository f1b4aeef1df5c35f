"""Emotional-arc-guided branching story and game level generation."""

from .arcs import (
    ArcDirection,
    ArcKind,
    ArcTemplate,
    assign_phases,
    canonical_template,
    target_valence_curve,
)
from .backends import RemoteBackend, TemplateBackend
from .entities import (
    ContinuityLedger,
    DifficultyParams,
    GameSpec,
    LevelEntities,
    PlayerData,
    apply_difficulty,
    carry_over,
    export_game_json,
    parse_game_json,
    validate_spec,
)
from .graph import (
    StoryEdge,
    StoryGraph,
    StoryNode,
    Trigger,
    TriggerKind,
    apply_edit,
    enumerate_paths,
    linearize,
    parse_trigger,
    validate_graph,
)
from .pipeline import (
    GenerationRequest,
    MindReset,
    finalize_chain,
    generate_entities,
    generate_skeleton,
    parse_structured_output,
    revise_node,
)
from .project import Project, ProjectStore
from .sim import audit_difficulty, challenge_score, check_traversability, simulate_path
from .valence import (
    EmotionPrediction,
    LexiconScorer,
    Trajectory,
    ValenceMap,
    default_valence_map,
    mean_trajectory,
    node_valence,
    shape_match,
    story_trajectory,
)

__version__ = "0.1.0"
