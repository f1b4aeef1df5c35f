"""Bundled keyword lexicon for the 27-category emotion taxonomy.

Stands in for a neural multi-label classifier: each category carries a small
word list, and a text's probability for a category is the fraction of its
tokens found in that list. Coverage is deliberately shallow — enough to score
generated storylines, not general prose.
"""

LEXICON: dict[str, tuple[str, ...]] = {
    # positive
    "admiration": ("admire", "admiration", "noble", "splendid", "magnificent", "heroic"),
    "amusement": ("amused", "amusing", "playful", "chuckle", "grin", "jest"),
    "approval": ("approve", "approval", "worthy", "deserved", "honored"),
    "caring": ("tender", "gentle", "comfort", "comforting", "warmth", "kindly"),
    "desire": ("desire", "longing", "yearning", "craving"),
    "excitement": ("excited", "excitement", "thrill", "thrilling", "eager", "exhilarated"),
    "gratitude": ("grateful", "gratitude", "thankful", "blessing", "blessed"),
    "joy": (
        "joy",
        "joyful",
        "delight",
        "delighted",
        "cheer",
        "cheerful",
        "bliss",
        "laughter",
        "merry",
        "jubilant",
    ),
    "love": ("love", "beloved", "adore", "devotion", "cherish"),
    "optimism": (
        "hope",
        "hopeful",
        "promise",
        "promising",
        "dawn",
        "bright",
        "brightening",
        "faith",
        "heartened",
        "uplifted",
    ),
    "pride": ("proud", "pride", "triumph", "triumphant", "victory", "victorious"),
    "relief": ("relief", "relieved", "soothe", "soothed", "unburdened"),
    # negative
    "anger": ("anger", "angry", "rage", "fury", "furious", "wrath"),
    "annoyance": ("annoyed", "annoyance", "irritated", "vexed"),
    "disappointment": ("disappointment", "disappointed", "dismay", "dismayed"),
    "disapproval": ("disapproval", "condemn", "scorn", "rebuke"),
    "disgust": ("disgust", "disgusted", "revulsion", "vile", "foul"),
    "embarrassment": ("embarrassed", "embarrassment", "shame", "ashamed", "humiliated"),
    "fear": (
        "fear",
        "fearful",
        "afraid",
        "terror",
        "dread",
        "dreadful",
        "frightened",
        "menace",
        "menacing",
        "foreboding",
    ),
    "grief": ("grief", "grieve", "grieving", "mourning", "lament", "anguish"),
    "nervousness": ("nervous", "nervousness", "anxious", "anxiety", "uneasy", "jittery"),
    "remorse": ("remorse", "regret", "regretful", "guilt", "guilty"),
    "sadness": (
        "sad",
        "sadness",
        "sorrow",
        "sorrowful",
        "weep",
        "weeping",
        "tears",
        "mournful",
        "heartbroken",
        "forlorn",
    ),
    # ambiguous / neutral
    "confusion": ("confused", "confusion", "puzzled", "bewildered", "baffled"),
    "curiosity": ("curious", "curiosity", "intrigued", "inquisitive"),
    "realization": ("realize", "realized", "realization", "insight", "revelation"),
    "surprise": ("surprise", "surprised", "astonished", "startled", "unexpected"),
    "neutral": ("plain", "ordinary", "usual", "routine", "unremarkable"),
}

# Direction-tagged anchors used by the deterministic template backend when it
# injects tone into revised storylines. Each anchor list must be long enough
# to supply eight distinct words.
RISE_ANCHOR_LABELS = ("joy", "optimism")
FALL_ANCHOR_LABELS = ("sadness", "fear")

ALL_LEXICON_WORDS = frozenset(w for words in LEXICON.values() for w in words)
