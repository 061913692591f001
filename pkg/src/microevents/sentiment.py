"""Lexicon-based sentiment scoring with four per-message components.

Simplified rule set: token valences from a lexicon, sign flip (scaled by
0.74) for a negator within the three preceding tokens, and the standard
s / sqrt(s^2 + 15) compound normalization.  Boosters, punctuation emphasis
and idiom handling are deliberately out of scope.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

NEGATION_SCALE = 0.74
NEGATION_WINDOW = 3
COMPOUND_NORM = 15.0

NEGATORS = frozenset(
    """not no never none neither nor cannot cant wont dont doesnt didnt isnt
    arent wasnt werent wouldnt couldnt shouldnt hasnt havent hadnt aint
    without don doesn didn isn aren wasn weren won wouldn couldn shouldn
    hasn haven hadn ain""".split()
)

_WORD_RE = re.compile(r"[a-z0-9]+")


class SentimentError(ValueError):
    pass


@dataclass(frozen=True)
class SentimentScore:
    negative: float
    neutral: float
    positive: float
    compound: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.negative, self.neutral, self.positive, self.compound)


def load_lexicon(path: str | None = None) -> dict[str, float]:
    """Valence lexicon (TSV ``token<TAB>valence``); ships with a default."""
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise SentimentError(f"cannot load sentiment lexicon: {exc}") from exc
    else:
        text = (
            resources.files("microevents.assets").joinpath("sentiment_lexicon.tsv")
            .read_text(encoding="utf-8")
        )
    lexicon: dict[str, float] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        token, valence = line.split("\t")
        v = float(valence)
        if not -4.0 <= v <= 4.0:
            raise SentimentError(f"valence out of [-4, 4] for {token!r}: {v}")
        lexicon[token] = v
    return lexicon


def score_sentiment(clean_text: str, lexicon: dict[str, float]) -> SentimentScore:
    """Four components: negative/neutral/positive shares plus the compound."""
    tokens = _WORD_RE.findall(clean_text.lower())
    if not tokens:
        return SentimentScore(0.0, 0.0, 0.0, 0.0)

    total_valence = 0.0
    pos_mass = 0.0
    neg_mass = 0.0
    neu_mass = 0.0
    for i, tok in enumerate(tokens):
        valence = lexicon.get(tok, 0.0)
        if valence != 0.0:
            lo = max(0, i - NEGATION_WINDOW)
            if any(t in NEGATORS for t in tokens[lo:i]):
                valence = -NEGATION_SCALE * valence
        total_valence += valence
        if valence > 0.0:
            pos_mass += valence
        elif valence < 0.0:
            neg_mass += -valence
        else:
            neu_mass += 1.0

    compound = total_valence / (total_valence * total_valence + COMPOUND_NORM) ** 0.5
    mass = pos_mass + neg_mass + neu_mass
    return SentimentScore(
        negative=neg_mass / mass,
        neutral=neu_mass / mass,
        positive=pos_mass / mass,
        compound=compound,
    )


SENTIMENT_COMPONENTS = ("negative", "neutral", "positive", "compound")


def feature_names() -> list[str]:
    return [f"sentiment_{c}" for c in SENTIMENT_COMPONENTS]
