"""Deterministic offline language-understanding baseline.

Tokenizes, classifies intent by a fixed priority ladder, extracts entities via
gazetteer and pattern lookup, and scores sentiment from a weighted lexicon
with a two-token negation window. Entity values are always literal spans of
the input, never fabricated.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .lexicons import LexiconSet, default_lexicons

INTENTS = (
    "provide-info", "affirm", "deny", "greet", "farewell",
    "tell-story", "off-topic", "empty",
)

STORY_TOKEN_THRESHOLD = 12
NEGATION_WINDOW = 2

_TIME_PATTERNS = [
    re.compile(r"\b(?:the\s+)?(?:19|20)\d0'?s\b", re.IGNORECASE),
    re.compile(r"\b(?:the\s+)?\d{2}'?s\b", re.IGNORECASE),
    re.compile(r"\b(?:19\d{2}|20[0-2]\d)\b"),
    re.compile(
        r"\b(?:twenties|thirties|forties|fifties|sixties|seventies|eighties|nineties)\b",
        re.IGNORECASE,
    ),
    re.compile(
        r"\b(?:childhood|college|university|retirement|honeymoon)\b", re.IGNORECASE
    ),
]

# capitalized mid-sentence tokens that are clearly not names
_CAP_STOPWORDS = {"i", "im", "id", "ive", "ill", "mr", "mrs", "ms", "dr"}


@dataclass
class Token:
    raw: str
    norm: str
    start: int
    end: int


@dataclass
class Entity:
    kind: str  # a memento slot (place/time/people/...) or a knowledge predicate
    value: str
    span: tuple[int, int]

    def to_doc(self) -> dict:
        return {"kind": self.kind, "value": self.value, "span": list(self.span)}

    @classmethod
    def from_doc(cls, doc: dict) -> "Entity":
        return cls(kind=doc["kind"], value=doc["value"], span=tuple(doc["span"]))


@dataclass
class NluResult:
    intent: str
    entities: list[Entity] = field(default_factory=list)
    sentiment: float = 0.0
    tokens: list[str] = field(default_factory=list)

    def to_doc(self) -> dict:
        return {
            "intent": self.intent,
            "entities": [e.to_doc() for e in self.entities],
            "sentiment": self.sentiment,
            "tokens": list(self.tokens),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "NluResult":
        return cls(
            intent=doc["intent"],
            entities=[Entity.from_doc(e) for e in doc["entities"]],
            sentiment=doc["sentiment"],
            tokens=list(doc["tokens"]),
        )


def tokenize(text: str) -> list[Token]:
    tokens = []
    for match in re.finditer(r"\S+", text):
        norm = re.sub(r"[^a-z0-9]+", "", match.group(0).lower())
        if norm:
            tokens.append(Token(match.group(0), norm, match.start(), match.end()))
    return tokens


class NluBaseline:
    """Offline analyzer; makes no network calls."""

    def __init__(
        self,
        lexicons: LexiconSet | None = None,
        story_token_threshold: int = STORY_TOKEN_THRESHOLD,
        negation_window: int = NEGATION_WINDOW,
    ):
        self.lexicons = lexicons or default_lexicons()
        self.story_token_threshold = story_token_threshold
        self.negation_window = negation_window
        self._max_place_len = max((len(p) for p in self.lexicons.places), default=1)

    # -- public API -------------------------------------------------------

    def analyze_text(self, text: str, expected_slot: str | None = None) -> NluResult:
        tokens = tokenize(text)
        norms = [t.norm for t in tokens]
        entities = self._extract_entities(text, tokens, expected_slot)
        sentiment = self._score_sentiment(norms)
        intent = self._classify_intent(norms, entities)
        return NluResult(intent=intent, entities=entities, sentiment=sentiment, tokens=norms)

    def detect_social_markers(self, text: str) -> dict[str, bool]:
        norms = [t.norm for t in tokenize(text)]
        return {
            "greeting": self._has_phrase(norms, self.lexicons.greetings),
            "farewell": self._has_phrase(norms, self.lexicons.farewells),
            "thanks": self._has_phrase(norms, self.lexicons.thanks),
        }

    # -- intent -----------------------------------------------------------

    def _classify_intent(self, norms: list[str], entities: list[Entity]) -> str:
        if not norms:
            return "empty"
        if self._has_phrase(norms, self.lexicons.greetings):
            return "greet"
        if self._has_phrase(norms, self.lexicons.farewells):
            return "farewell"
        if self._has_leading_phrase(norms, self.lexicons.affirmations):
            return "affirm"
        if self._has_leading_phrase(norms, self.lexicons.denials):
            return "deny"
        if entities:
            return "provide-info"
        if len(norms) >= self.story_token_threshold:
            return "tell-story"
        return "off-topic"

    def _has_phrase(self, norms: list[str], phrases: set[tuple[str, ...]]) -> bool:
        for n in (1, 2):
            for i in range(len(norms) - n + 1):
                if tuple(norms[i : i + n]) in phrases:
                    return True
        return False

    def _has_leading_phrase(self, norms: list[str], phrases: set[tuple[str, ...]]) -> bool:
        """Affirm/deny only count when they open the utterance or the whole
        reply is short; 'no' buried in a narrative is not a denial."""
        positions = len(norms) if len(norms) <= 4 else 2
        for n in (1, 2):
            for i in range(min(positions, len(norms) - n + 1)):
                if tuple(norms[i : i + n]) in phrases:
                    return True
        return False

    # -- entities ---------------------------------------------------------

    def _extract_entities(
        self, text: str, tokens: list[Token], expected_slot: str | None
    ) -> list[Entity]:
        entities: list[Entity] = []
        claimed: set[int] = set()  # token indices already consumed

        # gazetteer places, longest phrase first
        i = 0
        while i < len(tokens):
            matched = 0
            for n in range(min(self._max_place_len, 3), 0, -1):
                if i + n > len(tokens):
                    continue
                if tuple(t.norm for t in tokens[i : i + n]) in self.lexicons.places:
                    start, end = tokens[i].start, tokens[i + n - 1].end
                    entities.append(Entity("place", text[start:end], (start, end)))
                    claimed.update(range(i, i + n))
                    matched = n
                    break
            i += matched or 1

        # time expressions (regex over the raw text)
        spans: list[tuple[int, int]] = []
        for pattern in _TIME_PATTERNS:
            for match in pattern.finditer(text):
                span = (match.start(), match.end())
                if any(s < span[1] and span[0] < e for s, e in spans):
                    continue
                spans.append(span)
                entities.append(Entity("time", match.group(0), span))
                for idx, token in enumerate(tokens):
                    if token.start >= span[0] and token.end <= span[1]:
                        claimed.add(idx)

        # "my <kin>" person references
        for idx in range(len(tokens) - 1):
            if tokens[idx].norm in ("my", "our") and tokens[idx + 1].norm in self.lexicons.kinship:
                start, end = tokens[idx].start, tokens[idx + 1].end
                entities.append(Entity("people", text[start:end], (start, end)))
                claimed.update((idx, idx + 1))

        # capitalized mid-sentence tokens: people, or the expected slot when
        # the engine is waiting on a place
        for idx in range(1, len(tokens)):
            if idx in claimed:
                continue
            token = tokens[idx]
            if not re.fullmatch(r"[A-Z][a-z]+", re.sub(r"[^A-Za-z]", "", token.raw)):
                continue
            if not token.raw[0].isupper():
                continue
            if tokens[idx - 1].raw.rstrip()[-1:] in (".", "!", "?"):
                continue
            if token.norm in _CAP_STOPWORDS or token.norm in self.lexicons.kinship:
                continue
            if token.norm in self.lexicons.sentiment or (token.norm,) in self.lexicons.places:
                continue
            kind = "place" if expected_slot == "place" else "people"
            entities.append(Entity(kind, text[token.start : token.end], (token.start, token.end)))

        # dedupe, keeping first occurrence; bias ordering toward the expected slot
        seen: set[tuple[str, str]] = set()
        unique: list[Entity] = []
        for entity in entities:
            key = (entity.kind, entity.value.casefold())
            if key not in seen:
                seen.add(key)
                unique.append(entity)
        if expected_slot:
            unique.sort(key=lambda e: (e.kind != expected_slot, e.span))
        else:
            unique.sort(key=lambda e: e.span)
        return unique

    # -- sentiment --------------------------------------------------------

    def _score_sentiment(self, norms: list[str]) -> float:
        total = 0.0
        hits = 0
        for idx, norm in enumerate(norms):
            weight = self.lexicons.sentiment.get(norm)
            if weight is None:
                continue
            window = norms[max(0, idx - self.negation_window) : idx]
            if any(w in self.lexicons.negations for w in window):
                weight = -weight
            total += weight
            hits += 1
        if hits == 0:
            return 0.0
        return max(-1.0, min(1.0, total / hits))
