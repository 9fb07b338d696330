"""Life model: typed knowledge about a person accumulated across sessions.

Entities are (category, predicate, object) facts anchored to a period of life.
Periods form a specificity lattice (unknown < life-stage < decade <
exact-year-range); asserting a fact that is already known with a vaguer period
refines it in place instead of duplicating it.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .clock import to_iso

CATEGORIES = ("life-event", "habit-skill", "value", "preference", "relationship")
PROVENANCES = ("user-stated", "seeded", "inferred")
PERIOD_KINDS = ("decade", "life-stage", "exact-year-range", "unknown")

_SPECIFICITY = {"unknown": 0, "life-stage": 1, "decade": 2, "exact-year-range": 3}

KNOWS_CONFIDENCE_THRESHOLD = 0.5


class VocabularyError(ValueError):
    """Category/predicate pair not in the controlled vocabulary."""


class ProfileError(ValueError):
    pass


def normalize_object(value: str) -> str:
    return value.strip().casefold()


# ---------------------------------------------------------------------------
# periods


@dataclass(frozen=True)
class LifePeriod:
    kind: str = "unknown"
    start_year: int | None = None
    end_year: int | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in PERIOD_KINDS:
            raise ProfileError(f"unknown period kind: {self.kind!r}")
        if self.kind == "unknown" and (self.start_year is not None or self.end_year is not None):
            raise ProfileError("unknown period must not carry years")
        if self.kind == "exact-year-range":
            if self.start_year is None or self.end_year is None:
                raise ProfileError("exact-year-range requires start and end years")
            if self.start_year > self.end_year:
                raise ProfileError("exact-year-range start year after end year")
        if self.kind == "decade" and self.start_year is None:
            raise ProfileError("decade period requires a start year")
        if self.kind == "life-stage" and not self.label:
            raise ProfileError("life-stage period requires a label")

    @property
    def specificity(self) -> int:
        return _SPECIFICITY[self.kind]

    def key(self) -> tuple:
        if self.kind == "unknown":
            return ("unknown",)
        if self.kind == "life-stage":
            return ("life-stage", self.label.strip().casefold())
        if self.kind == "decade":
            return ("decade", self.start_year)
        return ("exact-year-range", self.start_year, self.end_year)

    def to_doc(self) -> dict:
        return {
            "kind": self.kind,
            "start_year": self.start_year,
            "end_year": self.end_year,
            "label": self.label,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "LifePeriod":
        return cls(
            kind=doc["kind"],
            start_year=doc.get("start_year"),
            end_year=doc.get("end_year"),
            label=doc.get("label", ""),
        )

    @classmethod
    def unknown(cls) -> "LifePeriod":
        return cls()

    @classmethod
    def decade(cls, start_year: int, label: str = "") -> "LifePeriod":
        return cls(
            kind="decade",
            start_year=start_year,
            end_year=start_year + 9,
            label=label or f"the {start_year % 100}s",
        )

    @classmethod
    def life_stage(cls, label: str) -> "LifePeriod":
        return cls(kind="life-stage", label=label)

    @classmethod
    def year_range(cls, start_year: int, end_year: int, label: str = "") -> "LifePeriod":
        return cls(kind="exact-year-range", start_year=start_year, end_year=end_year, label=label)


_DECADE_2DIGIT = re.compile(r"\b(?:the\s+)?(\d{2})'?s\b", re.IGNORECASE)
_DECADE_4DIGIT = re.compile(r"\b(?:the\s+)?((?:19|20)\d)0'?s\b", re.IGNORECASE)
_EXACT_YEAR = re.compile(r"\b(19\d{2}|20[0-2]\d)\b")
_DECADE_WORDS = {
    "twenties": 1920, "thirties": 1930, "forties": 1940, "fifties": 1950,
    "sixties": 1960, "seventies": 1970, "eighties": 1980, "nineties": 1990,
}
_LIFE_STAGES = (
    "childhood", "child", "youth", "teenager", "school", "college",
    "university", "retirement", "newlywed",
)


def period_from_text(text: str) -> LifePeriod:
    """Best-effort period from a time expression; unknown when nothing matches."""
    match = _DECADE_4DIGIT.search(text)
    if match:
        return LifePeriod.decade(int(match.group(1)) * 10, label=match.group(0).lower())
    match = _DECADE_2DIGIT.search(text)
    if match:
        two = int(match.group(1))
        start = (1900 + two) if two >= 30 else (2000 + two)
        return LifePeriod.decade(start, label=match.group(0).lower())
    lowered = text.lower()
    for word, start in _DECADE_WORDS.items():
        if word in lowered:
            return LifePeriod.decade(start, label=f"the {word}")
    match = _EXACT_YEAR.search(text)
    if match:
        year = int(match.group(1))
        return LifePeriod.year_range(year, year, label=match.group(0))
    for stage in _LIFE_STAGES:
        if re.search(rf"\b{stage}\b", lowered):
            return LifePeriod.life_stage(stage)
    return LifePeriod.unknown()


# ---------------------------------------------------------------------------
# vocabulary


class Vocabulary:
    """Controlled category/predicate table, shipped as a data file."""

    def __init__(self, table: dict[str, list[str]]):
        self._by_category = {category: set(preds) for category, preds in table.items()}
        for category in self._by_category:
            if category not in CATEGORIES:
                raise VocabularyError(f"unknown category in vocabulary file: {category!r}")

    @classmethod
    def load(cls, path: str | Path | None = None) -> "Vocabulary":
        if path is None:
            text = resources.files("remi").joinpath("data/vocabulary.json").read_text("utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls(json.loads(text))

    def check(self, category: str, predicate: str) -> None:
        if category not in CATEGORIES:
            raise VocabularyError(f"unknown category: {category!r}")
        if predicate not in self._by_category.get(category, ()):
            raise VocabularyError(
                f"predicate {predicate!r} is not valid for category {category!r}"
            )

    def predicates(self, category: str) -> list[str]:
        return sorted(self._by_category.get(category, ()))


_default_vocabulary: Vocabulary | None = None


def default_vocabulary() -> Vocabulary:
    global _default_vocabulary
    if _default_vocabulary is None:
        _default_vocabulary = Vocabulary.load()
    return _default_vocabulary


# ---------------------------------------------------------------------------
# entities and profiles


@dataclass
class KnowledgeEntity:
    id: str
    category: str
    predicate: str
    object: str
    period: LifePeriod = field(default_factory=LifePeriod.unknown)
    confidence: float = 1.0
    provenance: str = "user-stated"
    source_turn: int | None = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ProfileError(f"unknown category: {self.category!r}")
        if self.provenance not in PROVENANCES:
            raise ProfileError(f"unknown provenance: {self.provenance!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ProfileError(f"confidence out of range: {self.confidence}")
        if self.provenance == "user-stated" and self.confidence != 1.0:
            raise ProfileError("user-stated knowledge must carry confidence 1.0")

    def merge_key(self) -> tuple:
        return (self.category, self.predicate, normalize_object(self.object))

    def triple(self) -> tuple[str, str, str]:
        return (self.category, self.predicate, normalize_object(self.object))

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "category": self.category,
            "predicate": self.predicate,
            "object": self.object,
            "period": self.period.to_doc(),
            "confidence": self.confidence,
            "provenance": self.provenance,
            "source_turn": self.source_turn,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "KnowledgeEntity":
        return cls(
            id=doc["id"],
            category=doc["category"],
            predicate=doc["predicate"],
            object=doc["object"],
            period=LifePeriod.from_doc(doc["period"]),
            confidence=doc["confidence"],
            provenance=doc["provenance"],
            source_turn=doc.get("source_turn"),
        )


@dataclass
class PersonProfile:
    person_id: str
    display_name: str
    entities: list[KnowledgeEntity] = field(default_factory=list)
    created_at: str = ""
    updated_at: str = ""

    def entity_ids(self) -> set[str]:
        return {entity.id for entity in self.entities}

    def next_entity_id(self) -> str:
        highest = 0
        for entity in self.entities:
            match = re.fullmatch(r"e-(\d+)", entity.id)
            if match:
                highest = max(highest, int(match.group(1)))
        return f"e-{highest + 1:04d}"

    def to_doc(self) -> dict:
        return {
            "person_id": self.person_id,
            "display_name": self.display_name,
            "entities": [entity.to_doc() for entity in self.entities],
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "PersonProfile":
        return cls(
            person_id=doc["person_id"],
            display_name=doc["display_name"],
            entities=[KnowledgeEntity.from_doc(e) for e in doc["entities"]],
            created_at=doc.get("created_at", ""),
            updated_at=doc.get("updated_at", ""),
        )


# ---------------------------------------------------------------------------
# operations


def assert_knowledge(
    profile: PersonProfile,
    entity: KnowledgeEntity,
    vocabulary: Vocabulary | None = None,
    now: int | None = None,
) -> str:
    """Insert or merge one entity; returns 'inserted', 'merged' or 'refined'.

    Equal-key entities (same category/predicate/normalized object) merge:
    confidence keeps the max, and the stored period is replaced only when the
    incoming one is strictly more specific. Same-specificity but different
    periods (e.g. two different decades) stay as separate entities.
    """
    (vocabulary or default_vocabulary()).check(entity.category, entity.predicate)

    candidates = [e for e in profile.entities if e.merge_key() == entity.merge_key()]
    outcome = "inserted"
    target: KnowledgeEntity | None = None

    for existing in candidates:
        if existing.period.key() == entity.period.key():
            target, outcome = existing, "merged"
            break
    if target is None:
        for existing in candidates:
            if entity.period.specificity > existing.period.specificity:
                target, outcome = existing, "refined"
                break
    if target is None:
        for existing in candidates:
            if entity.period.specificity < existing.period.specificity:
                target, outcome = existing, "merged"
                break

    if target is None:
        if entity.id in profile.entity_ids():
            raise ProfileError(f"duplicate entity id: {entity.id!r}")
        profile.entities.append(entity)
    else:
        target.confidence = max(target.confidence, entity.confidence)
        if entity.provenance == "user-stated":
            target.provenance = "user-stated"
        if outcome == "refined":
            target.period = entity.period
        if entity.source_turn is not None:
            target.source_turn = entity.source_turn

    if now is not None:
        profile.updated_at = to_iso(now)
    return outcome


def query_knowledge(
    profile: PersonProfile,
    category: str | None = None,
    predicate: str | None = None,
    object_substring: str | None = None,
) -> list[KnowledgeEntity]:
    """Matching entities in deterministic (predicate, object, insertion) order."""
    needle = normalize_object(object_substring) if object_substring else None
    matches = [
        (entity.predicate, normalize_object(entity.object), seq, entity)
        for seq, entity in enumerate(profile.entities)
        if (category is None or entity.category == category)
        and (predicate is None or entity.predicate == predicate)
        and (needle is None or needle in normalize_object(entity.object))
    ]
    matches.sort(key=lambda row: row[:3])
    return [row[3] for row in matches]


def knows(
    profile: PersonProfile,
    category: str,
    predicate: str,
    object: str | None = None,
) -> bool:
    """True iff a matching entity exists with confidence >= 0.5."""
    target = normalize_object(object) if object is not None else None
    for entity in profile.entities:
        if entity.category != category or entity.predicate != predicate:
            continue
        if target is not None and normalize_object(entity.object) != target:
            continue
        if entity.confidence >= KNOWS_CONFIDENCE_THRESHOLD:
            return True
    return False


def knowledge_triples(profile: PersonProfile, min_confidence: float = 0.0) -> set[tuple]:
    return {e.triple() for e in profile.entities if e.confidence >= min_confidence}


def new_profile(person_id: str, display_name: str, now: int) -> PersonProfile:
    stamp = to_iso(now)
    return PersonProfile(
        person_id=person_id, display_name=display_name, created_at=stamp, updated_at=stamp
    )


def copy_profile(profile: PersonProfile) -> PersonProfile:
    return PersonProfile(
        person_id=profile.person_id,
        display_name=profile.display_name,
        entities=[replace(e) for e in profile.entities],
        created_at=profile.created_at,
        updated_at=profile.updated_at,
    )
