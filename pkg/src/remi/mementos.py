"""Mementos (picture-like triggers), their tags, and elicited life stories."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .clock import to_iso

SLOTS = ("place", "time", "people", "occasion", "emotion")
FREE_SLOT = "free"
MEDIA_KINDS = ("picture", "song", "video")
VISIBILITIES = ("private", "public")


class MementoError(ValueError):
    pass


@dataclass
class DetectedFeature:
    label: str
    salience: float
    source: str = "fixture"

    def __post_init__(self):
        if not 0.0 <= self.salience <= 1.0:
            raise MementoError(f"feature salience out of range: {self.salience}")

    def to_doc(self) -> dict:
        return {"label": self.label, "salience": self.salience, "source": self.source}

    @classmethod
    def from_doc(cls, doc: dict) -> "DetectedFeature":
        return cls(label=doc["label"], salience=doc["salience"], source=doc.get("source", "fixture"))


@dataclass
class Tag:
    slot: str
    value: str
    confirmed_by_user: bool = False
    source_turn: int | None = None

    def __post_init__(self):
        if self.slot not in SLOTS and self.slot != FREE_SLOT:
            raise MementoError(f"unknown tag slot: {self.slot!r}")

    def to_doc(self) -> dict:
        return {
            "slot": self.slot,
            "value": self.value,
            "confirmed_by_user": self.confirmed_by_user,
            "source_turn": self.source_turn,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Tag":
        return cls(
            slot=doc["slot"],
            value=doc["value"],
            confirmed_by_user=doc["confirmed_by_user"],
            source_turn=doc.get("source_turn"),
        )


@dataclass
class Memento:
    memento_id: str
    owner: str
    media_kind: str
    uri_or_path: str
    visibility: str = "private"
    features: list[DetectedFeature] = field(default_factory=list)
    tags: list[Tag] = field(default_factory=list)
    created_at: str = ""

    def __post_init__(self):
        if self.media_kind not in MEDIA_KINDS:
            raise MementoError(f"unknown media kind: {self.media_kind!r}")
        if self.visibility not in VISIBILITIES:
            raise MementoError(f"unknown visibility: {self.visibility!r}")

    def top_feature(self) -> DetectedFeature | None:
        return self.features[0] if self.features else None

    def to_doc(self) -> dict:
        return {
            "memento_id": self.memento_id,
            "owner": self.owner,
            "media_kind": self.media_kind,
            "uri_or_path": self.uri_or_path,
            "visibility": self.visibility,
            "features": [f.to_doc() for f in self.features],
            "tags": [t.to_doc() for t in self.tags],
            "created_at": self.created_at,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Memento":
        return cls(
            memento_id=doc["memento_id"],
            owner=doc["owner"],
            media_kind=doc["media_kind"],
            uri_or_path=doc["uri_or_path"],
            visibility=doc["visibility"],
            features=[DetectedFeature.from_doc(f) for f in doc["features"]],
            tags=[Tag.from_doc(t) for t in doc["tags"]],
            created_at=doc.get("created_at", ""),
        )


@dataclass
class LifeStory:
    story_id: str
    session_id: str
    text: str
    memento_id: str | None = None
    entities_extracted: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.text.strip():
            raise MementoError("life story text must be non-empty")

    def to_doc(self) -> dict:
        return {
            "story_id": self.story_id,
            "session_id": self.session_id,
            "text": self.text,
            "memento_id": self.memento_id,
            "entities_extracted": list(self.entities_extracted),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "LifeStory":
        return cls(
            story_id=doc["story_id"],
            session_id=doc["session_id"],
            text=doc["text"],
            memento_id=doc.get("memento_id"),
            entities_extracted=list(doc.get("entities_extracted", [])),
        )


# ---------------------------------------------------------------------------
# operations


def make_memento(
    memento_id: str,
    owner: str,
    media_kind: str,
    uri_or_path: str,
    visibility: str,
    features: list[DetectedFeature],
    now: int,
) -> Memento:
    """New memento with features normalized to descending salience, zero tags."""
    ordered = sorted(features, key=lambda f: (-f.salience, f.label))
    return Memento(
        memento_id=memento_id,
        owner=owner,
        media_kind=media_kind,
        uri_or_path=uri_or_path,
        visibility=visibility,
        features=ordered,
        created_at=to_iso(now),
    )


def confirmed_slots(memento: Memento) -> dict[str, str]:
    return {
        tag.slot: tag.value
        for tag in memento.tags
        if tag.confirmed_by_user and tag.slot != FREE_SLOT
    }


def unfilled_slots(memento: Memento) -> list[str]:
    """Non-free slots without a confirmed tag, in fixed priority order."""
    filled = confirmed_slots(memento)
    return [slot for slot in SLOTS if slot not in filled]


def attach_tag(memento: Memento, tag: Tag) -> None:
    """Append a tag; a confirmed tag on an already-confirmed non-free slot
    replaces the old one, which is archived as free-slot history."""
    if tag.confirmed_by_user and tag.slot != FREE_SLOT:
        for i, existing in enumerate(memento.tags):
            if existing.slot == tag.slot and existing.confirmed_by_user:
                archived = replace(existing, slot=FREE_SLOT, confirmed_by_user=False)
                memento.tags[i] = archived
                break
    memento.tags.append(tag)


def copy_memento(memento: Memento) -> Memento:
    return Memento.from_doc(memento.to_doc())
