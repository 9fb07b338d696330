"""Loading of the line-oriented lexicon and gazetteer data files."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path


def _norm_token(raw: str) -> str:
    return re.sub(r"[^a-z0-9]+", "", raw.lower())


def norm_phrase(raw: str) -> tuple[str, ...]:
    return tuple(t for t in (_norm_token(part) for part in raw.split()) if t)


def _read_lines(name: str, override: str | Path | None) -> list[str]:
    if override is not None:
        text = Path(override).read_text(encoding="utf-8")
    else:
        text = resources.files("remi").joinpath(f"data/{name}").read_text("utf-8")
    lines = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            lines.append(line)
    return lines


@dataclass
class LexiconSet:
    sentiment: dict[str, float] = field(default_factory=dict)
    negations: set[str] = field(default_factory=set)
    greetings: set[tuple[str, ...]] = field(default_factory=set)
    farewells: set[tuple[str, ...]] = field(default_factory=set)
    affirmations: set[tuple[str, ...]] = field(default_factory=set)
    denials: set[tuple[str, ...]] = field(default_factory=set)
    thanks: set[tuple[str, ...]] = field(default_factory=set)
    places: set[tuple[str, ...]] = field(default_factory=set)
    kinship: set[str] = field(default_factory=set)

    @classmethod
    def load(cls, overrides: dict[str, str | Path] | None = None) -> "LexiconSet":
        """Load the packaged lexicons; ``overrides`` maps file stem to a path."""
        overrides = overrides or {}

        sentiment: dict[str, float] = {}
        for line in _read_lines("sentiment.tsv", overrides.get("sentiment")):
            token, weight = line.split("\t")
            sentiment[_norm_token(token)] = float(weight)

        def phrases(name: str) -> set[tuple[str, ...]]:
            return {norm_phrase(line) for line in _read_lines(f"{name}.txt", overrides.get(name))}

        return cls(
            sentiment=sentiment,
            negations={_norm_token(line) for line in _read_lines("negations.txt", overrides.get("negations"))},
            greetings=phrases("greetings"),
            farewells=phrases("farewells"),
            affirmations=phrases("affirmations"),
            denials=phrases("denials"),
            thanks=phrases("thanks"),
            places=phrases("places"),
            kinship={_norm_token(line) for line in _read_lines("kinship.txt", overrides.get("kinship"))},
        )


_default: LexiconSet | None = None


def default_lexicons() -> LexiconSet:
    global _default
    if _default is None:
        _default = LexiconSet.load()
    return _default
