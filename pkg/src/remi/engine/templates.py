"""Question templates: slot-filling patterns with variable substitution and
deterministically chosen reaction preambles."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

_VAR_RE = re.compile(r"\{([a-z][a-z0-9-]*)\}")


class TemplateError(ValueError):
    pass


@dataclass
class QuestionTemplate:
    question_id: str
    target: dict  # {"kind": "slot", "slot": ...} | {"kind": "predicate", "predicate": ...} | {"kind": "action", "action": ...}
    pattern: str
    preamble_variants: list[str] = field(default_factory=list)
    applicability: dict = field(default_factory=dict)  # variable -> required value, or "*" for any

    def __post_init__(self):
        kind = self.target.get("kind")
        if kind not in ("slot", "predicate", "action"):
            raise TemplateError(f"template {self.question_id!r}: bad target kind {kind!r}")
        for text in [self.pattern, *self.preamble_variants]:
            for var in _VAR_RE.findall(text):
                if var not in self.applicability:
                    raise TemplateError(
                        f"template {self.question_id!r}: variable {{{var}}} not in applicability"
                    )

    def applies(self, bindings: dict) -> bool:
        for var, required in self.applicability.items():
            if var not in bindings:
                return False
            if required != "*" and str(bindings[var]) != str(required):
                return False
        return True

    def specificity(self) -> tuple[int, int]:
        exact = sum(1 for v in self.applicability.values() if v != "*")
        return (exact, len(self.applicability))

    def to_doc(self) -> dict:
        return {
            "question_id": self.question_id,
            "target": dict(self.target),
            "pattern": self.pattern,
            "preamble_variants": list(self.preamble_variants),
            "applicability": dict(self.applicability),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "QuestionTemplate":
        return cls(
            question_id=doc["question_id"],
            target=doc["target"],
            pattern=doc["pattern"],
            preamble_variants=list(doc.get("preamble_variants", [])),
            applicability=dict(doc.get("applicability", {})),
        )


def _substitute(text: str, bindings: dict, question_id: str) -> str:
    def repl(match: re.Match) -> str:
        var = match.group(1)
        if var not in bindings:
            raise TemplateError(f"template {question_id!r}: missing binding {{{var}}}")
        return str(bindings[var])

    return _VAR_RE.sub(repl, text)


def render_question(
    template: QuestionTemplate,
    bindings: dict,
    session_id: str,
    turn_index: int,
) -> str:
    """Substitute variables; preamble variant chosen by a stable hash of
    (session id, turn index) so replays render identically."""
    body = _substitute(template.pattern, bindings, template.question_id)
    if not template.preamble_variants:
        return body
    digest = hashlib.sha256(f"{session_id}:{turn_index}".encode()).digest()
    variant = template.preamble_variants[digest[0] % len(template.preamble_variants)]
    preamble = _substitute(variant, bindings, template.question_id)
    return f"{preamble} {body}".strip()


class TemplateDatabase:
    """Template collection, hot-reloadable from its source file between sessions."""

    def __init__(self, templates: list[QuestionTemplate], path: Path | None = None):
        ids = [t.question_id for t in templates]
        for qid in ids:
            if ids.count(qid) > 1:
                raise TemplateError(f"duplicate question id: {qid!r}")
        self.templates = list(templates)
        self.path = path
        self._mtime = path.stat().st_mtime_ns if path else None

    @classmethod
    def load(cls, path: str | Path) -> "TemplateDatabase":
        path = Path(path)
        try:
            docs = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise TemplateError(f"{path.name}: line {exc.lineno}: {exc.msg}") from exc
        return cls([QuestionTemplate.from_doc(doc) for doc in docs], path=path)

    def reload_if_changed(self) -> None:
        if self.path is None:
            return
        mtime = self.path.stat().st_mtime_ns
        if mtime != self._mtime:
            fresh = TemplateDatabase.load(self.path)
            self.templates = fresh.templates
            self._mtime = mtime

    def by_id(self, question_id: str) -> QuestionTemplate:
        for template in self.templates:
            if template.question_id == question_id:
                return template
        raise TemplateError(f"unknown question id: {question_id!r}")

    def select(self, target: dict, bindings: dict) -> QuestionTemplate:
        """Most specific applicable template for the target; id breaks ties."""
        candidates = [
            t for t in self.templates if t.target == target and t.applies(bindings)
        ]
        if not candidates:
            raise TemplateError(f"no applicable template for target {target!r}")
        candidates.sort(key=lambda t: (t.specificity(), ), reverse=True)
        best = candidates[0].specificity()
        tied = sorted(
            (t for t in candidates if t.specificity() == best),
            key=lambda t: t.question_id,
        )
        return tied[0]
