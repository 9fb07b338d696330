"""Declarative rule system: condition evaluation over the dialog context and
deterministic action selection.

A rule fires when every condition holds (evaluated in order, accumulating
variable bindings), its cooldown has elapsed, its action kind survives the
disengagement pivot gate, and the action's elicitation target is not already
satisfied (the never-re-ask guarantee). Among firing rules the highest
priority wins; ties break by fewest firings this session, then smallest
rule id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .session import ACTION_KINDS

CONDITION_KINDS = (
    "slot-unfilled", "feature-present", "knows", "not-knows", "tag-equals",
    "engagement-below", "engagement-at-least", "open-task-is",
    "questions-on-memento-at-least", "always",
)

# action kinds that stay eligible once the bot decides to pivot away from the
# current memento
PIVOT_KINDS = frozenset({"bring-content", "suggest-connection", "react", "close"})

DEFAULT_PIVOT_THRESHOLD = 0.0
DEFAULT_ENGAGEMENT_WINDOW = 4
DEFAULT_QUESTION_CAP = 8


class RuleError(ValueError):
    pass


@dataclass
class Rule:
    rule_id: str
    priority: int
    conditions: list[dict]
    action_kind: str
    action_args: dict = field(default_factory=dict)
    cooldown_turns: int = 0

    def __post_init__(self):
        if not self.conditions:
            raise RuleError(f"rule {self.rule_id!r}: conditions must be non-empty")
        if self.cooldown_turns < 0:
            raise RuleError(f"rule {self.rule_id!r}: cooldown must be >= 0")
        if self.action_kind not in ACTION_KINDS:
            raise RuleError(f"rule {self.rule_id!r}: unknown action kind {self.action_kind!r}")
        for condition in self.conditions:
            if condition.get("kind") not in CONDITION_KINDS:
                raise RuleError(
                    f"rule {self.rule_id!r}: unknown condition kind {condition.get('kind')!r}"
                )

    def to_doc(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "priority": self.priority,
            "conditions": [dict(c) for c in self.conditions],
            "action_kind": self.action_kind,
            "action_args": dict(self.action_args),
            "cooldown_turns": self.cooldown_turns,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Rule":
        return cls(
            rule_id=doc["rule_id"],
            priority=doc["priority"],
            conditions=doc["conditions"],
            action_kind=doc["action_kind"],
            action_args=dict(doc.get("action_args", {})),
            cooldown_turns=doc.get("cooldown_turns", 0),
        )


class RuleDatabase:
    def __init__(self, rules: list[Rule], path: Path | None = None):
        seen = set()
        for rule in rules:
            if rule.rule_id in seen:
                raise RuleError(f"duplicate rule id: {rule.rule_id!r}")
            seen.add(rule.rule_id)
        self.rules = list(rules)
        self.path = path
        self._mtime = path.stat().st_mtime_ns if path else None

    @classmethod
    def load(cls, path: str | Path) -> "RuleDatabase":
        path = Path(path)
        try:
            docs = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise RuleError(f"{path.name}: line {exc.lineno}: {exc.msg}") from exc
        return cls([Rule.from_doc(doc) for doc in docs], path=path)

    def reload_if_changed(self) -> None:
        if self.path is None:
            return
        mtime = self.path.stat().st_mtime_ns
        if mtime != self._mtime:
            fresh = RuleDatabase.load(self.path)
            self.rules = fresh.rules
            self._mtime = mtime


# ---------------------------------------------------------------------------
# dialog context


@dataclass
class DialogContext:
    """Everything action selection may look at, as plain data."""

    person_id: str = ""
    active_memento_id: str | None = None
    features: list[str] = field(default_factory=list)
    confirmed_tags: dict = field(default_factory=dict)  # slot -> value
    unfilled_slots: list[str] = field(default_factory=list)
    recent_questions: list[str] = field(default_factory=list)
    recent_entities: list[tuple[str, str]] = field(default_factory=list)
    engagement_window: list[float] = field(default_factory=list)  # last N user sentiments
    engagement_cum: float = 0.0
    user_turn_count: int = 0
    questions_on_memento: int = 0
    knowledge: set = field(default_factory=set)  # {(category, predicate, object_norm)}
    sessions_count: int = 0
    discussed_mementos: set = field(default_factory=set)
    asked_question_ids: set = field(default_factory=set)
    open_task_kind: str = "none"  # none | slot | relation
    content_candidate: str | None = None
    suggestion_candidate: dict | None = None
    ambient_bindings: dict = field(default_factory=dict)
    rule_firings: dict = field(default_factory=dict)  # rule_id -> {"last": int, "count": int}
    selection_index: int = 0
    pivot_threshold: float = DEFAULT_PIVOT_THRESHOLD
    question_cap: int = DEFAULT_QUESTION_CAP


@dataclass
class Selection:
    rule: Rule
    bindings: dict
    pivoted: bool


def disengagement_pivot(context: DialogContext) -> bool:
    """True when the gain from eliciting on the current memento has dropped:
    low recent engagement, nothing left to fill, or the per-memento cap hit."""
    if context.active_memento_id is not None:
        if not context.unfilled_slots:
            return True
        if context.questions_on_memento >= context.question_cap:
            return True
    window = context.engagement_window
    if window and (sum(window) / len(window)) < context.pivot_threshold:
        return True
    return False


# ---------------------------------------------------------------------------
# condition evaluation


def _resolve(value, bindings: dict):
    """'$name' references read from accumulated bindings; unbound -> None."""
    if isinstance(value, str) and value.startswith("$"):
        return bindings.get(value[1:])
    return value


def _norm(value: str) -> str:
    return str(value).strip().casefold()


def _knows_match(context: DialogContext, category, predicate, object_value) -> list[str]:
    """Objects of matching knowledge triples (original casing, deterministically
    ordered); comparison is case-insensitive."""
    matches = [
        obj
        for cat, pred, obj in context.knowledge
        if cat == category
        and pred == predicate
        and (object_value is None or _norm(obj) == _norm(object_value))
    ]
    return sorted(matches)


def evaluate_condition(condition: dict, context: DialogContext, bindings: dict) -> bool:
    """Evaluate one condition, possibly extending ``bindings`` in place."""
    kind = condition["kind"]
    if kind == "always":
        return True
    if kind == "slot-unfilled":
        return condition["slot"] in context.unfilled_slots
    if kind == "feature-present":
        label = _resolve(condition["label"], bindings)
        return label is not None and _norm(label) in {_norm(f) for f in context.features}
    if kind in ("knows", "not-knows"):
        object_value = _resolve(condition.get("object"), bindings)
        if condition.get("object") is not None and object_value is None:
            return False  # reference to an unbound variable never matches
        matches = _knows_match(context, condition["category"], condition["predicate"], object_value)
        if kind == "not-knows":
            return not matches
        if not matches:
            return False
        if condition.get("bind"):
            bindings[condition["bind"]] = matches[0]
        return True
    if kind == "tag-equals":
        value = context.confirmed_tags.get(condition["slot"])
        if value is None:
            return False
        if "value" in condition:
            expected = _resolve(condition["value"], bindings)
            if expected is None or _norm(expected) != _norm(value):
                return False
        if condition.get("bind"):
            bindings[condition["bind"]] = value
        return True
    if kind == "engagement-below":
        return context.engagement_cum < condition["threshold"]
    if kind == "engagement-at-least":
        return context.engagement_cum >= condition["threshold"]
    if kind == "open-task-is":
        return context.open_task_kind == condition["task"]
    if kind == "questions-on-memento-at-least":
        return context.questions_on_memento >= condition["count"]
    raise RuleError(f"unknown condition kind: {kind!r}")


def _cooldown_elapsed(rule: Rule, context: DialogContext) -> bool:
    record = context.rule_firings.get(rule.rule_id)
    if record is None or record.get("last") is None:
        return True
    return (context.selection_index - record["last"]) > rule.cooldown_turns


def action_feasible(rule: Rule, bindings: dict, context: DialogContext) -> bool:
    """Feasibility plus the never-re-ask guarantee: elicitation targets that
    are already confirmed or known are never selected."""
    kind = rule.action_kind
    if kind == "elicit-slot":
        if context.active_memento_id is None:
            return False
        slot = rule.action_args.get("slot")
        return slot in context.unfilled_slots
    if kind == "elicit-relation":
        object_value = _resolve(
            "$" + rule.action_args["object_binding"]
            if "object_binding" in rule.action_args
            else rule.action_args.get("object"),
            bindings,
        )
        if object_value is None:
            return False
        category = rule.action_args.get("category", "life-event")
        candidates = rule.action_args.get("candidates", ["lived-in", "visited"])
        obj = _norm(object_value)
        return not any(
            cat == category and pred in candidates and _norm(o) == obj
            for cat, pred, o in context.knowledge
        )
    if kind == "bring-content":
        return context.content_candidate is not None
    if kind == "suggest-connection":
        return context.suggestion_candidate is not None
    return True


def eligible_rules(context: DialogContext, rules: list[Rule]) -> list[Selection]:
    pivoted = disengagement_pivot(context)
    selections = []
    for rule in rules:
        if pivoted and rule.action_kind not in PIVOT_KINDS:
            continue
        if rule.action_kind.startswith("elicit-") and context.open_task_kind != "none":
            continue  # one elicitation goal at a time; a dodged question stays open
        if not _cooldown_elapsed(rule, context):
            continue
        bindings = dict(context.ambient_bindings)
        if not all(evaluate_condition(c, context, bindings) for c in rule.conditions):
            continue
        if not action_feasible(rule, bindings, context):
            continue
        selections.append(Selection(rule=rule, bindings=bindings, pivoted=pivoted))
    return selections


def select_action(context: DialogContext, rules: list[Rule]) -> Selection:
    """Deterministic pick: highest priority, then fewest firings this session,
    then lexicographically smallest rule id."""
    candidates = eligible_rules(context, rules)
    if not candidates:
        raise RuleError("no applicable rule; the database must include an always-on fallback")

    def sort_key(selection: Selection):
        firing = context.rule_firings.get(selection.rule.rule_id, {})
        return (-selection.rule.priority, firing.get("count", 0), selection.rule.rule_id)

    return min(candidates, key=sort_key)
