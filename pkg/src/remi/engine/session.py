"""Conversation state: sessions, turns, action plans, elicitation tasks.

A session document carries everything needed to recompute its metrics later:
the turn list, the task ledger, knowledge/tag events with the turn they
happened at, and a snapshot of what was already known when the session began.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..nlu.baseline import NluResult


class SessionError(ValueError):
    pass


ACTION_KINDS = (
    "elicit-slot", "elicit-relation", "react", "bring-content",
    "suggest-connection", "archive-story", "greet", "close",
)


@dataclass
class ElicitationTask:
    task_id: str
    goal: dict  # {"kind": "slot", "memento_id", "slot"} | {"kind": "relation", "object", "candidates", "default_predicate", "category"}
    opened_at_turn: int
    completed_at_turn: int | None = None
    status: str = "open"  # open | completed | abandoned

    def __post_init__(self):
        if self.completed_at_turn is not None and self.completed_at_turn < self.opened_at_turn:
            raise SessionError("task completed before it was opened")

    def completion_turns(self) -> int | None:
        """Turn count from question to answer, inclusive of both."""
        if self.completed_at_turn is None:
            return None
        return self.completed_at_turn - self.opened_at_turn + 1

    def to_doc(self) -> dict:
        return {
            "task_id": self.task_id,
            "goal": self.goal,
            "opened_at_turn": self.opened_at_turn,
            "completed_at_turn": self.completed_at_turn,
            "status": self.status,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ElicitationTask":
        return cls(
            task_id=doc["task_id"],
            goal=doc["goal"],
            opened_at_turn=doc["opened_at_turn"],
            completed_at_turn=doc.get("completed_at_turn"),
            status=doc["status"],
        )


@dataclass
class ActionPlan:
    kind: str
    rendered_text: str
    question_id: str | None = None
    bindings: dict = field(default_factory=dict)
    task: ElicitationTask | None = None
    rule_id: str | None = None

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise SessionError(f"unknown action kind: {self.kind!r}")
        if self.kind.startswith("elicit-") and (self.question_id is None or self.task is None):
            raise SessionError("elicit actions must carry a question id and open a task")

    def to_doc(self) -> dict:
        return {
            "kind": self.kind,
            "rendered_text": self.rendered_text,
            "question_id": self.question_id,
            "bindings": dict(self.bindings),
            "task": self.task.to_doc() if self.task else None,
            "rule_id": self.rule_id,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ActionPlan":
        return cls(
            kind=doc["kind"],
            rendered_text=doc["rendered_text"],
            question_id=doc.get("question_id"),
            bindings=dict(doc.get("bindings", {})),
            task=ElicitationTask.from_doc(doc["task"]) if doc.get("task") else None,
            rule_id=doc.get("rule_id"),
        )


@dataclass
class Turn:
    index: int
    initiator: str  # user | bot
    text: str
    timestamp: str
    nlu: NluResult | None = None
    action: ActionPlan | None = None
    response_latency_ms: float | None = None

    def __post_init__(self):
        if self.initiator == "user" and (self.nlu is None or self.action is not None):
            raise SessionError("user turns carry nlu and no action")
        if self.initiator == "bot" and (self.action is None or self.nlu is not None):
            raise SessionError("bot turns carry an action and no nlu")

    def to_doc(self) -> dict:
        return {
            "index": self.index,
            "initiator": self.initiator,
            "text": self.text,
            "timestamp": self.timestamp,
            "nlu": self.nlu.to_doc() if self.nlu else None,
            "action": self.action.to_doc() if self.action else None,
            "response_latency_ms": self.response_latency_ms,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Turn":
        return cls(
            index=doc["index"],
            initiator=doc["initiator"],
            text=doc["text"],
            timestamp=doc["timestamp"],
            nlu=NluResult.from_doc(doc["nlu"]) if doc.get("nlu") else None,
            action=ActionPlan.from_doc(doc["action"]) if doc.get("action") else None,
            response_latency_ms=doc.get("response_latency_ms"),
        )


@dataclass
class Session:
    session_id: str
    person_id: str
    turns: list[Turn] = field(default_factory=list)
    active_memento: str | None = None
    open_task_id: str | None = None
    tasks: list[ElicitationTask] = field(default_factory=list)
    started_at: str = ""
    ended_at: str | None = None
    status: str = "active"  # active | closed
    rating: int | None = None
    # engine bookkeeping, persisted so replays and metrics are exact
    recent_questions: list[str] = field(default_factory=list)
    recent_entity_turns: list[list[list[str]]] = field(default_factory=list)  # per user turn: [[kind, value], ...]
    questions_on_memento: dict = field(default_factory=dict)
    rule_firings: dict = field(default_factory=dict)  # rule_id -> {"last": int, "count": int}
    selection_count: int = 0
    baseline_knowledge: list = field(default_factory=list)  # [category, predicate, object] at start
    baseline_slots: dict = field(default_factory=dict)  # memento_id -> [confirmed slots at first sight]
    events: list = field(default_factory=list)  # {"kind": "knowledge"|"tag"|"story", "turn": int, ...}

    def open_task(self) -> ElicitationTask | None:
        if self.open_task_id is None:
            return None
        for task in self.tasks:
            if task.task_id == self.open_task_id:
                return task
        return None

    def user_turns(self) -> list[Turn]:
        return [t for t in self.turns if t.initiator == "user"]

    def bot_turns(self) -> list[Turn]:
        return [t for t in self.turns if t.initiator == "bot"]

    def user_sentiments(self) -> list[float]:
        return [t.nlu.sentiment for t in self.user_turns() if t.nlu]

    def to_doc(self) -> dict:
        return {
            "session_id": self.session_id,
            "person_id": self.person_id,
            "turns": [t.to_doc() for t in self.turns],
            "active_memento": self.active_memento,
            "open_task_id": self.open_task_id,
            "tasks": [t.to_doc() for t in self.tasks],
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "status": self.status,
            "rating": self.rating,
            "recent_questions": list(self.recent_questions),
            "recent_entity_turns": [[list(e) for e in turn] for turn in self.recent_entity_turns],
            "questions_on_memento": dict(self.questions_on_memento),
            "rule_firings": {k: dict(v) for k, v in self.rule_firings.items()},
            "selection_count": self.selection_count,
            "baseline_knowledge": [list(t) for t in self.baseline_knowledge],
            "baseline_slots": {k: list(v) for k, v in self.baseline_slots.items()},
            "events": [dict(e) for e in self.events],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Session":
        return cls(
            session_id=doc["session_id"],
            person_id=doc["person_id"],
            turns=[Turn.from_doc(t) for t in doc["turns"]],
            active_memento=doc.get("active_memento"),
            open_task_id=doc.get("open_task_id"),
            tasks=[ElicitationTask.from_doc(t) for t in doc.get("tasks", [])],
            started_at=doc.get("started_at", ""),
            ended_at=doc.get("ended_at"),
            status=doc.get("status", "active"),
            rating=doc.get("rating"),
            recent_questions=list(doc.get("recent_questions", [])),
            recent_entity_turns=[[list(e) for e in turn] for turn in doc.get("recent_entity_turns", [])],
            questions_on_memento=dict(doc.get("questions_on_memento", {})),
            rule_firings={k: dict(v) for k, v in doc.get("rule_firings", {}).items()},
            selection_count=doc.get("selection_count", 0),
            baseline_knowledge=[tuple(t) for t in doc.get("baseline_knowledge", [])],
            baseline_slots={k: list(v) for k, v in doc.get("baseline_slots", {}).items()},
            events=[dict(e) for e in doc.get("events", [])],
        )


def transcript_lines(session: Session) -> list[str]:
    """Line-delimited transcript export: one turn per line, all turn fields."""
    import json

    return [
        json.dumps(turn.to_doc(), ensure_ascii=False, sort_keys=True)
        for turn in session.turns
    ]
