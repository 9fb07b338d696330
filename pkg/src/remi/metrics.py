"""Self-assessment metrics over live sessions and recorded transcripts.

Four families: engagement (length, interactions, cumulative average
sentiment, optional user rating), task completion (rate and turns to
complete), conversation quality (consistency, memory of past events, response
speed) and human-likeness (greetings, proactivity). Reports are pure
functions of the session document, so replayed transcripts score identically
to live runs.
"""

from __future__ import annotations

from dataclasses import dataclass

from .clock import from_iso
from .engine.session import Session

_social_markers = None


def _default_markers(text: str) -> dict[str, bool]:
    global _social_markers
    if _social_markers is None:
        from .nlu.baseline import NluBaseline

        _social_markers = NluBaseline().detect_social_markers
    return _social_markers(text)


@dataclass
class MetricReport:
    session_id: str
    turns_total: int
    user_turns: int
    duration_minutes: float
    cumulative_avg_sentiment: float
    engagement_rating: int | None
    tasks_initiated: int
    tasks_completed: int
    completion_rate: float
    tasks_none_initiated: bool
    mean_completion_turns: float
    consistency: float
    memory_violations: int
    mean_response_ms: float
    greeting_used: bool
    proactivity: float

    def __post_init__(self):
        if self.tasks_completed > self.tasks_initiated:
            raise ValueError("tasks completed cannot exceed tasks initiated")
        for rate in (self.completion_rate, self.consistency, self.proactivity):
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"rate out of range: {rate}")

    def to_doc(self) -> dict:
        return {
            "session_id": self.session_id,
            "turns_total": self.turns_total,
            "user_turns": self.user_turns,
            "duration_minutes": self.duration_minutes,
            "cumulative_avg_sentiment": self.cumulative_avg_sentiment,
            "engagement_rating": self.engagement_rating,
            "tasks_initiated": self.tasks_initiated,
            "tasks_completed": self.tasks_completed,
            "completion_rate": self.completion_rate,
            "tasks_none_initiated": self.tasks_none_initiated,
            "mean_completion_turns": self.mean_completion_turns,
            "consistency": self.consistency,
            "memory_violations": self.memory_violations,
            "mean_response_ms": self.mean_response_ms,
            "greeting_used": self.greeting_used,
            "proactivity": self.proactivity,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "MetricReport":
        return cls(**doc)


# ---------------------------------------------------------------------------
# metric families


def engagement(session: Session) -> dict:
    turns = len(session.turns)
    if turns >= 2:
        minutes = (from_iso(session.turns[-1].timestamp) - from_iso(session.turns[0].timestamp)) / 60.0
    else:
        minutes = 0.0
    sentiments = session.user_sentiments()
    cum_avg = sum(sentiments) / len(sentiments) if sentiments else 0.0
    return {
        "turns": turns,
        "minutes": minutes,
        "interactions": len(session.user_turns()),
        "cum_avg_sentiment": cum_avg,
        "rating": session.rating,
    }


def task_completion(session: Session) -> dict:
    initiated = len(session.tasks)
    completed = [t for t in session.tasks if t.status == "completed"]
    if initiated == 0:
        rate, none_initiated = 1.0, True
    else:
        rate, none_initiated = len(completed) / initiated, False
    durations = [t.completion_turns() for t in completed]
    mean_turns = sum(durations) / len(durations) if durations else 0.0
    return {
        "initiated": initiated,
        "completed": len(completed),
        "rate": rate,
        "none_initiated": none_initiated,
        "mean_turns": mean_turns,
    }


def _satisfied_at(session: Session, goal: dict, turn_index: int) -> bool:
    """Was the elicitation goal already confirmed/known just before this turn?"""
    if goal["kind"] == "slot":
        memento_id, slot = goal["memento_id"], goal["slot"]
        if slot in session.baseline_slots.get(memento_id, []):
            return True
        return any(
            e["kind"] == "tag"
            and e["turn"] < turn_index
            and e["memento_id"] == memento_id
            and e["slot"] == slot
            and e.get("confirmed", False)
            for e in session.events
        )
    known = {tuple(t) for t in session.baseline_knowledge}
    known.update(
        tuple(e["triple"])
        for e in session.events
        if e["kind"] == "knowledge" and e["turn"] < turn_index
    )
    obj = str(goal["object"]).strip().casefold()
    category = goal.get("category", "life-event")
    return any((category, pred, obj) in known for pred in goal.get("candidates", []))


def conversation_quality(session: Session) -> dict:
    """Memory violations are bot elicitations whose target was already
    known or confirmed at ask time, replayed from the session's event log."""
    elicitations = [
        t for t in session.bot_turns() if t.action and t.action.kind.startswith("elicit-")
    ]
    violations = sum(
        1 for t in elicitations if _satisfied_at(session, t.action.task.goal, t.index)
    )
    consistency = 1.0 if not elicitations else 1.0 - violations / len(elicitations)
    latencies = [
        t.response_latency_ms for t in session.bot_turns() if t.response_latency_ms is not None
    ]
    mean_ms = sum(latencies) / len(latencies) if latencies else 0.0
    return {
        "consistency": consistency,
        "memory_violations": violations,
        "mean_response_ms": mean_ms,
    }


def human_likeness(session: Session, markers=None) -> dict:
    markers = markers or _default_markers
    greeting_used = any(markers(t.text)["greeting"] for t in session.user_turns())
    bot_turns = session.bot_turns()
    pivots = 0
    last_elicit_memento: str | None = None
    for turn in bot_turns:
        kind = turn.action.kind
        if kind in ("bring-content", "suggest-connection"):
            pivots += 1
        elif kind.startswith("elicit-"):
            memento = turn.action.task.goal.get("memento_id") if turn.action.task else None
            if (
                memento is not None
                and last_elicit_memento is not None
                and memento != last_elicit_memento
            ):
                pivots += 1
            if memento is not None:
                last_elicit_memento = memento
    proactivity = pivots / len(bot_turns) if bot_turns else 0.0
    return {"greeting_used": greeting_used, "proactivity": proactivity}


def compute_report(session: Session, markers=None) -> MetricReport:
    eng = engagement(session)
    tasks = task_completion(session)
    quality = conversation_quality(session)
    human = human_likeness(session, markers)
    return MetricReport(
        session_id=session.session_id,
        turns_total=eng["turns"],
        user_turns=eng["interactions"],
        duration_minutes=eng["minutes"],
        cumulative_avg_sentiment=eng["cum_avg_sentiment"],
        engagement_rating=eng["rating"],
        tasks_initiated=tasks["initiated"],
        tasks_completed=tasks["completed"],
        completion_rate=tasks["rate"],
        tasks_none_initiated=tasks["none_initiated"],
        mean_completion_turns=tasks["mean_turns"],
        consistency=quality["consistency"],
        memory_violations=quality["memory_violations"],
        mean_response_ms=quality["mean_response_ms"],
        greeting_used=human["greeting_used"],
        proactivity=human["proactivity"],
    )
