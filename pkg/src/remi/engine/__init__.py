from .engine import (
    DialogEngine,
    SessionClosedError,
    SessionConflictError,
    UnknownMementoError,
    UnknownPersonError,
    UnknownSessionError,
)
from .rules import (
    DialogContext,
    Rule,
    RuleDatabase,
    RuleError,
    Selection,
    disengagement_pivot,
    select_action,
)
from .session import ActionPlan, ElicitationTask, Session, SessionError, Turn, transcript_lines
from .templates import QuestionTemplate, TemplateDatabase, TemplateError, render_question

__all__ = [
    "ActionPlan",
    "DialogContext",
    "DialogEngine",
    "ElicitationTask",
    "QuestionTemplate",
    "Rule",
    "RuleDatabase",
    "RuleError",
    "Selection",
    "Session",
    "SessionClosedError",
    "SessionConflictError",
    "SessionError",
    "TemplateDatabase",
    "TemplateError",
    "Turn",
    "UnknownMementoError",
    "UnknownPersonError",
    "UnknownSessionError",
    "disengagement_pivot",
    "render_question",
    "select_action",
    "transcript_lines",
]
