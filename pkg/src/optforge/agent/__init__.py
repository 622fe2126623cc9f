"""Budgeted, command-driven optimization agent."""

from .backends import BackendError, BackendStop, HttpBackend, ScriptedBackend
from .commands import Command, ParsedTurn, parse_turn
from .history import truncate_history
from .session import (
    AgentSession,
    Feedback,
    SessionConfig,
    apply_edit,
    evaluate_dev,
    format_budget_header,
    parse_budget_header,
    run_command,
    run_session,
)

__all__ = [
    "AgentSession", "BackendError", "BackendStop", "Command", "Feedback", "HttpBackend", "ParsedTurn",
    "ScriptedBackend", "SessionConfig", "apply_edit", "evaluate_dev", "format_budget_header",
    "parse_budget_header", "parse_turn", "run_command", "run_session", "truncate_history",
]
