"""Exception hierarchy shared by every module."""

from __future__ import annotations


class GenAgentError(Exception):
    """Base class for all library errors."""


class BackendUnavailable(GenAgentError):
    pass


class EmptyCompletion(GenAgentError):
    pass


class MalformedCompletion(GenAgentError):
    pass


class InvalidCitation(GenAgentError):
    pass


class UnknownId(GenAgentError):
    pass


class CorruptRecord(GenAgentError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class ClockSkew(GenAgentError):
    pass


class InvalidEvidenceIndex(MalformedCompletion):
    pass


class MissingCitationClause(MalformedCompletion):
    pass


class NonTilingPlan(GenAgentError):
    pass


class OutsidePlanWindow(GenAgentError):
    pass


class UnknownNode(GenAgentError):
    pass


class NotAnObject(GenAgentError):
    pass


class UnknownAreaAnswer(GenAgentError):
    pass


class Unreachable(GenAgentError):
    pass


class DialogueError(GenAgentError):
    """Raised when a dialogue operation violates its state contract."""


class ConfigInvalid(GenAgentError):
    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class UnknownAgent(GenAgentError):
    pass
