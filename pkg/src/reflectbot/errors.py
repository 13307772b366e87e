"""Exception types shared across the package."""

from __future__ import annotations


class ReflectbotError(Exception):
    """Base class for all package errors."""


class ParseError(ReflectbotError):
    """Scenario document is not syntactically valid."""

    def __init__(self, reason: str, line: int | None = None):
        self.reason = reason
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{reason}{where}")


class SchemaError(ReflectbotError):
    """Scenario document parses but violates the file schema."""

    def __init__(self, message: str, node_id: str | None = None):
        self.node_id = node_id
        where = f" [node {node_id}]" if node_id else ""
        super().__init__(f"{message}{where}")


class UnknownOption(ReflectbotError):
    """An option id was submitted that the decision node does not define."""


class KindMismatch(ReflectbotError):
    """A transition outcome does not fit the current node's kind."""


class InvalidScenario(ReflectbotError):
    """Scenario failed validation and cannot drive a session."""


class InputKindMismatch(ReflectbotError):
    """Learner input type does not match what the current node expects."""


class SessionNotActive(ReflectbotError):
    """Operation requires an active session."""


class MissingGate(ReflectbotError):
    """Node has no gate metadata but a gated operation was requested."""


class ExtractionError(ReflectbotError):
    """Model output did not contain a usable follow-up question."""


class BackendError(ReflectbotError):
    """Completion backend failed.

    kind is one of "timeout", "protocol", "remote".
    """

    def __init__(self, kind: str, message: str = ""):
        self.kind = kind
        super().__init__(f"{kind}: {message}" if message else kind)


class StorageError(ReflectbotError):
    """Transcript store rejected an append or read."""


class DanglingLabel(ReflectbotError):
    """Gold label does not resolve to a gated open learner turn."""
