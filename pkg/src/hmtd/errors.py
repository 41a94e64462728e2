"""Error types shared across the package.

Every error carries a stable ``code`` string so the service layer can map it
onto the wire format ``{code, message, detail}`` without string matching.
"""

from __future__ import annotations


class HmtdError(Exception):
    """Base class for all domain errors."""

    code = "Error"

    def __init__(self, message: str = "", detail: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.detail = detail


class WrongKind(HmtdError):
    code = "WrongKind"


class CorruptTag(HmtdError):
    code = "CorruptTag"


class UnknownBadge(HmtdError):
    code = "UnknownBadge"


class Unqualified(HmtdError):
    code = "Unqualified"


class MachineMismatch(HmtdError):
    code = "MachineMismatch"


class WrongPhase(HmtdError):
    code = "WrongPhase"


class UnknownPart(HmtdError):
    code = "UnknownPart"


class IncompleteWorkflow(HmtdError):
    code = "IncompleteWorkflow"


class InvalidEvent(HmtdError):
    code = "InvalidEvent"


class StorageFailure(HmtdError):
    code = "StorageFailure"


class UnknownSession(HmtdError):
    code = "UnknownSession"


class UnknownMachine(HmtdError):
    code = "UnknownMachine"


class SessionClosed(HmtdError):
    code = "SessionClosed"


class MalformedIndication(HmtdError):
    code = "MalformedIndication"


class ExpertUnavailable(HmtdError):
    code = "ExpertUnavailable"


class UncoverableNeed(HmtdError):
    code = "UncoverableNeed"


class InvalidModel(HmtdError):
    code = "InvalidModel"


class ParseError(HmtdError):
    code = "ParseError"


class BindFailure(HmtdError):
    code = "BindFailure"


class DataDirUnwritable(HmtdError):
    code = "DataDirUnwritable"


class ConfigError(HmtdError):
    code = "ConfigError"
