"""Exception types raised across the package."""

from __future__ import annotations


class CoherenceError(Exception):
    """Base class for every error raised by capcoherence."""


class InvalidTransition(CoherenceError):
    def __init__(self, state, event):
        self.state = state
        self.event = event
        super().__init__(f"no transition from {state} on {event}")


class DuplicateExclusive(CoherenceError):
    pass


class ScopeEscalation(CoherenceError):
    pass


class InvalidSourceState(CoherenceError):
    pass


class AlreadyRevoked(CoherenceError):
    pass


class UnknownCapability(CoherenceError):
    pass


class UnknownAgent(CoherenceError):
    pass


class MissingParam(CoherenceError):
    pass


class UnknownContext(CoherenceError):
    pass


class ConfigInvalid(CoherenceError):
    pass


class ParseError(ConfigInvalid):
    """Config file could not be parsed; carries the offending line and key."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class UnknownKey(ParseError):
    pass
