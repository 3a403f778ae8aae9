from __future__ import annotations


class CompetitionError(Exception):
    """Base class for all engine errors."""


class RegistryLoadError(CompetitionError):
    """A registry document or a file it references could not be read."""

    def __init__(self, message: str, path: str | None = None):
        super().__init__(message)
        self.path = path


class RegistryValidationError(CompetitionError):
    """The registry parsed but violates a structural invariant."""


class ProtocolViolation(CompetitionError):
    """Solver output does not follow the line protocol."""


class CheckerError(CompetitionError):
    """The checker itself failed; the run is quarantined, not judged."""


class LedgerError(CompetitionError):
    pass


class ConfigError(CompetitionError):
    pass


class StageError(CompetitionError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
