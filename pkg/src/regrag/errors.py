"""Exception types shared across the package.

The CLI maps these onto process exit codes: input problems exit 2, transport
failures 3, configuration mismatches 4, and data format violations 5.
"""

from __future__ import annotations


class RegragError(Exception):
    """Base class for all package errors."""


class DataFormatError(RegragError):
    """A file violates its declared schema or cannot be parsed.

    Carries enough context (path, record index or line number, offending
    field) to locate the problem without re-running.
    """

    def __init__(
        self,
        message: str,
        *,
        path: str | None = None,
        line: int | None = None,
        record: int | None = None,
        field: str | None = None,
    ) -> None:
        self.path = path
        self.line = line
        self.record = record
        self.field = field
        parts = [message]
        if path is not None:
            parts.append(f"path={path}")
        if line is not None:
            parts.append(f"line={line}")
        if record is not None:
            parts.append(f"record={record}")
        if field is not None:
            parts.append(f"field={field}")
        super().__init__(" | ".join(parts))


class PassageConflictError(DataFormatError):
    """The same (document_id, passage_id) key appeared with differing text."""


class ContractError(RegragError, ValueError):
    """A call violated an interface contract (dimensions, finiteness, bounds)."""


class ConfigMismatchError(RegragError):
    """Artifacts built under incompatible configurations were combined."""


class TransportError(RegragError):
    """A remote provider could not be reached after the configured retries."""

    def __init__(self, message: str, *, attempts: int = 1, retry_after: float | None = None) -> None:
        self.attempts = attempts
        self.retry_after = retry_after
        super().__init__(f"{message} (attempts={attempts})")


class GenerationError(RegragError):
    """The language model returned an unusable (e.g. empty) completion."""


class NoContextError(RegragError):
    """No passage cleared the selection policy; the caller decides the fallback."""
