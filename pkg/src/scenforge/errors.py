"""Exception hierarchy shared across the pipeline.

Every error raised by this package derives from ScenForgeError so callers
(and the CLI exit-code mapping) can distinguish our failures from bugs.
"""

from __future__ import annotations


class ScenForgeError(Exception):
    """Base class for all package errors."""


class ConfigError(ScenForgeError):
    """Bad configuration file, missing path, or invalid CLI usage."""


class DataError(ScenForgeError):
    """Malformed input data: tracks, lane maps, corpus files, episode logs."""


class DslError(DataError):
    """Base for scenario-DSL errors. Carries source position when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class DslSyntaxError(DslError):
    """Tokenizer or parser failure; message names the expected tokens."""


class DslStructureError(DslError):
    """Well-formed text with an invalid shape (missing section, bad field)."""


class DslReferenceError(DslError):
    """Duplicate vehicle id, unknown anchor, or undeclared schedule target."""


class CompileError(ScenForgeError):
    """A parsed document could not be lowered to an executable scenario."""


class BackendError(ScenForgeError):
    """Base for text-generation backend failures."""


class TransportError(BackendError):
    """Network-level failure talking to a live backend (HTTP status, timeout)."""


class ProtocolError(BackendError):
    """Backend replied, but not in the expected chat-completion shape."""


class ReplayError(BackendError):
    """Replay fixtures missing or exhausted."""


class GenerationError(ScenForgeError):
    """The generation pipeline produced no usable candidate."""


class RepairError(GenerationError):
    """All repair attempts failed; carries one diagnostic per attempt."""

    def __init__(self, message: str, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        super().__init__(message)


class TrainingError(ScenForgeError):
    """Non-finite loss, bad shapes, or other failures inside the RL loop."""
