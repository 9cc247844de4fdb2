from __future__ import annotations


class ProfilerError(Exception):
    """Base exception for profile fitting failures."""


class ConfigError(ProfilerError):
    """Raised when a configuration document is invalid."""


class EmptyCorpusError(ProfilerError):
    """Raised when an operation needs at least one sequence."""


class SequenceValidationError(ProfilerError):
    """Raised when a sequence violates its invariants."""

    def __init__(self, subject_id: str, message: str):
        super().__init__(f"subject {subject_id}: {message}")
        self.subject_id = subject_id


class UnknownLabelError(ProfilerError):
    """Raised when input uses event labels outside the state space."""

    def __init__(self, labels: list[str]):
        self.labels = sorted(set(labels))
        super().__init__(f"unknown event labels: {', '.join(self.labels)}")


class InputFormatError(ProfilerError):
    """Raised when an input file has malformed lines."""

    def __init__(self, path: str, problems: list[tuple[int, str]]):
        self.path = path
        self.problems = problems
        lines = "; ".join(f"line {line}: {message}" for line, message in problems)
        super().__init__(f"{path}: {lines}")


class ReportSchemaError(ProfilerError):
    """Raised when a saved fit report has an unsupported schema version."""
