"""Error types, with the exit code and JSON report the command line uses."""

from __future__ import annotations

import json
from typing import Literal

ErrorCode = Literal[
    "DOMAIN_ERROR",  # Input outside the operator's domain (all masked, non-finite, ...)
    "NON_UNIQUE_ARGMAX",  # Several maximizing paths where one is required
    "CONTRACT_ERROR",  # Shape, length or index mismatch between arguments
    "INVALID_DAG",  # Graph violates the topological-order invariants
    "INVALID_STRUCTURE",  # Not a valid path, sequence or alignment
    "INPUT_ERROR",  # Missing or malformed input file
    "CAP_EXCEEDED",  # Path or node count above the configured cap
    "UNKNOWN_ERROR",  # Unexpected error
]


class SmoothedDPError(Exception):
    """Base class for every error raised by the package."""

    error_code: ErrorCode = "UNKNOWN_ERROR"
    exit_code: int = 1

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_json(self) -> str:
        """One-line report for stderr: ``{"error", "error_code"}`` plus ``details`` if any.

        Detail values JSON cannot hold (paths, numpy scalars) are written
        with ``str``.
        """
        payload: dict[str, object] = {"error": self.message, "error_code": self.error_code}
        if self.details:
            payload["details"] = self.details
        return json.dumps(payload, ensure_ascii=False, default=str)


class DomainError(SmoothedDPError, ValueError):
    error_code: ErrorCode = "DOMAIN_ERROR"
    exit_code = 2


class NonUniqueArgmaxError(DomainError):
    error_code: ErrorCode = "NON_UNIQUE_ARGMAX"


class ContractError(SmoothedDPError, ValueError):
    error_code: ErrorCode = "CONTRACT_ERROR"
    exit_code = 2


class InvalidDagError(ContractError):
    error_code: ErrorCode = "INVALID_DAG"


class InvalidStructureError(ContractError):
    error_code: ErrorCode = "INVALID_STRUCTURE"


class InputFileError(SmoothedDPError):
    """A file could not be read or parsed.

    ``line`` is 1-based and refers to the physical line in the file.
    """

    error_code: ErrorCode = "INPUT_ERROR"
    exit_code = 2

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        location = path or ""
        if line is not None:
            location = f"{location}:{line}"
        full = f"{location}: {message}" if location else message
        details = {k: v for k, v in (("path", path), ("line", line)) if v is not None}
        super().__init__(full, details)
        self.path = path
        self.line = line


class CapExceededError(SmoothedDPError):
    error_code: ErrorCode = "CAP_EXCEEDED"
    exit_code = 3

    def __init__(self, message: str, count: int, cap: int):
        super().__init__(message, {"count": count, "cap": cap})
        self.count = count
        self.cap = cap
