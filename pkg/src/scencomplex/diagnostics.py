"""Positioned diagnostics shared by the catalog loader, the scenario parser and the validators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional


@dataclass(frozen=True, order=True)
class Diagnostic:
    """A single problem found in an input file.

    ``line`` and ``column`` are 1-based. They are ``None`` only for problems that
    have no meaningful position (for example a missing entry in an in-memory catalog).
    """

    line: Optional[int]
    column: Optional[int]
    message: str
    source: str = ""

    def format(self, source: Optional[str] = None) -> str:
        name = source or self.source or "<input>"
        if self.line is None:
            return f"{name}: {self.message}"
        return f"{name}:{self.line}:{self.column or 1}: {self.message}"

    def __str__(self) -> str:
        return self.format()


class DiagnosticError(Exception):
    """Raised when an input cannot be turned into a valid value.

    Carries every diagnostic collected so callers can report them all at once.
    """

    def __init__(self, diagnostics: Iterable[Diagnostic]):
        self.diagnostics: List[Diagnostic] = list(diagnostics)
        first = self.diagnostics[0].format() if self.diagnostics else "invalid input"
        more = len(self.diagnostics) - 1
        super().__init__(first if more <= 0 else f"{first} (+{more} more)")
