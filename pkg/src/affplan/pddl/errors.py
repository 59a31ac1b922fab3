"""Error types for the planning subpackage."""

from __future__ import annotations

__all__ = [
    "PddlError",
    "PddlSyntaxError",
    "PddlSemanticError",
    "UnsupportedFeatureError",
    "UnknownActionError",
]


class PddlError(Exception):
    """Base class for planning-language errors."""


class PddlSyntaxError(PddlError):
    """Lexical or structural error, with source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


class PddlSemanticError(PddlError):
    """Well-formed text that violates the language rules (unknown
    predicate, arity mismatch, undeclared variable, bad type...)."""


class UnsupportedFeatureError(PddlError):
    """A requirement or construct outside the supported subset."""


class UnknownActionError(PddlError):
    """A plan step names no ground action of the task."""
