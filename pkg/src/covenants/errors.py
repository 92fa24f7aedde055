"""Exception types shared by the parser, model and ledger."""

from __future__ import annotations


class ScriptSyntaxError(SyntaxError):
    """Malformed source text. Carries a 1-based line and column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.msg = message
        self.lineno = line
        self.offset = column

    def __str__(self) -> str:
        return f"{self.msg} (line {self.lineno}, column {self.offset})"

    @property
    def line(self) -> int:
        return self.lineno

    @property
    def column(self) -> int:
        return self.offset


class ScriptTypeError(TypeError):
    """A script rejected by the structural type check."""


class UnresolvedNameError(ReferenceError):
    """A name (key, script or transaction) that is not bound anywhere."""


class ContextError(RuntimeError):
    """Evaluation context is corrupt, e.g. a referenced transaction is missing.

    This is a hard error, distinct from a script evaluating to bottom.
    """
