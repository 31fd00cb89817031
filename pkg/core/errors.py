"""
Error types for the CHR confluence checker
Semantic outcomes (failure, error, unknown verdicts) are values; these exceptions
signal bad input or misuse of an operation
"""

from typing import Optional


class ChrError(Exception):
    """Base class for all checker errors"""


class ChrSyntaxError(ChrError):
    """Syntax error in a program, query or analysis spec"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{location}")


class ArityClashError(ChrError):
    """A constraint is used with an arity that was not declared"""


class UnknownBuiltinError(ChrError):
    """A built-in predicate is not registered in the built-in table"""


class SpecError(ChrError):
    """Invalid analysis spec: unknown type, unbound metavariable, non-closed invariant"""


class ContractError(ChrError):
    """An operation was called outside its contract"""
