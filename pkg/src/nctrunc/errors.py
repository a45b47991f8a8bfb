"""Exception hierarchy shared by every module.

Each class carries the process exit code the CLI maps it to.
"""


class NCTruncError(Exception):
    exit_code = 1


class InvalidArgument(NCTruncError, ValueError):
    exit_code = 2


class ResourceLimit(NCTruncError, RuntimeError):
    exit_code = 3


class UnsupportedOperator(NCTruncError, TypeError):
    exit_code = 2


class ParseError(InvalidArgument):
    """Syntax or semantic error in an operator expression."""

    def __init__(self, message, line=1, column=1):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class AssertionFailure(NCTruncError):
    exit_code = 4
