"""Errors raised by expression parsing, decoding, and validation.

Evaluation never raises for valid input; failures there fold into the
Undefined value plus a warning. These exceptions cover the authoring
surface: bad text, bad documents, unknown functions, illegal arity,
and trees deeper than the rejection limit.
"""


class ExpressionError(Exception):
    """Base class for every expression-layer error."""


class ExpressionSyntaxError(ExpressionError):
    """Malformed expression text."""

    def __init__(self, position: int, expected: str):
        self.position = position
        self.expected = expected
        super().__init__(f"syntax error at offset {position}: expected {expected}")


class MalformedDocumentError(ExpressionError):
    """Document does not match the canonical JSON encoding."""


class UnknownFunctionError(ExpressionError):
    def __init__(self, name: str, path: str = ""):
        self.name = name
        self.path = path
        super().__init__(f"unknown function '{name}' at {path or 'root'}")


class ArityMismatchError(ExpressionError):
    def __init__(self, name: str, got: int, expected: str, path: str = ""):
        self.name = name
        self.got = got
        self.expected = expected
        self.path = path
        super().__init__(
            f"'{name}' takes {expected} argument(s), got {got} at {path or 'root'}"
        )


class DepthExceededError(ExpressionError):
    def __init__(self, limit: int):
        self.limit = limit
        super().__init__(f"expression tree deeper than {limit} levels")
