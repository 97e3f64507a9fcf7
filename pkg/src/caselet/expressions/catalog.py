"""The fixed function catalog and structural validation.

The catalog is the closed set of functions an expression may call. Each
entry pins the legal arity range, a human-readable signature, and whether
the function is context-free (computable from literals alone — the subset
the independent oracle in the test suite can replay).

validate() checks structure only: known names, legal arity, depth within
the rejection limit. Argument kinds are documented but not enforced;
kind mismatches degrade to Undefined at evaluation time instead.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import MAX_DEPTH, Call, Expr, Lit, depth_of, walk

UNBOUNDED = None


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    min_arity: int
    max_arity: int | None  # None = variadic
    args: str  # documentation only
    result: str
    context_free: bool

    def arity_ok(self, n: int) -> bool:
        if n < self.min_arity:
            return False
        return self.max_arity is None or n <= self.max_arity

    def arity_text(self) -> str:
        if self.max_arity is None:
            return f">={self.min_arity}"
        if self.min_arity == self.max_arity:
            return str(self.min_arity)
        return f"{self.min_arity}..{self.max_arity}"


def _spec(name, lo, hi, args, result, context_free) -> FunctionSpec:
    return FunctionSpec(name, lo, hi, args, result, context_free)


CATALOG: dict[str, FunctionSpec] = {
    s.name: s
    for s in [
        _spec("and", 1, UNBOUNDED, "bool...", "bool", True),
        _spec("or", 1, UNBOUNDED, "bool...", "bool", True),
        _spec("not", 1, 1, "bool", "bool", True),
        _spec("eq", 2, 2, "any, any", "bool", True),
        _spec("ne", 2, 2, "any, any", "bool", True),
        _spec("lt", 2, 2, "ordered, ordered", "bool", True),
        _spec("lte", 2, 2, "ordered, ordered", "bool", True),
        _spec("gt", 2, 2, "ordered, ordered", "bool", True),
        _spec("gte", 2, 2, "ordered, ordered", "bool", True),
        _spec("sum", 1, UNBOUNDED, "num...", "num", True),
        _spec("sub", 2, 2, "num, num", "num", True),
        _spec("mul", 1, UNBOUNDED, "num...", "num", True),
        _spec("now", 0, 0, "", "ts", False),
        _spec("timestampWithOffset", 1, 2, "deltaSeconds[, reference]", "ts", False),
        _spec("getResponseValue", 2, 2, "itemKey, slotKey", "any", False),
        _spec("hasResponse", 2, 2, "itemKey, slotKey", "bool", False),
        _spec("countSelected", 1, 1, "itemKey", "num", False),
        _spec("getPrevResponseValue", 3, 3, "surveyKey, itemKey, slotKey", "any", False),
        _spec("getLastSubmissionDate", 1, 1, "surveyKey", "ts|undef", False),
        _spec("getStudyFlag", 1, 1, "key", "scalar|undef", False),
        _spec("hasStudyStatus", 1, 1, "status", "bool", False),
        _spec("getEventPayload", 1, 1, "key", "any", False),
        _spec("getContext", 1, 1, "key", "any", False),
    ]
}


@dataclass(frozen=True)
class Issue:
    kind: str  # UnknownFunction | ArityMismatch | DepthExceeded
    path: str  # '' means root
    message: str

    def __str__(self) -> str:
        return f"{self.kind} at {self.path or 'root'}: {self.message}"


def validate(expr: Expr, catalog: dict[str, FunctionSpec] = CATALOG) -> list[Issue]:
    """Return all structural issues; an empty list means the tree is valid."""
    issues: list[Issue] = []
    if depth_of(expr) > MAX_DEPTH:
        issues.append(
            Issue("DepthExceeded", "", f"tree deeper than {MAX_DEPTH} levels")
        )
    for path, node in walk(expr):
        if isinstance(node, Lit):
            continue
        spec = catalog.get(node.name)
        if spec is None:
            issues.append(Issue("UnknownFunction", path, f"'{node.name}' is not in the catalog"))
            continue
        if not spec.arity_ok(len(node.args)):
            issues.append(
                Issue(
                    "ArityMismatch",
                    path,
                    f"'{node.name}' takes {spec.arity_text()} argument(s), got {len(node.args)}",
                )
            )
    return issues


def is_valid(expr: Expr) -> bool:
    return not validate(expr)


def is_context_free(expr: Expr) -> bool:
    """True when every call in the tree is computable without an EvalContext."""
    for _, node in walk(expr):
        if isinstance(node, Call):
            spec = CATALOG.get(node.name)
            if spec is None or not spec.context_free:
                return False
    return True
