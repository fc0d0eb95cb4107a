"""Policy-language syntax tree.

Spans are excluded from equality so that trees parsed from differently
formatted sources compare equal.
"""

from dataclasses import dataclass, field

from .errors import Span

NO_SPAN = Span(0, 0)


def _span():
    return field(default=NO_SPAN, compare=False, repr=False)


# expressions


@dataclass(frozen=True)
class Num:
    value: float
    span: Span = _span()


@dataclass(frozen=True)
class Str:
    value: str
    span: Span = _span()


@dataclass(frozen=True)
class Bool:
    value: bool
    span: Span = _span()


@dataclass(frozen=True)
class Name:
    id: str
    span: Span = _span()


@dataclass(frozen=True)
class Field:
    obj: object
    name: str
    span: Span = _span()


@dataclass(frozen=True)
class Index:
    obj: object
    index: object
    span: Span = _span()


@dataclass(frozen=True)
class Unary:
    op: str  # "-" | "not"
    operand: object
    span: Span = _span()


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object
    span: Span = _span()


@dataclass(frozen=True)
class ListLit:
    items: tuple
    span: Span = _span()


@dataclass(frozen=True)
class RecordLit:
    fields: tuple  # ((key, expr), ...)
    span: Span = _span()


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    span: Span = _span()


# statements


@dataclass(frozen=True)
class Block:
    stmts: tuple
    span: Span = _span()


@dataclass(frozen=True)
class Let:
    name: str
    value: object
    span: Span = _span()


@dataclass(frozen=True)
class Assign:
    target: object  # Name | Field | Index
    value: object
    span: Span = _span()


@dataclass(frozen=True)
class If:
    cond: object
    then: Block
    orelse: Block | None = None
    span: Span = _span()


@dataclass(frozen=True)
class For:
    var: str
    iterable: object
    body: Block
    span: Span = _span()


@dataclass(frozen=True)
class ExprStmt:
    expr: object
    span: Span = _span()


@dataclass(frozen=True)
class Program:
    init: Block
    schedule: Block
    params: tuple = ("failures", "pipelines")
    span: Span = _span()


BINARY_PREC = {
    "or": 1,
    "and": 2,
    "==": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6, "%": 6,
}
NOT_PREC = 3
NEG_PREC = 7
POSTFIX_PREC = 8
ATOM_PREC = 9


def precedence(node) -> int:
    if isinstance(node, Binary):
        return BINARY_PREC[node.op]
    if isinstance(node, Unary):
        return NOT_PREC if node.op == "not" else NEG_PREC
    if isinstance(node, (Field, Index, Call)):
        return POSTFIX_PREC
    return ATOM_PREC
