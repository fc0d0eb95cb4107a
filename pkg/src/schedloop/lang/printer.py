"""Canonical pretty-printer; ``parse(pretty(p)) == p`` for every program."""

import re

from . import ast as A
from .parser import KEYWORDS

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
INDENT = "    "


def format_number(x: float) -> str:
    if x == int(x) and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def format_string(s: str) -> str:
    body = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{body}"'


def _wrap(node, min_prec: int) -> str:
    text = expr(node)
    return f"({text})" if A.precedence(node) < min_prec else text


def expr(node) -> str:
    if isinstance(node, A.Num):
        return format_number(node.value)
    if isinstance(node, A.Str):
        return format_string(node.value)
    if isinstance(node, A.Bool):
        return "true" if node.value else "false"
    if isinstance(node, A.Name):
        return node.id
    if isinstance(node, A.Field):
        return f"{_wrap(node.obj, A.POSTFIX_PREC)}.{node.name}"
    if isinstance(node, A.Index):
        return f"{_wrap(node.obj, A.POSTFIX_PREC)}[{expr(node.index)}]"
    if isinstance(node, A.Call):
        return f"{node.func}({', '.join(expr(a) for a in node.args)})"
    if isinstance(node, A.Unary):
        if node.op == "not":
            return f"not {_wrap(node.operand, A.NOT_PREC)}"
        inner = _wrap(node.operand, A.NEG_PREC)
        # "--x" would still lex, but keep nested negation readable
        return f"-({inner})" if isinstance(node.operand, A.Unary) else f"-{inner}"
    if isinstance(node, A.Binary):
        prec = A.BINARY_PREC[node.op]
        return f"{_wrap(node.left, prec)} {node.op} {_wrap(node.right, prec + 1)}"
    if isinstance(node, A.ListLit):
        return f"[{', '.join(expr(i) for i in node.items)}]"
    if isinstance(node, A.RecordLit):
        parts = []
        for k, v in node.fields:
            key = k if _IDENT.match(k) else format_string(k)
            parts.append(f"{key}: {expr(v)}")
        return "{" + ", ".join(parts) + "}"
    raise TypeError(f"not an expression node: {node!r}")


def _block(block: A.Block, depth: int) -> list[str]:
    lines = []
    for s in block.stmts:
        lines.extend(_stmt(s, depth))
    return lines


def _stmt(s, depth: int) -> list[str]:
    pad = INDENT * depth
    if isinstance(s, A.Let):
        return [f"{pad}let {s.name} = {expr(s.value)};"]
    if isinstance(s, A.Assign):
        return [f"{pad}{expr(s.target)} = {expr(s.value)};"]
    if isinstance(s, A.ExprStmt):
        return [f"{pad}{expr(s.expr)};"]
    if isinstance(s, A.For):
        return [f"{pad}for {s.var} in {expr(s.iterable)} {{", *_block(s.body, depth + 1), f"{pad}}}"]
    if isinstance(s, A.If):
        lines = [f"{pad}if {expr(s.cond)} {{", *_block(s.then, depth + 1)]
        if s.orelse is None:
            lines.append(f"{pad}}}")
        else:
            lines.append(f"{pad}}} else {{")
            lines.extend(_block(s.orelse, depth + 1))
            lines.append(f"{pad}}}")
        return lines
    raise TypeError(f"not a statement node: {s!r}")


def pretty(program: A.Program) -> str:
    a, b = program.params
    lines = ["init {", *_block(program.init, 1), "}", "", f"schedule({a}, {b}) {{", *_block(program.schedule, 1), "}"]
    return "\n".join(lines) + "\n"
