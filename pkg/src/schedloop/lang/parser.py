"""Lexer and recursive-descent parser for `.pol` policy sources.

Grammar (normative)::

    program        := init_block schedule_block
    init_block     := "init" block
    schedule_block := "schedule" "(" IDENT "," IDENT ")" block
    block          := "{" stmt* "}"
    stmt           := "let" IDENT "=" expr ";"
                    | lvalue "=" expr ";"
                    | "if" expr block ("else" (block | if_stmt))?
                    | "for" IDENT "in" expr block
                    | expr ";"
    lvalue         := IDENT ("." IDENT | "[" expr "]")*
    expr           := or_expr
    or_expr        := and_expr ("or" and_expr)*
    and_expr       := not_expr ("and" not_expr)*
    not_expr       := "not" not_expr | comparison
    comparison     := additive (("==" | "!=" | "<" | "<=" | ">" | ">=") additive)*
    additive       := term (("+" | "-") term)*
    term           := unary (("*" | "/" | "%") unary)*
    unary          := "-" unary | postfix
    postfix        := primary ("." IDENT | "[" expr "]")*
    primary        := NUMBER | STRING | "true" | "false" | IDENT | call
                    | "(" expr ")" | "[" (expr ("," expr)* ","?)? "]"
                    | "{" (key ":" expr ("," key ":" expr)* ","?)? "}"
    call           := IDENT "(" (expr ("," expr)*)? ")"
    key            := IDENT | STRING

``#`` starts a comment that runs to the end of the line.
"""

import re
from dataclasses import dataclass

from . import ast as A
from .errors import InterpError, Span

KEYWORDS = {"init", "schedule", "let", "if", "else", "for", "in", "and", "or", "not", "true", "false"}
PUNCT = ["==", "!=", "<=", ">=", "{", "}", "(", ")", "[", "]", ",", ";", ":", ".", "=", "<", ">", "+", "-", "*",
         "/", "%"]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<punct>==|!=|<=|>=|[{}()\[\],;:.=<>+\-*/%])
    """,
    re.VERBOSE,
)
_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str  # num | ident | kw | str | punct | eof
    text: str
    line: int
    column: int

    @property
    def span(self) -> Span:
        return Span(self.line, self.column)

    def describe(self) -> str:
        return "end of input" if self.kind == "eof" else repr(self.text)


def _unescape(raw: str, line: int, col: int) -> str:
    out = []
    i = 0
    while i < len(raw):
        ch = raw[i]
        if ch == "\\":
            nxt = raw[i + 1]
            if nxt not in _ESCAPES:
                raise InterpError("parse", f"unknown escape sequence \\{nxt}", line, col + i + 1,
                                  hint='supported escapes are \\n \\t \\" \\\\')
            out.append(_ESCAPES[nxt])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def tokenize(source: str) -> list[Token]:
    tokens = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            ch = source[pos]
            hint = "strings use double quotes" if ch == "'" else "remove the character or quote it in a string"
            if ch == '"':
                raise InterpError("parse", "unterminated string literal", line, col,
                                  hint="close the string with \" on the same line")
            raise InterpError("parse", f"unexpected character {ch!r}", line, col, hint=hint)
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("ws", "comment"):
            pass
        elif kind == "ident":
            tokens.append(Token("kw" if text in KEYWORDS else "ident", text, line, col))
        elif kind == "str":
            tokens.append(Token("str", _unescape(text[1:-1], line, col), line, col))
        else:
            tokens.append(Token(kind, text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.i = 0
        self.open_braces: list[Token] = []

    # token helpers

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("punct", "kw") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, message: str, hint: str, tok: Token | None = None):
        tok = tok or self.tok
        if tok.kind == "eof" and self.open_braces:
            ob = self.open_braces[-1]
            hint = f"the '{{' at line {ob.line}, column {ob.column} is never closed; {hint}"
        raise InterpError("parse", message, tok.line, tok.column, hint=hint)

    def expect(self, text: str, hint: str = "") -> Token:
        if not self.at(text):
            self.error(f"expected '{text}' but found {self.tok.describe()}", hint or f"insert '{text}'")
        return self.advance()

    def expect_ident(self, what: str) -> Token:
        if self.tok.kind != "ident":
            extra = " (it is a reserved word)" if self.tok.kind == "kw" else ""
            self.error(f"expected {what} but found {self.tok.describe()}{extra}",
                       f"{what} must be an identifier like my_name")
        return self.advance()

    # program structure

    def parse_program(self) -> A.Program:
        start = self.tok
        if self.at("schedule"):
            self.error("the init block must come before the schedule block",
                       "start the program with: init { ... }")
        if not self.at("init"):
            self.error(f"expected 'init' but found {self.tok.describe()}",
                       "a policy is: init { ... } schedule(failures, pipelines) { ... }")
        self.advance()
        init = self.parse_block()
        if self.tok.kind == "eof":
            self.error("missing schedule block", "add: schedule(failures, pipelines) { ... } after the init block")
        if self.at("init"):
            self.error("duplicate init block", "a policy has exactly one init block")
        if not self.at("schedule"):
            self.error(f"expected 'schedule' but found {self.tok.describe()}",
                       "after init { ... } write schedule(failures, pipelines) { ... }")
        self.advance()
        self.expect("(", "write schedule(failures, pipelines)")
        p1 = self.expect_ident("parameter name").text
        self.expect(",", "write schedule(failures, pipelines)")
        p2 = self.expect_ident("parameter name").text
        self.expect(")", "write schedule(failures, pipelines)")
        body = self.parse_block()
        if self.tok.kind != "eof":
            if self.at("}"):
                self.error("unmatched '}'", "remove the extra closing brace")
            self.error(f"unexpected {self.tok.describe()} after the schedule block",
                       "a policy contains exactly one init block followed by one schedule block")
        return A.Program(init, body, (p1, p2), start.span)

    def parse_block(self) -> A.Block:
        open_tok = self.expect("{", "blocks are wrapped in braces")
        self.open_braces.append(open_tok)
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("unexpected end of input inside a block", "add the missing '}'")
            stmts.append(self.parse_stmt())
        self.advance()
        self.open_braces.pop()
        return A.Block(tuple(stmts), open_tok.span)

    def parse_stmt(self):
        t = self.tok
        if self.at("let"):
            self.advance()
            name = self.expect_ident("variable name").text
            self.expect("=", "write: let name = value;")
            value = self.parse_expr()
            self.expect(";", "end the statement with ';'")
            return A.Let(name, value, t.span)
        if self.at("if"):
            return self.parse_if()
        if self.at("for"):
            self.advance()
            var = self.expect_ident("loop variable").text
            self.expect("in", "write: for x in some_list { ... }")
            iterable = self.parse_expr()
            body = self.parse_block()
            return A.For(var, iterable, body, t.span)
        if self.at("else"):
            self.error("'else' without a matching 'if'", "attach else directly after an if block's '}'")
        expr = self.parse_expr()
        if self.at("="):
            eq = self.advance()
            if not _is_lvalue(expr):
                self.error("invalid assignment target", "only variables, fields (a.b) and elements (a[i]) can be assigned",
                           eq)
            value = self.parse_expr()
            self.expect(";", "end the statement with ';'")
            return A.Assign(expr, value, t.span)
        self.expect(";", "end the statement with ';'")
        return A.ExprStmt(expr, t.span)

    def parse_if(self) -> A.If:
        t = self.expect("if")
        cond = self.parse_expr()
        then = self.parse_block()
        orelse = None
        if self.at("else"):
            self.advance()
            if self.at("if"):
                nested = self.parse_if()
                orelse = A.Block((nested,), nested.span)
            else:
                orelse = self.parse_block()
        return A.If(cond, then, orelse, t.span)

    # expressions

    def parse_expr(self):
        return self.parse_or()

    def _binary_level(self, ops, sub):
        left = sub()
        while self.tok.kind in ("punct", "kw") and self.tok.text in ops:
            op = self.advance()
            right = sub()
            left = A.Binary(op.text, left, right, op.span)
        return left

    def parse_or(self):
        return self._binary_level(("or",), self.parse_and)

    def parse_and(self):
        return self._binary_level(("and",), self.parse_not)

    def parse_not(self):
        if self.at("not"):
            t = self.advance()
            return A.Unary("not", self.parse_not(), t.span)
        return self.parse_comparison()

    def parse_comparison(self):
        return self._binary_level(("==", "!=", "<", "<=", ">", ">="), self.parse_additive)

    def parse_additive(self):
        return self._binary_level(("+", "-"), self.parse_term)

    def parse_term(self):
        return self._binary_level(("*", "/", "%"), self.parse_unary)

    def parse_unary(self):
        if self.at("-"):
            t = self.advance()
            return A.Unary("-", self.parse_unary(), t.span)
        return self.parse_postfix()

    def parse_postfix(self):
        node = self.parse_primary()
        while True:
            if self.at("."):
                t = self.advance()
                name = self.expect_ident("field name").text
                node = A.Field(node, name, t.span)
            elif self.at("["):
                t = self.advance()
                index = self.parse_expr()
                self.expect("]", "close the index with ']'")
                node = A.Index(node, index, t.span)
            elif self.at("("):
                self.error("only builtin functions can be called",
                           "call builtins by name, e.g. len(xs); user-defined functions are not supported")
            else:
                return node

    def parse_primary(self):
        t = self.tok
        if t.kind == "num":
            self.advance()
            return A.Num(float(t.text), t.span)
        if t.kind == "str":
            self.advance()
            return A.Str(t.text, t.span)
        if self.at("true") or self.at("false"):
            self.advance()
            return A.Bool(t.text == "true", t.span)
        if t.kind == "ident":
            self.advance()
            if self.at("("):
                self.advance()
                args = []
                if not self.at(")"):
                    args.append(self.parse_expr())
                    while self.at(","):
                        self.advance()
                        args.append(self.parse_expr())
                self.expect(")", f"close the call to {t.text} with ')'")
                return A.Call(t.text, tuple(args), t.span)
            return A.Name(t.text, t.span)
        if self.at("("):
            self.advance()
            inner = self.parse_expr()
            self.expect(")", "close the parenthesis")
            return inner
        if self.at("["):
            self.advance()
            items = []
            while not self.at("]"):
                items.append(self.parse_expr())
                if not self.at(","):
                    break
                self.advance()
            self.expect("]", "separate list items with ',' and close with ']'")
            return A.ListLit(tuple(items), t.span)
        if self.at("{"):
            self.advance()
            fields = []
            seen = set()
            while not self.at("}"):
                k = self.tok
                if k.kind not in ("ident", "str", "kw"):
                    self.error(f"expected a record key but found {k.describe()}", "write records as {key: value}")
                self.advance()
                if k.text in seen:
                    self.error(f"duplicate record key {k.text!r}", "each key may appear once", k)
                seen.add(k.text)
                self.expect(":", "write records as {key: value}")
                fields.append((k.text, self.parse_expr()))
                if not self.at(","):
                    break
                self.advance()
            self.expect("}", "separate record fields with ',' and close with '}'")
            return A.RecordLit(tuple(fields), t.span)
        if t.kind == "kw":
            self.error(f"unexpected keyword {t.text!r} in expression", "keywords cannot be used as values")
        self.error(f"expected an expression but found {t.describe()}",
                   "expressions are literals, variables, calls, lists [..] or records {..}")


def _is_lvalue(node) -> bool:
    while isinstance(node, (A.Field, A.Index)):
        node = node.obj
    return isinstance(node, A.Name)


def parse_source(source: str) -> A.Program:
    try:
        return Parser(source).parse_program()
    except RecursionError:
        raise InterpError("parse", "program nests too deeply", None, None,
                          hint="flatten deeply nested expressions") from None
