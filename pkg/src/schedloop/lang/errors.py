from dataclasses import dataclass

KINDS = ("parse", "static", "runtime", "budget")


class InterpError(Exception):
    """Error from the policy language front end or interpreter.

    ``kind`` is one of parse/static/runtime/budget; ``hint`` is a short fix
    suggestion meant to be shown to whoever wrote the policy.
    """

    def __init__(self, kind: str, message: str, line: int | None = None, column: int | None = None,
                 hint: str = ""):
        assert kind in KINDS, kind
        self.kind = kind
        self.message = message
        self.line = line
        self.column = column
        self.hint = hint
        super().__init__(str(self))

    def __reduce__(self):
        return (InterpError, (self.kind, self.message, self.line, self.column, self.hint))

    def __str__(self) -> str:
        where = f" at line {self.line}, column {self.column}" if self.line is not None else ""
        return f"{self.kind} error{where}: {self.message}"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "message": self.message, "line": self.line, "column": self.column,
                "hint": self.hint}


@dataclass(frozen=True)
class Span:
    line: int
    column: int
