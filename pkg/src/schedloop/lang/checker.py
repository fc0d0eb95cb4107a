"""Static validation: builtin existence/arity, definite definition, block placement."""

from . import ast as A
from .errors import InterpError

# name -> arity
BUILTINS = {
    "len": 1,
    "append": 2,
    "remove_at": 2,
    "sort_by": 3,
    "ready_ops": 1,
    "range": 1,
    "num_pools": 0,
    "pool": 1,
    "running": 1,
    "pipeline_status": 1,
    "assign": 2,
    "suspend": 1,
    "min": 2,
    "max": 2,
    "floor": 1,
    "ceil": 1,
}
# need the executor, which only exists while scheduling
SCHEDULE_ONLY = {"assign", "suspend", "ready_ops", "num_pools", "pool", "running", "pipeline_status"}
RESERVED_NAMES = {"state"}


def _static(node, message: str, hint: str):
    span = getattr(node, "span", None)
    line = span.line if span and span.line else None
    col = span.column if span and span.line else None
    raise InterpError("static", message, line, col, hint=hint)


class _Checker:
    def __init__(self, in_schedule: bool):
        self.in_schedule = in_schedule
        self.scopes: list[set[str]] = []

    def defined(self, name: str) -> bool:
        return name in RESERVED_NAMES or any(name in s for s in self.scopes)

    def block(self, block: A.Block, extra: tuple = ()):
        self.scopes.append(set(extra))
        for s in block.stmts:
            self.stmt(s)
        self.scopes.pop()

    def stmt(self, s):
        if isinstance(s, A.Let):
            self.expr(s.value)
            if s.name in RESERVED_NAMES:
                _static(s, f"'{s.name}' is reserved", "pick another variable name")
            self.scopes[-1].add(s.name)
        elif isinstance(s, A.Assign):
            self.expr(s.value)
            target = s.target
            if isinstance(target, A.Name):
                if target.id in RESERVED_NAMES:
                    _static(target, "cannot replace 'state' itself",
                            "store values in fields instead, e.g. state.queue = [];")
                if not self.defined(target.id):
                    _static(target, f"assignment to undeclared variable '{target.id}'",
                            f"declare it first: let {target.id} = ...;")
            else:
                self.expr(target)
        elif isinstance(s, A.If):
            self.expr(s.cond)
            self.block(s.then)
            if s.orelse is not None:
                self.block(s.orelse)
        elif isinstance(s, A.For):
            self.expr(s.iterable)
            if s.var in RESERVED_NAMES:
                _static(s, f"'{s.var}' is reserved", "pick another loop variable name")
            self.block(s.body, (s.var,))
        elif isinstance(s, A.ExprStmt):
            self.expr(s.expr)
        else:
            raise TypeError(s)

    def expr(self, e):
        if isinstance(e, (A.Num, A.Str, A.Bool)):
            return
        if isinstance(e, A.Name):
            if not self.defined(e.id):
                hint = f"declare it with let {e.id} = ...; before use"
                if e.id in BUILTINS:
                    hint = f"{e.id} is a builtin function; call it as {e.id}(...)"
                _static(e, f"variable '{e.id}' is not defined here", hint)
        elif isinstance(e, A.Field):
            self.expr(e.obj)
        elif isinstance(e, A.Index):
            self.expr(e.obj)
            self.expr(e.index)
        elif isinstance(e, A.Unary):
            self.expr(e.operand)
        elif isinstance(e, A.Binary):
            self.expr(e.left)
            self.expr(e.right)
        elif isinstance(e, A.ListLit):
            for item in e.items:
                self.expr(item)
        elif isinstance(e, A.RecordLit):
            for _, v in e.fields:
                self.expr(v)
        elif isinstance(e, A.Call):
            if e.func not in BUILTINS:
                _static(e, f"unknown builtin '{e.func}'",
                        "valid builtins: " + ", ".join(sorted(BUILTINS)))
            arity = BUILTINS[e.func]
            if len(e.args) != arity:
                _static(e, f"{e.func} takes {arity} argument{'s' if arity != 1 else ''}, got {len(e.args)}",
                        f"call it as {e.func}({', '.join(['_'] * arity)})")
            if e.func in SCHEDULE_ONLY and not self.in_schedule:
                _static(e, f"{e.func} is schedule-only",
                        "init runs before the simulation starts; move this call into the schedule block")
            for a in e.args:
                self.expr(a)
        else:
            raise TypeError(e)


def validate_program(program: A.Program) -> None:
    """Raise InterpError(kind="static") on the first problem found."""
    a, b = program.params
    if a == b:
        _static(program, "schedule parameters must have distinct names", "write schedule(failures, pipelines)")
    for p in program.params:
        if p in RESERVED_NAMES:
            _static(program, f"'{p}' is reserved", "write schedule(failures, pipelines)")
    _Checker(in_schedule=False).block(program.init)
    _Checker(in_schedule=True).block(program.schedule, program.params)
