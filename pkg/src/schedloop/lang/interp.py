"""Bounded, deterministic interpreter for policy programs.

The syntax tree is compiled once into nested Python closures; variables are
resolved to frame slots at compile time. Budget accounting: one step per
executed statement, per loop iteration and per builtin call, plus the list
length for ``sort_by``.

Values map onto Python objects: number -> float, boolean -> bool,
string -> str, list -> list, record -> dict, unit -> None.
"""

import math
import operator
from dataclasses import dataclass, field

from ..events import Assignment, ScheduleResult, Suspension
from . import ast as A
from .checker import validate_program
from .errors import InterpError
from .parser import parse_source

DEFAULT_MAX_STEPS = 200_000


@dataclass
class PolicyProgram:
    source_text: str
    ast: A.Program
    _compiled: tuple | None = field(default=None, repr=False, compare=False)


def parse(source_text: str) -> PolicyProgram:
    return PolicyProgram(source_text, parse_source(source_text))


def load_program(source_text: str) -> PolicyProgram:
    """Parse and statically validate."""
    program = parse(source_text)
    validate_program(program.ast)
    return program


class _BuiltinError(Exception):
    def __init__(self, message: str, hint: str = ""):
        super().__init__(message)
        self.message = message
        self.hint = hint


class _Ctx:
    __slots__ = ("steps", "limit", "frame", "state", "view", "suspensions", "assignments", "assigned")

    def __init__(self, limit: int, nslots: int, state: dict, view=None):
        self.steps = 0
        self.limit = limit
        self.frame = [None] * nslots
        self.state = state
        self.view = view
        self.suspensions: list = []
        self.assignments: list = []
        self.assigned: set = set()


def type_name(v) -> str:
    t = type(v)
    if t is float:
        return "number"
    if t is bool:
        return "boolean"
    if t is str:
        return "string"
    if t is list:
        return "list"
    if t is dict:
        return "record"
    if v is None:
        return "unit"
    return t.__name__


def values_equal(a, b) -> bool:
    ta, tb = type(a), type(b)
    if ta is not tb:
        return False
    if ta is list:
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    if ta is dict:
        return a.keys() == b.keys() and all(values_equal(a[k], b[k]) for k in a)
    return a == b


def copy_value(v):
    t = type(v)
    if t is list:
        return [copy_value(x) for x in v]
    if t is dict:
        return {k: copy_value(x) for k, x in v.items()}
    return v


def _reaches(value, target) -> bool:
    stack = [value]
    while stack:
        v = stack.pop()
        if v is target:
            return True
        t = type(v)
        if t is list:
            stack.extend(v)
        elif t is dict:
            stack.extend(v.values())
    return False


def _num(v):
    """Executor integers enter the language as floats."""
    return float(v)


def _as_index(i, size: int, what: str) -> int:
    if type(i) is not float or i != int(i):
        raise _BuiltinError(f"{what} index must be a whole number, got {type_name(i)} {_show(i)}")
    k = int(i)
    if not 0 <= k < size:
        raise _BuiltinError(f"{what} index {k} out of range for length {size}",
                            "check len(...) before indexing")
    return k


def _show(v) -> str:
    if type(v) is float:
        return str(int(v)) if v == int(v) and abs(v) < 2**53 else repr(v)
    if type(v) is str:
        return repr(v)
    if type(v) is bool:
        return "true" if v else "false"
    if v is None:
        return "unit"
    text = repr(v)
    return text if len(text) <= 60 else text[:57] + "..."


# ---------------------------------------------------------------------------
# views


def op_view(op, status: str) -> dict:
    return {
        "op_id": op.op_id,
        "pipeline_id": op.pipeline_id,
        "cpu_req": _num(op.cpu_req),
        "mem_req": _num(op.mem_req),
        "duration_hint": _num(op.duration),
        "deps": list(op.deps),
        "status": status,
    }


def pipeline_view(p, view) -> dict:
    return {
        "pipeline_id": p.pipeline_id,
        "workload_class": p.workload_class,
        "arrival_tick": _num(p.arrival_tick),
        "ops": [op_view(op, view.op_status(op.op_id) if view is not None else "waiting") for op in p.ops],
    }


def failure_view(f) -> dict:
    return {"pipeline_id": f.pipeline_id, "reason": f.reason, "tick": _num(f.tick)}


# ---------------------------------------------------------------------------
# builtins: each takes (ctx, args) with already-evaluated args


def _need(v, tname: str, fname: str, pos: int, hint: str = ""):
    if type_name(v) != tname:
        raise _BuiltinError(f"{fname}: argument {pos} must be a {tname}, got {type_name(v)} {_show(v)}", hint)


def _b_len(ctx, args):
    (x,) = args
    if type(x) not in (list, dict, str):
        raise _BuiltinError(f"len: expected a list, record or string, got {type_name(x)}")
    return float(len(x))


def _b_append(ctx, args):
    lst, v = args
    _need(lst, "list", "append", 1)
    if type(v) in (list, dict) and _reaches(v, lst):
        raise _BuiltinError("append would create a cyclic structure", "append a fresh list/record instead")
    lst.append(v)
    return None


def _b_remove_at(ctx, args):
    lst, i = args
    _need(lst, "list", "remove_at", 1)
    return lst.pop(_as_index(i, len(lst), "remove_at"))


def _b_sort_by(ctx, args):
    lst, fname, ascending = args
    _need(lst, "list", "sort_by", 1)
    _need(fname, "string", "sort_by", 2, 'pass the field name as a string, e.g. sort_by(ops, "duration_hint", true)')
    _need(ascending, "boolean", "sort_by", 3)
    ctx.steps += len(lst)
    for k, item in enumerate(lst):
        if type(item) is not dict:
            raise _BuiltinError(f"sort_by: element {k} is a {type_name(item)}, not a record")
        if fname not in item:
            raise _BuiltinError(f"sort_by: element {k} has no field {fname!r}",
                                f"available fields: {', '.join(sorted(item))}")
        if type(item[fname]) is not float:
            raise _BuiltinError(f"sort_by: field {fname!r} of element {k} is a {type_name(item[fname])}, not a number")
    # Python's sort is stable in both directions
    return sorted(lst, key=lambda r: r[fname], reverse=not ascending)


def _check_pool(ctx, v, fname: str) -> int:
    _need(v, "number", fname, 1)
    n = ctx.view.num_pools
    if v != int(v) or not 0 <= int(v) < n:
        raise _BuiltinError(f"{fname}: pool {_show(v)} does not exist", f"valid pool ids are 0..{n - 1} (num_pools() is {n})")
    return int(v)


def _b_ready_ops(ctx, args):
    (p,) = args
    if type(p) is dict:
        pid = p.get("pipeline_id")
    else:
        pid = p
    if type(pid) is not str:
        raise _BuiltinError(f"ready_ops: expected a pipeline view or pipeline_id string, got {type_name(p)}",
                            "pass a pipeline record received in the pipelines parameter")
    ops = ctx.view.ready_ops(pid)
    return [op_view(op, "ready") for op in ops if op.op_id not in ctx.assigned]


def _b_range(ctx, args):
    (n,) = args
    _need(n, "number", "range", 1)
    if n != int(n) or n < 0:
        raise _BuiltinError(f"range: expected a non-negative whole number, got {_show(n)}")
    # charge before allocating so a huge n cannot exhaust memory
    ctx.steps += int(n)
    if ctx.steps > ctx.limit:
        raise _BuiltinError("range too large for the remaining step budget")
    return [float(k) for k in range(int(n))]


def _b_num_pools(ctx, args):
    return float(ctx.view.num_pools)


def _b_pool(ctx, args):
    pid = _check_pool(ctx, args[0], "pool")
    return {k: (_num(v) if type(v) is int else v) for k, v in ctx.view.pool(pid).items()}


def _b_running(ctx, args):
    pid = _check_pool(ctx, args[0], "running")
    return [{k: (_num(v) if type(v) is int else v) for k, v in h.items()} for h in ctx.view.running(pid)]


def _b_pipeline_status(ctx, args):
    (p,) = args
    pid = p.get("pipeline_id") if type(p) is dict else p
    if type(pid) is not str:
        raise _BuiltinError(f"pipeline_status: expected a pipeline view or pipeline_id string, got {type_name(p)}")
    return ctx.view.pipeline_status(pid)


def _b_assign(ctx, args):
    op_id, pool_id = args
    _need(op_id, "string", "assign", 1, "pass the op_id string, e.g. assign(op.op_id, pool_id)")
    _need(pool_id, "number", "assign", 2, "pass a pool id number between 0 and num_pools() - 1")
    pid = int(pool_id) if pool_id == int(pool_id) else pool_id
    ctx.assignments.append(Assignment(op_id, pid))
    ctx.assigned.add(op_id)
    return None


def _b_suspend(ctx, args):
    (op_id,) = args
    _need(op_id, "string", "suspend", 1, "pass the op_id string of a running op, e.g. suspend(h.op_id)")
    ctx.suspensions.append(Suspension(op_id))
    return None


def _num2(fname, args):
    a, b = args
    _need(a, "number", fname, 1)
    _need(b, "number", fname, 2)
    return a, b


def _b_min(ctx, args):
    a, b = _num2("min", args)
    return a if a <= b else b


def _b_max(ctx, args):
    a, b = _num2("max", args)
    return a if a >= b else b


def _b_floor(ctx, args):
    _need(args[0], "number", "floor", 1)
    return float(math.floor(args[0]))


def _b_ceil(ctx, args):
    _need(args[0], "number", "ceil", 1)
    return float(math.ceil(args[0]))


BUILTIN_IMPLS = {
    "len": _b_len,
    "append": _b_append,
    "remove_at": _b_remove_at,
    "sort_by": _b_sort_by,
    "ready_ops": _b_ready_ops,
    "range": _b_range,
    "num_pools": _b_num_pools,
    "pool": _b_pool,
    "running": _b_running,
    "pipeline_status": _b_pipeline_status,
    "assign": _b_assign,
    "suspend": _b_suspend,
    "min": _b_min,
    "max": _b_max,
    "floor": _b_floor,
    "ceil": _b_ceil,
}


# ---------------------------------------------------------------------------
# compilation


def _runtime(node, message: str, hint: str = ""):
    sp = node.span
    return InterpError("runtime", message, sp.line or None, sp.column or None, hint=hint)


def _budget(ctx, node):
    sp = node.span
    return InterpError("budget", f"step budget of {ctx.limit} exceeded", sp.line or None, sp.column or None,
                       hint="loops run over lists only; avoid re-scanning large lists inside nested loops")


def _arith(op, node):
    def bad(a, b):
        return _runtime(node, f"'{op}' expects numbers, got {type_name(a)} and {type_name(b)}",
                        "convert or check the operand types")

    if op == "+":
        def f(a, b):
            if type(a) is float and type(b) is float:
                return a + b
            if type(a) is list and type(b) is list:
                return a + b
            raise bad(a, b)
    elif op == "-":
        def f(a, b):
            if type(a) is float and type(b) is float:
                return a - b
            raise bad(a, b)
    elif op == "*":
        def f(a, b):
            if type(a) is float and type(b) is float:
                return a * b
            raise bad(a, b)
    elif op == "/":
        def f(a, b):
            if type(a) is float and type(b) is float:
                if b == 0.0:
                    raise _runtime(node, "division by zero", "guard the divisor with an if")
                return a / b
            raise bad(a, b)
    elif op == "%":
        def f(a, b):
            if type(a) is float and type(b) is float:
                if b == 0.0:
                    raise _runtime(node, "modulo by zero", "guard the divisor with an if")
                return a % b
            raise bad(a, b)
    else:
        cmp = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}[op]

        def f(a, b):
            if type(a) is float and type(b) is float:
                return cmp(a, b)
            raise _runtime(node, f"'{op}' compares numbers only, got {type_name(a)} and {type_name(b)}",
                           "ordering is defined on numbers; strings support only == and !=")
    return f


class _Compiler:
    def __init__(self):
        self.nslots = 0
        self.scopes: list[dict[str, int]] = []

    def new_slot(self, name: str) -> int:
        slot = self.nslots
        self.nslots += 1
        self.scopes[-1][name] = slot
        return slot

    def lookup(self, name: str) -> int:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        raise KeyError(name)

    # statements

    def block(self, block: A.Block, names: tuple = ()):
        self.scopes.append({})
        for n in names:
            self.new_slot(n)
        stmts = tuple(self.stmt(s) for s in block.stmts)
        self.scopes.pop()

        def run(ctx):
            for s in stmts:
                s(ctx)

        return run

    def stmt(self, s):
        if isinstance(s, A.Let):
            value = self.expr(s.value)
            slot = self.new_slot(s.name)

            def run(ctx):
                ctx.steps += 1
                if ctx.steps > ctx.limit:
                    raise _budget(ctx, s)
                ctx.frame[slot] = value(ctx)

            return run
        if isinstance(s, A.Assign):
            return self.assign(s)
        if isinstance(s, A.ExprStmt):
            e = self.expr(s.expr)

            def run(ctx):
                ctx.steps += 1
                if ctx.steps > ctx.limit:
                    raise _budget(ctx, s)
                e(ctx)

            return run
        if isinstance(s, A.If):
            cond = self.expr(s.cond)
            then = self.block(s.then)
            orelse = self.block(s.orelse) if s.orelse is not None else None

            def run(ctx):
                ctx.steps += 1
                if ctx.steps > ctx.limit:
                    raise _budget(ctx, s)
                c = cond(ctx)
                if c is True:
                    then(ctx)
                elif c is False:
                    if orelse is not None:
                        orelse(ctx)
                else:
                    raise _runtime(s, f"if condition must be a boolean, got {type_name(c)}",
                                   "compare explicitly, e.g. if len(xs) > 0 { ... }")

            return run
        if isinstance(s, A.For):
            iterable = self.expr(s.iterable)
            self.scopes.append({})
            slot = self.new_slot(s.var)
            body = self.block(s.body)
            self.scopes.pop()

            def run(ctx):
                ctx.steps += 1
                if ctx.steps > ctx.limit:
                    raise _budget(ctx, s)
                seq = iterable(ctx)
                if type(seq) is not list:
                    raise _runtime(s, f"for loops iterate over lists, got {type_name(seq)}")
                frame = ctx.frame
                for item in list(seq):
                    ctx.steps += 1
                    if ctx.steps > ctx.limit:
                        raise _budget(ctx, s)
                    frame[slot] = item
                    body(ctx)

            return run
        raise TypeError(s)

    def assign(self, s: A.Assign):
        value = self.expr(s.value)
        target = s.target

        def tick(ctx):
            ctx.steps += 1
            if ctx.steps > ctx.limit:
                raise _budget(ctx, s)

        if isinstance(target, A.Name):
            slot = self.lookup(target.id)

            def run(ctx):
                tick(ctx)
                ctx.frame[slot] = value(ctx)

            return run

        container = self.expr(target.obj)

        def check_cycle(c, v):
            if type(v) in (list, dict) and _reaches(v, c):
                raise _runtime(s, "assignment would create a cyclic structure",
                               "store a fresh list/record instead of one that contains the target")

        if isinstance(target, A.Field):
            name = target.name

            def run(ctx):
                tick(ctx)
                c = container(ctx)
                if type(c) is not dict:
                    raise _runtime(target, f"cannot set field '{name}' on a {type_name(c)}")
                v = value(ctx)
                check_cycle(c, v)
                c[name] = v

            return run

        index = self.expr(target.index)

        def run(ctx):
            tick(ctx)
            c = container(ctx)
            i = index(ctx)
            v = value(ctx)
            if type(c) is list:
                try:
                    k = _as_index(i, len(c), "list")
                except _BuiltinError as err:
                    raise _runtime(target, err.message, err.hint) from None
            elif type(c) is dict:
                if type(i) is not str:
                    raise _runtime(target, f"record keys are strings, got {type_name(i)}")
                k = i
            else:
                raise _runtime(target, f"cannot index into a {type_name(c)}")
            check_cycle(c, v)
            c[k] = v

        return run

    # expressions

    def expr(self, e):
        if isinstance(e, (A.Num, A.Str, A.Bool)):
            v = e.value
            return lambda ctx: v
        if isinstance(e, A.Name):
            if e.id == "state":
                return lambda ctx: ctx.state
            slot = self.lookup(e.id)
            return lambda ctx: ctx.frame[slot]
        if isinstance(e, A.Field):
            obj = self.expr(e.obj)
            name = e.name

            def get_field(ctx):
                o = obj(ctx)
                if type(o) is dict:
                    try:
                        return o[name]
                    except KeyError:
                        raise _runtime(e, f"record has no field '{name}'",
                                       "available fields: " + (", ".join(sorted(o)) or "(none)")) from None
                raise _runtime(e, f"cannot read field '{name}' of a {type_name(o)}")

            return get_field
        if isinstance(e, A.Index):
            obj = self.expr(e.obj)
            index = self.expr(e.index)

            def get_index(ctx):
                o = obj(ctx)
                i = index(ctx)
                if type(o) is list:
                    try:
                        return o[_as_index(i, len(o), "list")]
                    except _BuiltinError as err:
                        raise _runtime(e, err.message, err.hint) from None
                if type(o) is dict:
                    if type(i) is not str:
                        raise _runtime(e, f"record keys are strings, got {type_name(i)}")
                    if i not in o:
                        raise _runtime(e, f"record has no field {i!r}")
                    return o[i]
                raise _runtime(e, f"cannot index into a {type_name(o)}")

            return get_index
        if isinstance(e, A.Unary):
            operand = self.expr(e.operand)
            if e.op == "not":
                def run_not(ctx):
                    v = operand(ctx)
                    if type(v) is not bool:
                        raise _runtime(e, f"'not' expects a boolean, got {type_name(v)}")
                    return not v

                return run_not

            def run_neg(ctx):
                v = operand(ctx)
                if type(v) is not float:
                    raise _runtime(e, f"unary '-' expects a number, got {type_name(v)}")
                return -v

            return run_neg
        if isinstance(e, A.Binary):
            return self.binary(e)
        if isinstance(e, A.ListLit):
            items = tuple(self.expr(i) for i in e.items)
            return lambda ctx: [f(ctx) for f in items]
        if isinstance(e, A.RecordLit):
            fields = tuple((k, self.expr(v)) for k, v in e.fields)
            return lambda ctx: {k: f(ctx) for k, f in fields}
        if isinstance(e, A.Call):
            impl = BUILTIN_IMPLS[e.func]
            args = tuple(self.expr(a) for a in e.args)

            def call(ctx):
                ctx.steps += 1
                if ctx.steps > ctx.limit:
                    raise _budget(ctx, e)
                try:
                    return impl(ctx, [a(ctx) for a in args])
                except _BuiltinError as err:
                    raise _runtime(e, err.message, err.hint) from None

            return call
        raise TypeError(e)

    def binary(self, e: A.Binary):
        left = self.expr(e.left)
        right = self.expr(e.right)
        op = e.op
        if op in ("and", "or"):
            def logic(ctx):
                a = left(ctx)
                if type(a) is not bool:
                    raise _runtime(e, f"'{op}' expects booleans, got {type_name(a)}")
                if (op == "and" and not a) or (op == "or" and a):
                    return a
                b = right(ctx)
                if type(b) is not bool:
                    raise _runtime(e, f"'{op}' expects booleans, got {type_name(b)}")
                return b

            return logic
        if op in ("==", "!="):
            negate = op == "!="

            def eq(ctx):
                a = left(ctx)
                b = right(ctx)
                if type(a) is not type(b):
                    raise _runtime(e, f"'{op}' on mismatched types {type_name(a)} and {type_name(b)}",
                                   "compare values of the same type")
                return values_equal(a, b) != negate

            return eq
        f = _arith(op, e)
        return lambda ctx: f(left(ctx), right(ctx))


def _compiled(program: PolicyProgram):
    if program._compiled is None:
        c = _Compiler()
        init = c.block(program.ast.init)
        init_slots = c.nslots
        c2 = _Compiler()
        schedule = c2.block(program.ast.schedule, program.ast.params)
        program._compiled = (init, init_slots, schedule, c2.nslots)
    return program._compiled


def run_init(program: PolicyProgram, max_steps: int = DEFAULT_MAX_STEPS) -> dict:
    init, nslots, _, _ = _compiled(program)
    state: dict = {}
    ctx = _Ctx(max_steps, nslots, state)
    try:
        init(ctx)
    except RecursionError:
        raise InterpError("runtime", "expression nesting too deep", hint="simplify the expression") from None
    return state


def run_schedule(program: PolicyProgram, state: dict, failures, new_pipelines, executor_view,
                 max_steps: int = DEFAULT_MAX_STEPS, copy_state: bool = True) -> tuple[ScheduleResult, dict]:
    """Run the schedule block once.

    ``failures`` are FailureNotice objects, ``new_pipelines`` PipelineSpec
    objects and ``executor_view`` the simulator's ExecutorView. With
    ``copy_state`` the caller's state is left untouched.
    """
    _, _, schedule, nslots = _compiled(program)
    if copy_state:
        state = copy_value(state)
    ctx = _Ctx(max_steps, nslots, state, executor_view)
    ctx.frame[0] = [failure_view(f) for f in failures]
    ctx.frame[1] = [pipeline_view(p, executor_view) for p in new_pipelines]
    try:
        schedule(ctx)
    except RecursionError:
        raise InterpError("runtime", "expression nesting too deep", hint="simplify the expression") from None
    return ScheduleResult(ctx.suspensions, ctx.assignments), state


class InterpretedPolicy:
    """Simulator policy handle backed by a policy program."""

    def __init__(self, program: PolicyProgram, max_steps: int = DEFAULT_MAX_STEPS, name: str = "policy"):
        self.program = program
        self.max_steps = max_steps
        self.name = name
        self.state: dict | None = None

    @classmethod
    def from_source(cls, source: str, **kw) -> "InterpretedPolicy":
        return cls(load_program(source), **kw)

    def start(self) -> None:
        self.state = run_init(self.program, self.max_steps)

    def schedule(self, failures, pipelines, view) -> ScheduleResult:
        result, self.state = run_schedule(self.program, self.state, failures, pipelines, view,
                                          self.max_steps, copy_state=False)
        return result
