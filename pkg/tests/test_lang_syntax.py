import pytest
from hypothesis import given, settings, strategies as st

from schedloop.lang import ast as A
from schedloop.lang import BUILTINS, FIFO_SOURCE, InterpError, bundled_source, load_program, parse, pretty
from schedloop.lang.parser import KEYWORDS, parse_source, tokenize

MINIMAL = "init { }\nschedule(failures, pipelines) { }\n"


def parse_error(source):
    with pytest.raises(InterpError) as ei:
        parse(source)
    assert ei.value.kind == "parse"
    return ei.value


def static_error(source):
    with pytest.raises(InterpError) as ei:
        load_program(source)
    assert ei.value.kind == "static"
    return ei.value


class TestParser:
    def test_minimal(self):
        prog = parse_source(MINIMAL)
        assert prog.init.stmts == () and prog.schedule.stmts == ()
        assert prog.params == ("failures", "pipelines")

    def test_bundled_policies_load(self):
        for name in ("fifo", "sjf_preempt"):
            load_program(bundled_source(name))

    def test_precedence(self):
        prog = parse_source("init { let x = 1 + 2 * 3 == 7 and not false or true; } schedule(a, b) { }")
        e = prog.init.stmts[0].value
        assert e.op == "or"
        assert e.left.op == "and"
        cmp_ = e.left.left
        assert cmp_.op == "==" and cmp_.left.op == "+" and cmp_.left.right.op == "*"
        assert e.left.right == A.Unary("not", A.Bool(False))

    def test_left_associative(self):
        e = parse_source("init { let x = 8 - 4 - 2; } schedule(a, b) { }").init.stmts[0].value
        assert e == A.Binary("-", A.Binary("-", A.Num(8), A.Num(4)), A.Num(2))

    def test_else_if_is_nested_if(self):
        src = "init { let x = 1; if x == 1 { } else if x == 2 { } else { x = 3; } } schedule(a, b) { }"
        stmt = parse_source(src).init.stmts[1]
        assert isinstance(stmt.orelse.stmts[0], A.If)

    def test_comments_and_escapes(self):
        toks = tokenize('# hi\nlet s = "a\\n\\"b\\"";  # trailing')
        assert [t.text for t in toks][:4] == ["let", "s", "=", 'a\n"b"']
        assert toks[0].line == 2

    def test_missing_semicolon_position(self):
        err = parse_error("init {\n    let x = 1\n}\nschedule(a, b) { }")
        assert (err.line, err.column) == (3, 1)
        assert "';'" in err.hint

    def test_missing_schedule_block(self):
        err = parse_error("init { }")
        assert "schedule" in err.message

    def test_schedule_before_init(self):
        err = parse_error("schedule(a, b) { } init { }")
        assert "init" in err.message

    def test_unclosed_brace_points_at_opening(self):
        err = parse_error("init { }\nschedule(a, b) {\n  if true {\n    let x = 1;\n}\n")
        assert (err.line, err.column) == (6, 1)
        assert "line 2, column 16 is never closed" in err.hint

    def test_unmatched_close(self):
        assert "unmatched" in parse_error(MINIMAL + "}").message

    def test_single_quotes_hint(self):
        assert "double quotes" in parse_error("init { let s = 'x'; } schedule(a, b) { }").hint

    def test_user_functions_rejected(self):
        parse_error("init { let f = x.y(1); } schedule(a, b) { }")

    def test_bad_assignment_target(self):
        parse_error("init { 1 + 2 = 3; } schedule(a, b) { }")

    def test_keyword_as_variable(self):
        assert "reserved" in parse_error("init { let for = 1; } schedule(a, b) { }").message


class TestChecker:
    def wrap(self, init="", sched=""):
        return f"init {{ {init} }} schedule(failures, pipelines) {{ {sched} }}"

    def test_unknown_builtin_lists_valid(self):
        err = static_error(self.wrap(sched="let x = sqrt(4);"))
        assert "sqrt" in err.message
        assert all(b in err.hint for b in BUILTINS)

    def test_arity(self):
        err = static_error(self.wrap(sched="assign(1);"))
        assert "assign takes 2 arguments, got 1" in err.message

    @pytest.mark.parametrize("call", ["assign(\"x\", 0);", "suspend(\"x\");", "let n = num_pools();",
                                      "let p = pool(0);", "let r = running(0);"])
    def test_schedule_only_in_init(self, call):
        assert "schedule-only" in static_error(self.wrap(init=call)).message

    def test_undeclared_variable(self):
        err = static_error(self.wrap(sched="let a = 1;\nb = 2;"))
        assert "undeclared" in err.message

    def test_block_scoping(self):
        static_error(self.wrap(sched="if true { let a = 1; } let b = a;"))

    def test_loop_variable_scoped_to_body(self):
        static_error(self.wrap(sched="for p in pipelines { } let q = p;"))

    def test_state_cannot_be_replaced(self):
        static_error(self.wrap(init="state = 1;"))

    def test_state_fields_ok(self):
        load_program(self.wrap(init="state.x = 1; state.y = [state.x];"))

    def test_builtin_name_as_variable_hint(self):
        assert "builtin" in static_error(self.wrap(sched="let x = len;")).hint


# --- round trip ---------------------------------------------------------------

idents = st.from_regex(r"[a-z_][a-z0-9_]{0,6}", fullmatch=True).filter(lambda s: s not in KEYWORDS)
numbers = st.floats(min_value=0, max_value=1e12, allow_nan=False, allow_infinity=False)

atoms = st.one_of(
    numbers.map(A.Num),
    st.text(max_size=8).map(A.Str),
    st.booleans().map(A.Bool),
    idents.map(A.Name),
)


def extend(children):
    return st.one_of(
        st.tuples(children, idents).map(lambda t: A.Field(*t)),
        st.tuples(children, children).map(lambda t: A.Index(*t)),
        st.tuples(st.sampled_from(["-", "not"]), children).map(lambda t: A.Unary(*t)),
        st.tuples(st.sampled_from(sorted(A.BINARY_PREC)), children, children).map(lambda t: A.Binary(*t)),
        st.lists(children, max_size=3).map(lambda xs: A.ListLit(tuple(xs))),
        st.dictionaries(st.text(max_size=5) | idents, children, max_size=3).map(
            lambda d: A.RecordLit(tuple(d.items()))),
        st.tuples(st.sampled_from(sorted(BUILTINS)), st.lists(children, max_size=3)).map(
            lambda t: A.Call(t[0], tuple(t[1]))),
    )


exprs = st.recursive(atoms, extend, max_leaves=12)
lvalues = st.recursive(idents.map(A.Name), lambda c: st.one_of(
    st.tuples(c, idents).map(lambda t: A.Field(*t)),
    st.tuples(c, exprs).map(lambda t: A.Index(*t))), max_leaves=3)


def stmt_ext(blocks):
    return st.one_of(
        st.tuples(exprs, blocks, st.none() | blocks).map(lambda t: A.If(*t)),
        st.tuples(idents, exprs, blocks).map(lambda t: A.For(*t)),
    )


simple = st.one_of(
    st.tuples(idents, exprs).map(lambda t: A.Let(*t)),
    st.tuples(lvalues, exprs).map(lambda t: A.Assign(*t)),
    exprs.map(A.ExprStmt),
)
stmts = st.recursive(simple, lambda c: stmt_ext(st.lists(c, max_size=3).map(lambda xs: A.Block(tuple(xs)))),
                     max_leaves=6)
blocks = st.lists(stmts, max_size=4).map(lambda xs: A.Block(tuple(xs)))
programs = st.builds(A.Program, blocks, blocks, st.tuples(idents, idents))


@settings(max_examples=200, deadline=None)
@given(programs)
def test_print_parse_round_trip(prog):
    text = pretty(prog)
    assert parse_source(text) == prog
    assert pretty(parse_source(text)) == text


def test_fifo_round_trip():
    prog = parse_source(FIFO_SOURCE)
    assert parse_source(pretty(prog)) == prog
