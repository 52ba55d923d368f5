"""Expression evaluation against an independent oracle plus invariants."""

import pytest
from hypothesis import given, settings, strategies as st

from trigsynth.expr import (
    Arith,
    Assignment,
    BoolLit,
    BoolOp,
    Compare,
    EvalError,
    InEvent,
    IntLit,
    Ite,
    KindError,
    Not,
    Var,
    apply_action,
    check_action,
    check_expr,
    compile_expr,
    eval_expr,
    int_div,
    to_text,
)


# A second evaluator, written in a different style (dict dispatch over class
# names, eager where the main one is lazy except for division), used purely
# as an oracle. Keep it dumb.
def oracle_eval(e, event, val):
    name = type(e).__name__
    if name == "IntLit" or name == "BoolLit":
        return e.value
    if name == "Var":
        return val[e.name]
    if name == "InEvent":
        return e.prop in event
    if name == "Arith":
        a = oracle_eval(e.left, event, val)
        b = oracle_eval(e.right, event, val)
        if e.op == "/":
            if b == 0:
                raise ZeroDivisionError
            import math
            return math.trunc(a / b) if abs(a) < 2**40 else int_div(a, b)
        return {"+": a + b, "-": a - b, "*": a * b}[e.op]
    if name == "Compare":
        a = oracle_eval(e.left, event, val)
        b = oracle_eval(e.right, event, val)
        return {
            "==": a == b, "!=": a != b, "<": a < b,
            "<=": a <= b, ">": a > b, ">=": a >= b,
        }[e.op]
    if name == "BoolOp":
        a = oracle_eval(e.left, event, val)
        if e.op == "&" and not a:
            return False
        if e.op == "|" and a:
            return True
        return oracle_eval(e.right, event, val)
    if name == "Not":
        return not oracle_eval(e.operand, event, val)
    if name == "Ite":
        if oracle_eval(e.cond, event, val):
            return oracle_eval(e.then, event, val)
        return oracle_eval(e.orelse, event, val)
    raise AssertionError(name)


def test_ite_plus_var():
    # ite(in(p1), 1, 0) + c on event {p0} with c = 3
    e = Arith("+", Ite(InEvent("p1"), IntLit(1), IntLit(0)), Var("c"))
    event = frozenset({"p0"})
    val = {"c": 3}
    assert oracle_eval(e, event, val) == 3
    assert eval_expr(e, event, val) == 3


def test_simultaneous_swap():
    # x := y, y := x both read the pre-state
    action = (Assignment("x", Var("y")), Assignment("y", Var("x")))
    before = {"x": 1, "y": 2}
    after = apply_action(action, frozenset(), before)
    assert after == {"x": 2, "y": 1}
    assert before == {"x": 1, "y": 2}, "pre-state must not be mutated"


def test_division_truncates_toward_zero():
    assert int_div(7, 2) == 3
    assert int_div(-7, 2) == -3
    assert int_div(7, -2) == -3
    assert int_div(-7, -2) == 3
    e = Arith("/", IntLit(-7), IntLit(2))
    assert eval_expr(e, frozenset(), {}) == -3
    assert compile_expr(e)(frozenset(), {}) == -3


def test_division_by_zero_is_hard_error():
    e = Arith("/", IntLit(1), Var("z"))
    with pytest.raises(EvalError):
        eval_expr(e, frozenset(), {"z": 0})
    with pytest.raises(EvalError):
        compile_expr(e)(frozenset(), {"z": 0})


def test_short_circuit_skips_division():
    # stepsNo != 0 & events / stepsNo > 0 must be safe when stepsNo = 0
    guard = BoolOp(
        "&",
        Compare("!=", Var("s"), IntLit(0)),
        Compare(">", Arith("/", Var("e"), Var("s")), IntLit(0)),
    )
    assert eval_expr(guard, frozenset(), {"s": 0, "e": 4}) is False
    assert compile_expr(guard)(frozenset(), {"s": 0, "e": 4}) is False


def test_kind_checking():
    decls = {"x": "int", "b": "bool"}
    assert check_expr(Arith("+", Var("x"), IntLit(1)), decls) == "int"
    assert check_expr(BoolOp("&", Var("b"), InEvent("p")), decls) == "bool"
    with pytest.raises(KindError):
        check_expr(Arith("+", Var("b"), IntLit(1)), decls)
    with pytest.raises(KindError):
        check_expr(Compare("<", Var("b"), Var("b")), decls)
    with pytest.raises(KindError):
        check_expr(Var("nope"), decls)
    with pytest.raises(KindError):
        check_expr(Ite(Var("b"), Var("x"), Var("b")), decls)
    with pytest.raises(KindError):
        check_action((Assignment("x", Var("b")),), decls)
    with pytest.raises(KindError):
        check_action((Assignment("x", IntLit(1)), Assignment("x", IntLit(2))), decls)


def test_frame_unassigned_vars_unchanged():
    action = (Assignment("x", IntLit(9)),)
    out = apply_action(action, frozenset(), {"x": 0, "y": 5, "b": True})
    assert out["y"] == 5 and out["b"] is True and out["x"] == 9


# --- randomized equivalence: interpreter == oracle == compiled closures ----

_names_int = st.sampled_from(["x", "y"])
_names_bool = st.sampled_from(["b"])
_props = st.sampled_from(["p", "q"])


def _int_expr(depth):
    if depth == 0:
        return st.one_of(
            st.integers(-8, 8).map(IntLit),
            _names_int.map(Var),
        )
    sub = _int_expr(depth - 1)
    cond = _bool_expr(depth - 1)
    return st.one_of(
        sub,
        st.tuples(st.sampled_from(["+", "-", "*", "/"]), sub, sub).map(
            lambda t: Arith(t[0], t[1], t[2])
        ),
        st.tuples(cond, sub, sub).map(lambda t: Ite(t[0], t[1], t[2])),
    )


def _bool_expr(depth):
    if depth == 0:
        return st.one_of(
            st.booleans().map(BoolLit),
            _names_bool.map(Var),
            _props.map(InEvent),
        )
    sub = _bool_expr(depth - 1)
    ints = _int_expr(depth - 1)
    return st.one_of(
        sub,
        st.tuples(st.sampled_from(["&", "|"]), sub, sub).map(
            lambda t: BoolOp(t[0], t[1], t[2])
        ),
        st.tuples(st.sampled_from(["==", "!=", "<", "<=", ">", ">="]), ints, ints).map(
            lambda t: Compare(t[0], t[1], t[2])
        ),
        sub.map(Not),
        st.tuples(sub, sub, sub).map(lambda t: Ite(t[0], t[1], t[2])),
    )


def _outcome(fn, *args):
    try:
        return ("ok", fn(*args))
    except (EvalError, ZeroDivisionError):
        return ("div0",)


@settings(max_examples=120, deadline=None)
@given(
    e=st.one_of(_int_expr(3), _bool_expr(3)),
    event=st.sets(st.sampled_from(["p", "q"])).map(frozenset),
    x=st.integers(-6, 6),
    y=st.integers(-6, 6),
    b=st.booleans(),
)
def test_three_evaluators_agree(e, event, x, y, b):
    val = {"x": x, "y": y, "b": b}
    r1 = _outcome(eval_expr, e, event, val)
    r2 = _outcome(oracle_eval, e, event, val)
    r3 = _outcome(compile_expr(e), event, val)
    assert r1 == r2 == r3


@settings(max_examples=80, deadline=None)
@given(e=st.one_of(_int_expr(3), _bool_expr(3)))
def test_printer_is_parseable_later(e):
    # The spec-file parser round-trips this text; here just check printing
    # is total and deterministic.
    assert to_text(e) == to_text(e)
    assert isinstance(to_text(e), str)
