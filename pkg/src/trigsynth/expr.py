"""Typed expressions for monitor guards and variable updates.

An expression is evaluated against two things: the current event (a set of
input proposition names) and a valuation of the declared integer/boolean
variables. Evaluation is pure; updates build a fresh valuation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Union

Value = Union[int, bool]
Kind = str  # "int" | "bool"

INT = "int"
BOOL = "bool"


class ExprError(Exception):
    pass


class KindError(ExprError):
    """Static kind mismatch or use of an undeclared name."""


class EvalError(ExprError):
    """Runtime failure: division by zero, undeclared variable."""


@dataclass(frozen=True)
class VarDecl:
    name: str
    kind: Kind
    initial: Value


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class InEvent:
    """Membership test of one proposition in the current event."""

    prop: str


@dataclass(frozen=True)
class Arith:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Compare:
    op: str  # == != < <= > >=
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class BoolOp:
    op: str  # & |
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class Ite:
    """if-then-else; only the selected branch is evaluated."""

    cond: "Expr"
    then: "Expr"
    orelse: "Expr"


Expr = Union[IntLit, BoolLit, Var, InEvent, Arith, Compare, BoolOp, Not, Ite]


@dataclass(frozen=True)
class Assignment:
    target: str
    value: Expr


# Assignments in one action all read the pre-state (simultaneous update).
Action = tuple[Assignment, ...]

_ORDER_OPS = {"<", "<=", ">", ">="}


def int_div(a: int, b: int) -> int:
    """Integer division truncating toward zero. Division by zero is an error."""
    if b == 0:
        raise EvalError("division by zero")
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


def check_expr(e: Expr, decls: Mapping[str, Kind]) -> Kind:
    """Return the kind of e, raising KindError on any ill-kinded subterm."""
    if isinstance(e, IntLit):
        return INT
    if isinstance(e, BoolLit):
        return BOOL
    if isinstance(e, Var):
        kind = decls.get(e.name)
        if kind is None:
            raise KindError(f"undeclared variable '{e.name}'")
        return kind
    if isinstance(e, InEvent):
        return BOOL
    if isinstance(e, Arith):
        if check_expr(e.left, decls) != INT or check_expr(e.right, decls) != INT:
            raise KindError(f"'{e.op}' needs integer operands")
        return INT
    if isinstance(e, Compare):
        lk = check_expr(e.left, decls)
        rk = check_expr(e.right, decls)
        if lk != rk:
            raise KindError(f"'{e.op}' compares mixed kinds {lk}/{rk}")
        if e.op in _ORDER_OPS and lk != INT:
            raise KindError(f"'{e.op}' needs integer operands")
        return BOOL
    if isinstance(e, BoolOp):
        if check_expr(e.left, decls) != BOOL or check_expr(e.right, decls) != BOOL:
            raise KindError(f"'{e.op}' needs boolean operands")
        return BOOL
    if isinstance(e, Not):
        if check_expr(e.operand, decls) != BOOL:
            raise KindError("'!' needs a boolean operand")
        return BOOL
    if isinstance(e, Ite):
        if check_expr(e.cond, decls) != BOOL:
            raise KindError("ite condition must be boolean")
        tk = check_expr(e.then, decls)
        ek = check_expr(e.orelse, decls)
        if tk != ek:
            raise KindError(f"ite branches disagree: {tk} vs {ek}")
        return tk
    raise KindError(f"unknown expression node {e!r}")


def eval_expr(e: Expr, event: frozenset[str] | set[str], val: Mapping[str, Value]) -> Value:
    """Structural evaluation. `&`, `|` and `ite` only evaluate what they need."""
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, Var):
        try:
            return val[e.name]
        except KeyError:
            raise EvalError(f"variable '{e.name}' has no value") from None
    if isinstance(e, InEvent):
        return e.prop in event
    if isinstance(e, Arith):
        a = _as_int(eval_expr(e.left, event, val), e.op)
        b = _as_int(eval_expr(e.right, event, val), e.op)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            return int_div(a, b)
        raise EvalError(f"unknown arithmetic operator '{e.op}'")
    if isinstance(e, Compare):
        a = eval_expr(e.left, event, val)
        b = eval_expr(e.right, event, val)
        if e.op in _ORDER_OPS:
            a = _as_int(a, e.op)
            b = _as_int(b, e.op)
            if e.op == "<":
                return a < b
            if e.op == "<=":
                return a <= b
            if e.op == ">":
                return a > b
            return a >= b
        if e.op == "==":
            return a == b
        if e.op == "!=":
            return a != b
        raise EvalError(f"unknown comparison operator '{e.op}'")
    if isinstance(e, BoolOp):
        a = _as_bool(eval_expr(e.left, event, val), e.op)
        if e.op == "&":
            return _as_bool(eval_expr(e.right, event, val), e.op) if a else False
        if e.op == "|":
            return True if a else _as_bool(eval_expr(e.right, event, val), e.op)
        raise EvalError(f"unknown boolean operator '{e.op}'")
    if isinstance(e, Not):
        return not _as_bool(eval_expr(e.operand, event, val), "!")
    if isinstance(e, Ite):
        branch = e.then if _as_bool(eval_expr(e.cond, event, val), "ite") else e.orelse
        return eval_expr(branch, event, val)
    raise EvalError(f"unknown expression node {e!r}")


def _as_int(v: Value, op: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise EvalError(f"'{op}' applied to non-integer value {v!r}")
    return v


def _as_bool(v: Value, op: str) -> bool:
    if not isinstance(v, bool):
        raise EvalError(f"'{op}' applied to non-boolean value {v!r}")
    return v


def check_action(action: Action, decls: Mapping[str, Kind]) -> None:
    seen: set[str] = set()
    for a in action:
        kind = decls.get(a.target)
        if kind is None:
            raise KindError(f"assignment to undeclared variable '{a.target}'")
        if a.target in seen:
            raise KindError(f"variable '{a.target}' assigned twice in one action")
        seen.add(a.target)
        if check_expr(a.value, decls) != kind:
            raise KindError(f"assignment to '{a.target}' has the wrong kind")


def apply_action(
    action: Action, event: frozenset[str] | set[str], val: Mapping[str, Value]
) -> dict[str, Value]:
    """Apply every assignment with right-hand sides read from the pre-state."""
    updates = [(a.target, eval_expr(a.value, event, val)) for a in action]
    out = dict(val)
    for name, v in updates:
        if name not in out:
            raise EvalError(f"assignment to undeclared variable '{name}'")
        out[name] = v
    return out


# ---------------------------------------------------------------------------
# Compiled fast path. Guards run millions of times in the randomized suites;
# a closure tree is roughly an order of magnitude faster than eval_expr and
# is property-tested equivalent to it.

EvalFn = Callable[[frozenset, Mapping[str, Value]], Value]


def compile_expr(e: Expr) -> EvalFn:
    if isinstance(e, IntLit):
        v = e.value
        return lambda ev, val: v
    if isinstance(e, BoolLit):
        b = e.value
        return lambda ev, val: b
    if isinstance(e, Var):
        name = e.name
        def var_fn(ev, val, _n=name):
            try:
                return val[_n]
            except KeyError:
                raise EvalError(f"variable '{_n}' has no value") from None
        return var_fn
    if isinstance(e, InEvent):
        p = e.prop
        return lambda ev, val: p in ev
    if isinstance(e, Arith):
        lf, rf = compile_expr(e.left), compile_expr(e.right)
        if e.op == "+":
            return lambda ev, val: lf(ev, val) + rf(ev, val)
        if e.op == "-":
            return lambda ev, val: lf(ev, val) - rf(ev, val)
        if e.op == "*":
            return lambda ev, val: lf(ev, val) * rf(ev, val)
        return lambda ev, val: int_div(lf(ev, val), rf(ev, val))
    if isinstance(e, Compare):
        lf, rf = compile_expr(e.left), compile_expr(e.right)
        op = e.op
        if op == "==":
            return lambda ev, val: lf(ev, val) == rf(ev, val)
        if op == "!=":
            return lambda ev, val: lf(ev, val) != rf(ev, val)
        if op == "<":
            return lambda ev, val: lf(ev, val) < rf(ev, val)
        if op == "<=":
            return lambda ev, val: lf(ev, val) <= rf(ev, val)
        if op == ">":
            return lambda ev, val: lf(ev, val) > rf(ev, val)
        return lambda ev, val: lf(ev, val) >= rf(ev, val)
    if isinstance(e, BoolOp):
        lf, rf = compile_expr(e.left), compile_expr(e.right)
        if e.op == "&":
            return lambda ev, val: lf(ev, val) and rf(ev, val)
        return lambda ev, val: lf(ev, val) or rf(ev, val)
    if isinstance(e, Not):
        f = compile_expr(e.operand)
        return lambda ev, val: not f(ev, val)
    if isinstance(e, Ite):
        cf, tf, ef = compile_expr(e.cond), compile_expr(e.then), compile_expr(e.orelse)
        return lambda ev, val: tf(ev, val) if cf(ev, val) else ef(ev, val)
    raise EvalError(f"unknown expression node {e!r}")


# ---------------------------------------------------------------------------
# Printer. Minimal parentheses; the spec-file parser reads this output back.

_LEVEL = {"|": 1, "&": 2}
_CMP_LEVEL = 4
_ADD_LEVEL = 5
_MUL_LEVEL = 6
_ATOM_LEVEL = 9


def to_text(e: Expr) -> str:
    return _print(e, 0)


def _print(e: Expr, parent_level: int) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, InEvent):
        return f"in({e.prop})"
    if isinstance(e, Ite):
        return f"ite({_print(e.cond, 0)}, {_print(e.then, 0)}, {_print(e.orelse, 0)})"
    if isinstance(e, Not):
        return "!" + _print(e.operand, 8)
    if isinstance(e, BoolOp):
        level = _LEVEL[e.op]
        s = f"{_print(e.left, level)} {e.op} {_print(e.right, level + 1)}"
        return f"({s})" if parent_level > level else s
    if isinstance(e, Compare):
        s = f"{_print(e.left, _CMP_LEVEL + 1)} {e.op} {_print(e.right, _CMP_LEVEL + 1)}"
        return f"({s})" if parent_level > _CMP_LEVEL else s
    if isinstance(e, Arith):
        level = _MUL_LEVEL if e.op in ("*", "/") else _ADD_LEVEL
        # left-associative: right child needs one level more
        s = f"{_print(e.left, level)} {e.op} {_print(e.right, level + 1)}"
        return f"({s})" if parent_level > level else s
    raise ExprError(f"unknown expression node {e!r}")
