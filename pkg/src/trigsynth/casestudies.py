"""Bundled example monitors and trigger specifications.

Each builder returns plain objects from the core modules. The bus monitor is
generated for a given sequence length: its counting expressions grow with n
(as a shared DAG, linearly) while its state count stays fixed.
"""

from __future__ import annotations

from .expr import (
    Arith,
    Assignment,
    BoolOp,
    Compare,
    Expr,
    InEvent,
    IntLit,
    Ite,
    Not,
    Var,
    VarDecl,
)
from .monitor import Monitor, MonitorTransition


def knock_monitor(n: int, inputs: tuple[str, ...] = ("knock",)) -> Monitor:
    """Flags on the n-th knock. The counter starts at 1."""
    counter = Var("counter")
    return Monitor(
        inputs=frozenset(inputs),
        vars=(VarDecl("counter", "int", 1),),
        states=frozenset({"watch", "hit", "stop"}),
        initial="watch",
        flagging=frozenset({"hit"}),
        sink="stop",
        transitions=(
            MonitorTransition(
                "watch",
                BoolOp("&", InEvent("knock"), Compare("!=", counter, IntLit(n))),
                (Assignment("counter", Arith("+", counter, IntLit(1))),),
                "watch",
            ),
            MonitorTransition(
                "watch",
                BoolOp("&", InEvent("knock"), Compare("==", counter, IntLit(n))),
                (),
                "hit",
            ),
        ),
    )


def averaging_monitor(n: int, inputs: tuple[str, ...] = ("e",)) -> Monitor:
    """Flags when the integer-division event rate eventsNo / stepsNo drops to n
    or below. Both counters start at 1 so the divisor is never zero."""
    rate = Arith("/", Var("eventsNo"), Var("stepsNo"))
    bump_both = (
        Assignment("eventsNo", Arith("+", Var("eventsNo"), IntLit(1))),
        Assignment("stepsNo", Arith("+", Var("stepsNo"), IntLit(1))),
    )
    bump_steps = (Assignment("stepsNo", Arith("+", Var("stepsNo"), IntLit(1))),)
    return Monitor(
        inputs=frozenset(inputs),
        vars=(VarDecl("eventsNo", "int", 1), VarDecl("stepsNo", "int", 1)),
        states=frozenset({"watch", "hit", "stop"}),
        initial="watch",
        flagging=frozenset({"hit"}),
        sink="stop",
        transitions=(
            MonitorTransition(
                "watch",
                BoolOp("&", InEvent("e"), Compare(">", rate, IntLit(n))),
                bump_both,
                "watch",
            ),
            MonitorTransition(
                "watch",
                BoolOp("&", Not(InEvent("e")), Compare(">", rate, IntLit(n))),
                bump_steps,
                "watch",
            ),
            MonitorTransition("watch", Compare("<=", rate, IntLit(n)), (), "hit"),
        ),
    )


def room_monitor(n: int, m: int, inputs: tuple[str, ...] = ("inUse", "isClean")) -> Monitor:
    """Flags once the room was in use for n steps and then empty for m steps."""
    in_use = InEvent("inUse")
    used_for = Var("inUseFor")
    unused = Var("unused")
    return Monitor(
        inputs=frozenset(inputs),
        vars=(VarDecl("inUseFor", "int", 1), VarDecl("unused", "int", 1)),
        states=frozenset({"used", "empty", "hit", "stop"}),
        initial="used",
        flagging=frozenset({"hit"}),
        sink="stop",
        transitions=(
            MonitorTransition(
                "used",
                BoolOp("&", in_use, Compare("<", used_for, IntLit(n))),
                (Assignment("inUseFor", Arith("+", used_for, IntLit(1))),),
                "used",
            ),
            MonitorTransition(
                "used",
                BoolOp("&", in_use, Compare(">=", used_for, IntLit(n))),
                (),
                "empty",
            ),
            MonitorTransition(
                "empty",
                BoolOp("&", Not(in_use), Compare("<", unused, IntLit(m))),
                (Assignment("unused", Arith("+", unused, IntLit(1))),),
                "empty",
            ),
            MonitorTransition("empty", in_use, (Assignment("unused", IntLit(1)),), "empty"),
            MonitorTransition(
                "empty",
                BoolOp("&", Not(in_use), Compare(">=", unused, IntLit(m))),
                (),
                "hit",
            ),
        ),
    )


def max_in_sequence(props: list[str], counter: Expr) -> Expr:
    """How far the counted prefix of `props` extends after this event.

    With counter = i the value is i when props[i] is absent, otherwise the
    largest j such that props[i..j-1] are all present. Built as one shared
    chain dispatched over the counter, so the DAG has O(len(props)) nodes.
    """
    n = len(props)
    chain: list[Expr] = [IntLit(n)] * (n + 1)
    for i in range(n - 1, -1, -1):
        chain[i] = Ite(InEvent(props[i]), chain[i + 1], IntLit(i))
    out: Expr = IntLit(n)
    for i in range(n - 1, -1, -1):
        out = Ite(Compare("==", counter, IntLit(i)), chain[i], out)
    return out


def bus_props(n: int, m: int) -> tuple[list[str], list[str]]:
    return [f"p{i}" for i in range(1, n + 1)], [f"q{i}" for i in range(1, m + 1)]


def two_bus_monitor(n: int, m: int) -> Monitor:
    """Flags when both buses have completed their ordered sequences
    p1..pn and q1..qm (events may carry several consecutive items at once)."""
    ps, qs = bus_props(n, m)
    max_p = max_in_sequence(ps, Var("pCount"))
    max_q = max_in_sequence(qs, Var("qCount"))
    done = BoolOp("&", Compare("==", max_p, IntLit(n)), Compare("==", max_q, IntLit(m)))
    not_done = BoolOp("|", Compare("!=", max_p, IntLit(n)), Compare("!=", max_q, IntLit(m)))
    return Monitor(
        inputs=frozenset(ps + qs),
        vars=(VarDecl("pCount", "int", 0), VarDecl("qCount", "int", 0)),
        states=frozenset({"watch", "hit", "stop"}),
        initial="watch",
        flagging=frozenset({"hit"}),
        sink="stop",
        transitions=(
            MonitorTransition("watch", done, (), "hit"),
            MonitorTransition(
                "watch",
                not_done,
                (Assignment("pCount", max_p), Assignment("qCount", max_q)),
                "watch",
            ),
        ),
    )


def expr_dag_size(e: Expr) -> int:
    """Count distinct nodes by identity; shared subtrees count once."""
    seen: set[int] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        for f in getattr(node, "__dataclass_fields__", {}):
            v = getattr(node, f)
            if hasattr(v, "__dataclass_fields__"):
                stack.append(v)
    return len(seen)


# ---------------------------------------------------------------------------
# Full trigger specifications built on the monitors above.

from .ltl import TT, parse_ltl
from .monitor import immediate_monitor
from .triggers import TriggerSpec


def knock_spec(n: int = 2) -> TriggerSpec:
    """After the n-th knock the door signal must stay on forever."""
    return TriggerSpec(
        name=f"knock-{n}",
        inputs=frozenset({"knock"}),
        outputs=frozenset({"open"}),
        assumption=TT,
        monitor=knock_monitor(n),
        repeating=False,
        body=parse_ltl("G open"),
    )


def averaging_spec(n: int = 0) -> TriggerSpec:
    """Keep the alert on after the event rate sinks to n or below."""
    return TriggerSpec(
        name=f"averaging-{n}",
        inputs=frozenset({"e"}),
        outputs=frozenset({"alert"}),
        assumption=TT,
        monitor=averaging_monitor(n),
        repeating=False,
        body=parse_ltl("G alert"),
    )


def room_spec(n: int = 2, m: int = 2) -> TriggerSpec:
    """Clean the room after it was used for n steps and empty for m.

    The environment owns inUse and isClean, the controller owns clean,
    inRoom and doorLocked. Sensing is assumed sound both ways: cleaning
    while locked in makes the room clean, and the room only reads clean
    if it was cleaned the step before.
    """
    assumption = parse_ltl(
        "G ((clean & doorLocked) -> X isClean) & G (X isClean -> clean)"
    )
    body = parse_ltl("F (isClean & X F !inRoom & X F !doorLocked)")
    return TriggerSpec(
        name=f"room-{n}-{m}",
        inputs=frozenset({"inUse", "isClean"}),
        outputs=frozenset({"clean", "inRoom", "doorLocked"}),
        assumption=assumption,
        monitor=room_monitor(n, m),
        repeating=True,
        body=body,
    )


def parity_even_spec() -> TriggerSpec:
    """Emit p exactly at the even positions 0, 2, 4, ..."""
    return TriggerSpec(
        name="parity-even",
        inputs=frozenset({"tick"}),
        outputs=frozenset({"p"}),
        assumption=TT,
        monitor=immediate_monitor(("tick",)),
        repeating=True,
        body=parse_ltl("p & X tt"),
    )


def parity_odd_spec() -> TriggerSpec:
    """Emit p exactly at the odd positions 1, 3, 5, ..."""
    return TriggerSpec(
        name="parity-odd",
        inputs=frozenset({"tick"}),
        outputs=frozenset({"p"}),
        assumption=TT,
        monitor=immediate_monitor(("tick",)),
        repeating=True,
        body=parse_ltl("X p"),
    )


def two_bus_spec(n: int, m: int) -> TriggerSpec:
    """Acknowledge every completion of both bus sequences."""
    ps, qs = bus_props(n, m)
    return TriggerSpec(
        name=f"two-bus-{n}-{m}",
        inputs=frozenset(ps + qs),
        outputs=frozenset({"ack"}),
        assumption=TT,
        monitor=two_bus_monitor(n, m),
        repeating=True,
        body=parse_ltl("ack"),
    )


def narrow_flag_spec() -> TriggerSpec:
    """A goal that is unrealisable in isolation but fine under its monitor.

    The goal forbids b outright, yet only events with a and without b ever
    flag, so always answering c wins. Synthesis that looks at the goal
    alone cannot see this.
    """
    monitor = Monitor(
        inputs=frozenset({"a", "b"}),
        vars=(),
        states=frozenset({"watch", "hit", "stop"}),
        initial="watch",
        flagging=frozenset({"hit"}),
        sink="stop",
        transitions=(
            MonitorTransition(
                "watch", BoolOp("&", InEvent("a"), Not(InEvent("b"))), (), "hit"
            ),
        ),
    )
    return TriggerSpec(
        name="narrow-flag",
        inputs=frozenset({"a", "b"}),
        outputs=frozenset({"c"}),
        assumption=TT,
        monitor=monitor,
        repeating=True,
        body=parse_ltl("(b -> ff) & (a -> c)"),
    )
