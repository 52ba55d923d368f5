"""Symbolic monitors over events with typed variables and flagging states.

A monitor watches a stream of events (sets of input propositions). From an
ordinary state the first transition in declaration order whose guard holds
fires and updates the variables; if none is enabled the monitor stutters.
Entering a flagging state raises the flag for that event; afterwards the
monitor falls into the sink and never leaves. A run therefore flags at most
one position.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .expr import (
    BOOL,
    INT,
    Action,
    EvalError,
    Expr,
    InEvent,
    KindError,
    Value,
    VarDecl,
    apply_action,
    check_action,
    check_expr,
    compile_expr,
    eval_expr,
)


@dataclass(frozen=True)
class MonitorTransition:
    source: str
    guard: Expr
    action: Action
    target: str


@dataclass(frozen=True)
class Monitor:
    inputs: frozenset[str]
    vars: tuple[VarDecl, ...]
    states: frozenset[str]
    initial: str
    flagging: frozenset[str]
    sink: str
    transitions: tuple[MonitorTransition, ...]


@dataclass
class Configuration:
    state: str
    val: dict[str, Value]

    def copy(self) -> "Configuration":
        return Configuration(self.state, dict(self.val))


@dataclass(frozen=True)
class Flagged:
    """The event at `index` moved the monitor into a flagging state."""

    index: int


@dataclass(frozen=True)
class Dead:
    """An explicit transition entered the sink at `index`; no flag is possible."""

    index: int
    valuation: Mapping[str, Value] = field(hash=False, default_factory=dict)


@dataclass(frozen=True)
class Pending:
    """Trace exhausted without flagging or dying."""

    state: str
    valuation: Mapping[str, Value] = field(hash=False, default_factory=dict)


FlagResult = Flagged | Dead | Pending


def initial_valuation(m: Monitor) -> dict[str, Value]:
    return {d.name: d.initial for d in m.vars}


def initial_configuration(m: Monitor) -> Configuration:
    return Configuration(m.initial, initial_valuation(m))


def validate(m: Monitor) -> list[str]:
    """Structural and kind errors. An empty list means the monitor is usable."""
    errors: list[str] = []
    decls: dict[str, str] = {}
    for d in m.vars:
        if d.name in decls:
            errors.append(f"variable '{d.name}' declared twice")
        decls[d.name] = d.kind
        if d.kind == INT and (isinstance(d.initial, bool) or not isinstance(d.initial, int)):
            errors.append(f"variable '{d.name}' is int but starts at {d.initial!r}")
        elif d.kind == BOOL and not isinstance(d.initial, bool):
            errors.append(f"variable '{d.name}' is bool but starts at {d.initial!r}")
        elif d.kind not in (INT, BOOL):
            errors.append(f"variable '{d.name}' has unknown kind '{d.kind}'")

    if m.initial not in m.states:
        errors.append(f"initial state '{m.initial}' not declared")
    if m.sink not in m.states:
        errors.append(f"sink state '{m.sink}' not declared")
    if m.initial in m.flagging:
        errors.append("initial state cannot be a flagging state")
    if m.sink in m.flagging:
        errors.append("sink cannot be a flagging state")
    if m.initial == m.sink:
        errors.append("initial state cannot be the sink")
    for q in m.flagging:
        if q not in m.states:
            errors.append(f"flagging state '{q}' not declared")

    for i, t in enumerate(m.transitions):
        where = f"transition {i} ({t.source} -> {t.target})"
        if t.source not in m.states:
            errors.append(f"{where}: unknown source state")
        if t.target not in m.states:
            errors.append(f"{where}: unknown target state")
        if t.source == m.sink:
            errors.append(f"{where}: the sink has no outgoing transitions")
        try:
            if check_expr(t.guard, decls) != BOOL:
                errors.append(f"{where}: guard is not boolean")
        except KindError as exc:
            errors.append(f"{where}: {exc}")
        try:
            check_action(t.action, decls)
        except KindError as exc:
            errors.append(f"{where}: {exc}")
        for p in sorted(_props_of(t.guard) | _props_of_action(t.action)):
            if p not in m.inputs:
                errors.append(f"{where}: proposition '{p}' is not a declared input")
    return errors


def _props_of(e: Expr) -> set[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, InEvent):
            out.add(n.prop)
        for f in getattr(n, "__dataclass_fields__", {}):
            v = getattr(n, f)
            if hasattr(v, "__dataclass_fields__"):
                stack.append(v)
    return out


def _props_of_action(action: Action) -> set[str]:
    out: set[str] = set()
    for a in action:
        out |= _props_of(a.value)
    return out


def step(m: Monitor, config: Configuration, event: frozenset[str] | set[str]) -> Configuration:
    """One event. Flagging states fall into the sink; the sink absorbs;
    otherwise the first enabled transition fires, else the monitor stutters."""
    if config.state in m.flagging:
        return Configuration(m.sink, dict(config.val))
    if config.state == m.sink:
        return config.copy()
    for t in m.transitions:
        if t.source != config.state:
            continue
        if eval_expr(t.guard, event, config.val):
            return Configuration(t.target, apply_action(t.action, event, config.val))
    return config.copy()


def run(m: Monitor, trace: Sequence[frozenset[str] | set[str]]) -> FlagResult:
    c = initial_configuration(m)
    for i, event in enumerate(trace):
        extra = set(event) - set(m.inputs)
        if extra:
            raise EvalError(f"event {i} mentions undeclared inputs {sorted(extra)}")
        c = step(m, c, event)
        if c.state in m.flagging:
            return Flagged(i)
        if c.state == m.sink:
            return Dead(i, dict(c.val))
    return Pending(c.state, dict(c.val))


def immediate_monitor(inputs: Iterable[str]) -> Monitor:
    """Monitor that flags on the very first event, whatever it is."""
    from .expr import BoolLit

    return Monitor(
        inputs=frozenset(inputs),
        vars=(),
        states=frozenset({"watch", "hit", "stop"}),
        initial="watch",
        flagging=frozenset({"hit"}),
        sink="stop",
        transitions=(MonitorTransition("watch", BoolLit(True), (), "hit"),),
    )


# ---------------------------------------------------------------------------
# Lints. Overlapping guards are legal (first match wins) but usually a
# mistake, so sample configurations and warn; same for a divisor that is
# zero under the initial valuation.


def lint(m: Monitor, samples: int = 200, seed: int = 0) -> list[str]:
    warnings: list[str] = []
    rng = random.Random(seed)
    by_state: dict[str, list[tuple[int, MonitorTransition]]] = {}
    for i, t in enumerate(m.transitions):
        by_state.setdefault(t.source, []).append((i, t))
        if t.source in m.flagging:
            warnings.append(
                f"transition {i} leaves flagging state '{t.source}' and can never fire"
            )

    pool = _int_pool(m)
    props = sorted(m.inputs)
    overlap_seen: set[tuple[int, int]] = set()
    for _ in range(samples):
        event = frozenset(p for p in props if rng.random() < 0.5)
        val = {
            d.name: (rng.choice(pool) if d.kind == INT else rng.random() < 0.5)
            for d in m.vars
        }
        for state, items in by_state.items():
            if state in m.flagging or state == m.sink:
                continue
            enabled = []
            for i, t in items:
                try:
                    if eval_expr(t.guard, event, val):
                        enabled.append(i)
                except EvalError:
                    pass
            for a, b in zip(enabled, enabled[1:]):
                if (a, b) not in overlap_seen:
                    overlap_seen.add((a, b))
                    warnings.append(
                        f"guards of transitions {a} and {b} from '{state}' overlap; "
                        f"the first declared wins"
                    )

    theta0 = initial_valuation(m)
    for i, t in enumerate(m.transitions):
        if t.source != m.initial:
            continue
        for div in _divisors(t.guard):
            for event in _probe_events(props):
                try:
                    if eval_expr(div, event, theta0) == 0:
                        warnings.append(
                            f"transition {i}: divisor can be zero under the initial valuation"
                        )
                        break
                except EvalError:
                    pass
            else:
                continue
            break
    return warnings


def _int_pool(m: Monitor) -> list[int]:
    pool = {-2, -1, 0, 1, 2}
    stack: list = [t.guard for t in m.transitions]
    stack += [a.value for t in m.transitions for a in t.action]
    while stack:
        n = stack.pop()
        if type(n).__name__ == "IntLit":
            pool.update({n.value - 1, n.value, n.value + 1})
        for f in getattr(n, "__dataclass_fields__", {}):
            v = getattr(n, f)
            if hasattr(v, "__dataclass_fields__"):
                stack.append(v)
    return sorted(pool)


def _divisors(e: Expr) -> list[Expr]:
    out = []
    stack = [e]
    while stack:
        n = stack.pop()
        if type(n).__name__ == "Arith" and n.op == "/":
            out.append(n.right)
        for f in getattr(n, "__dataclass_fields__", {}):
            v = getattr(n, f)
            if hasattr(v, "__dataclass_fields__"):
                stack.append(v)
    return out


def _probe_events(props: list[str]) -> list[frozenset[str]]:
    events = [frozenset()]
    events += [frozenset({p}) for p in props]
    if props:
        events.append(frozenset(props))
    return events


# ---------------------------------------------------------------------------
# Compiled execution. Same semantics as step/run, with guards and actions
# turned into closures once per monitor. The randomized suites re-run
# monitors hundreds of thousands of times; this path keeps them fast.


class CompiledMonitor:
    def __init__(self, m: Monitor):
        self.monitor = m
        self.var_order = tuple(d.name for d in m.vars)
        self.initial_val = initial_valuation(m)
        self.flagging = m.flagging
        self.sink = m.sink
        self.initial = m.initial
        table: dict[str, list] = {q: [] for q in m.states}
        for t in m.transitions:
            guard_fn = compile_expr(t.guard)
            action_fns = tuple((a.target, compile_expr(a.value)) for a in t.action)
            table[t.source].append((guard_fn, action_fns, t.target))
        self.table = table

    def step(self, state: str, val: dict, event: frozenset[str]) -> tuple[str, dict]:
        if state in self.flagging:
            return self.sink, val
        if state == self.sink:
            return state, val
        for guard_fn, action_fns, target in self.table[state]:
            if guard_fn(event, val):
                if action_fns:
                    new = dict(val)
                    for name, fn in action_fns:
                        new[name] = fn(event, val)
                    return target, new
                return target, val
        return state, val

    def run(self, trace: Sequence[frozenset[str]]) -> FlagResult:
        state = self.initial
        val = self.initial_val
        flagging = self.flagging
        sink = self.sink
        step = self.step
        for i, event in enumerate(trace):
            state, val = step(state, val, event)
            if state in flagging:
                return Flagged(i)
            if state == sink:
                return Dead(i, dict(val))
        return Pending(state, dict(val))

    def frozen_val(self, val: dict) -> tuple:
        return tuple(val[k] for k in self.var_order)
