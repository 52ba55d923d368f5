"""Composition of flagging monitors with window controllers.

The composed artifact is a single symbolic machine over the input
propositions: guarded transitions with variable updates and output sets.
Monitor transitions keep their guards and actions and emit nothing; the
transitions into flagging states are fused with the controller's initial
moves, so the flag event itself already carries the controller's first
outputs. In repeating mode every transition into an accepting controller
state is redirected back to the monitor's initial location and resets
the variables, which restarts the cycle right after a window closes.

`verify_against_oracle` closes the loop: it drives the composed machine
with assumption-respecting random inputs, bends each run into a lasso at
a repeated configuration, and asks the trace oracle for its verdict.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .expr import (
    Action,
    Assignment,
    BoolLit,
    BoolOp,
    Expr,
    InEvent,
    IntLit,
    Not,
    Value,
    VarDecl,
    compile_expr,
)
from .ltl import LassoTrace, eval_finite, eval_lasso
from .synth import ControllerError, MealyMachine, _optimistic, split_assumption, validate_mealy
from .triggers import SAT, UNKNOWN, UNSAT, TriggerSpec, Verdict, oracle


@dataclass(frozen=True)
class ControllerTransition:
    source: str
    guard: Expr
    action: Action
    outputs: frozenset[str]
    target: str
    fires_trigger: bool = False
    resets: bool = False


@dataclass(frozen=True)
class SymbolicController:
    """Executable composition: Mealy-style, first enabled transition wins,
    stuttering (no outputs, no updates) when no guard matches."""

    inputs: frozenset[str]
    outputs: frozenset[str]
    vars: tuple[VarDecl, ...]
    states: tuple[str, ...]
    initial: str
    transitions: tuple[ControllerTransition, ...]


def _and_fold(parts: Sequence[Expr]) -> Expr:
    if not parts:
        return BoolLit(True)
    out = parts[0]
    for p in parts[1:]:
        out = BoolOp("&", out, p)
    return out


def _or_fold(parts: Sequence[Expr]) -> Expr:
    out = parts[0]
    for p in parts[1:]:
        out = BoolOp("|", out, p)
    return out


def _valuation_guard(valuation: frozenset, in_order: Sequence[str]) -> Expr:
    lits: list[Expr] = []
    for p in in_order:
        lits.append(InEvent(p) if p in valuation else Not(InEvent(p)))
    return _and_fold(lits)


def _rows_of(machine: MealyMachine, state: str):
    """Explicit rows of one controller state, grouped by (outputs, target),
    plus the wildcard row if present. Groups come back in a stable order."""
    groups: dict[tuple, list[frozenset]] = {}
    for (q, valuation), (out, target) in machine.transitions.items():
        if q == state:
            groups.setdefault((out, target), []).append(valuation)
    ordered = sorted(
        groups.items(), key=lambda kv: (tuple(sorted(kv[0][0])), kv[0][1])
    )
    return ordered, machine.defaults.get(state)


def _group_guard(valuations: list[frozenset], in_order: Sequence[str]) -> Expr:
    if len(valuations) == 1 << len(in_order):
        return BoolLit(True)
    parts = [
        _valuation_guard(v, in_order)
        for v in sorted(valuations, key=lambda v: tuple(sorted(v)))
    ]
    return _or_fold(parts)


def _guard_and(base: Expr, extra: Expr) -> Expr:
    if isinstance(extra, BoolLit) and extra.value:
        return base
    if isinstance(base, BoolLit) and base.value:
        return extra
    return BoolOp("&", base, extra)


def compose(spec: TriggerSpec, machine: MealyMachine) -> SymbolicController:
    problems = validate_mealy(machine)
    if problems:
        raise ControllerError("; ".join(problems))
    m = spec.monitor
    in_order = sorted(spec.inputs)
    reset_action: Action = tuple(
        Assignment(d.name, IntLit(d.initial) if d.kind == "int" else BoolLit(d.initial))
        for d in m.vars
    )

    def mon(q: str) -> str:
        return f"mon_{q}"

    def ctl(s: str) -> str:
        return f"ctl_{s}"

    def redirect(target: str, action: Action, outputs: frozenset, source: str, guard: Expr, fires: bool) -> ControllerTransition:
        if spec.repeating and target in accepting_names:
            return ControllerTransition(source, guard, reset_action, outputs, mon(m.initial), fires, True)
        return ControllerTransition(source, guard, action, outputs, target, fires, False)

    accepting_names = {ctl(s) for s in machine.accepting}
    transitions: list[ControllerTransition] = []

    init_rows, init_default = _rows_of(machine, machine.initial)
    for t in m.transitions:
        if t.target not in m.flagging:
            transitions.append(
                ControllerTransition(mon(t.source), t.guard, t.action, frozenset(), mon(t.target))
            )
            continue
        explicit_guards: list[Expr] = []
        for (out, target), valuations in init_rows:
            constraint = _group_guard(valuations, in_order)
            if not (isinstance(constraint, BoolLit) and constraint.value):
                explicit_guards.append(constraint)
            transitions.append(
                redirect(ctl(target), t.action, out, mon(t.source), _guard_and(t.guard, constraint), True)
            )
        if init_default is not None:
            out, target = init_default
            if explicit_guards:
                constraint = Not(_or_fold(explicit_guards))
                guard = _guard_and(t.guard, constraint)
            elif init_rows:
                # explicit rows already cover every valuation
                guard = None
            else:
                guard = t.guard
            if guard is not None:
                transitions.append(redirect(ctl(target), t.action, out, mon(t.source), guard, True))

    for s in machine.states:
        rows, default = _rows_of(machine, s)
        explicit_guards = []
        for (out, target), valuations in rows:
            constraint = _group_guard(valuations, in_order)
            if not (isinstance(constraint, BoolLit) and constraint.value):
                explicit_guards.append(constraint)
            transitions.append(redirect(ctl(target), (), out, ctl(s), constraint, False))
        if default is not None:
            out, target = default
            if explicit_guards:
                transitions.append(
                    redirect(ctl(target), (), out, ctl(s), Not(_or_fold(explicit_guards)), False)
                )
            elif not rows:
                transitions.append(redirect(ctl(target), (), out, ctl(s), BoolLit(True), False))

    # prune anything the initial location cannot reach
    initial = mon(m.initial)
    by_source: dict[str, list[ControllerTransition]] = {}
    for t in transitions:
        by_source.setdefault(t.source, []).append(t)
    order: list[str] = [initial]
    reached = {initial}
    at = 0
    while at < len(order):
        for t in by_source.get(order[at], ()):
            if t.target not in reached:
                reached.add(t.target)
                order.append(t.target)
        at += 1
    kept = tuple(t for t in transitions if t.source in reached)

    return SymbolicController(
        inputs=frozenset(spec.inputs),
        outputs=frozenset(spec.outputs),
        vars=m.vars,
        states=tuple(order),
        initial=initial,
        transitions=kept,
    )


# ---------------------------------------------------------------------------
# Execution.


@dataclass(frozen=True)
class StepRecord:
    inputs: frozenset
    outputs: frozenset
    state: str
    fires_trigger: bool
    resets: bool


class CompiledController:
    def __init__(self, sc: SymbolicController):
        self.controller = sc
        self.var_order = tuple(d.name for d in sc.vars)
        self.initial = sc.initial
        self.initial_val: dict[str, Value] = {d.name: d.initial for d in sc.vars}
        table: dict[str, list] = {q: [] for q in sc.states}
        for t in sc.transitions:
            guard_fn = compile_expr(t.guard)
            action_fns = tuple((a.target, compile_expr(a.value)) for a in t.action)
            table[t.source].append((guard_fn, action_fns, t.outputs, t.target, t.fires_trigger, t.resets))
        self.table = table

    def step(self, state: str, val: dict, inputs: frozenset):
        for guard_fn, action_fns, outputs, target, fires, resets in self.table[state]:
            if guard_fn(inputs, val):
                if action_fns:
                    new = dict(val)
                    for name, fn in action_fns:
                        new[name] = fn(inputs, val)
                    return outputs, target, new, fires, resets
                return outputs, target, val, fires, resets
        return frozenset(), state, val, False, False

    def frozen_val(self, val: dict) -> tuple:
        return tuple(val[k] for k in self.var_order)


def run_controller(sc: SymbolicController, input_seq: Sequence[frozenset]) -> list[StepRecord]:
    cc = CompiledController(sc)
    state, val = cc.initial, cc.initial_val
    out: list[StepRecord] = []
    for inputs in input_seq:
        inputs = frozenset(inputs) & sc.inputs
        outputs, state, val, fires, resets = cc.step(state, val, inputs)
        out.append(StepRecord(inputs, outputs, state, fires, resets))
    return out


# ---------------------------------------------------------------------------
# Closed-loop verification.


@dataclass
class VerificationReport:
    episodes: int = 0
    closed: int = 0
    open: int = 0
    sat: int = 0
    unsat: int = 0
    unknown: int = 0
    vacuous: int = 0
    counterexamples: list = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return self.unsat == 0 and self.unknown == 0


def verify_against_oracle(
    spec: TriggerSpec,
    controller: SymbolicController,
    episodes: int = 100,
    horizon: int = 40,
    seed: int = 0,
    episode_retries: int = 20,
) -> VerificationReport:
    """Drive the composed controller with random assumption-respecting
    inputs, close each run into a lasso at a repeated configuration, and
    judge the resulting trace with the oracle."""
    cc = CompiledController(controller)
    rng = random.Random(seed)
    in_order = sorted(spec.inputs)
    steps, _fairs = split_assumption(spec.assumption)
    solo = [_optimistic(b) for b in steps]
    report = VerificationReport()

    def event_ok(prev: frozenset | None, cur: frozenset) -> bool:
        for b in solo:
            if not eval_finite(b, [cur], 0, 0):
                return False
        if prev is not None:
            for b in steps:
                if not eval_finite(b, [prev, cur], 0, 1):
                    return False
        return True

    for _ in range(episodes):
        report.episodes += 1
        lasso = None
        for _attempt in range(episode_retries):
            state, val = cc.initial, cc.initial_val
            events: list[frozenset] = []
            seen = {(state, cc.frozen_val(val)): 0}
            prev: frozenset | None = None
            closed_at = None
            for _t in range(horizon):
                picked = None
                for _try in range(50):
                    inputs = frozenset(p for p in in_order if rng.random() < 0.5)
                    outputs, state2, val2, _fi, _rs = cc.step(state, val, inputs)
                    event = inputs | outputs
                    if event_ok(prev, event):
                        picked = (event, state2, val2)
                        break
                if picked is None:
                    break  # sampling got stuck; retry the episode
                event, state, val = picked
                events.append(event)
                prev = event
                key = (state, cc.frozen_val(val))
                if key in seen:
                    closed_at = seen[key]
                    break
                seen[key] = len(events)
            if closed_at is None:
                continue
            candidate = LassoTrace(tuple(events[:closed_at]), tuple(events[closed_at:]))
            if not eval_lasso(spec.assumption, candidate):
                lasso = lasso or candidate  # keep one in case every retry is vacuous
                continue
            lasso = candidate
            break
        if lasso is None:
            report.open += 1
            continue
        report.closed += 1
        verdict = oracle(spec, lasso)
        if verdict.status == SAT:
            report.sat += 1
            if "vacuously" in verdict.reason:
                report.vacuous += 1
        elif verdict.status == UNSAT:
            report.unsat += 1
            if len(report.counterexamples) < 5:
                report.counterexamples.append((lasso, verdict))
        else:
            report.unknown += 1
            if len(report.counterexamples) < 5:
                report.counterexamples.append((lasso, verdict))
    return report
