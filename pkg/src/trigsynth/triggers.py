"""Trigger specifications and the trace-level verdict oracle.

A trigger specification couples an environment assumption, a flagging
monitor over the inputs, and a temporal goal over inputs and outputs.
The monitor watches the trace; the event that makes it flag also opens
the goal. In one-shot mode the goal must hold on the whole suffix from
the flag. In repeating mode the goal must close on a tight finite window
starting at the flag, and the monitor restarts on the next event.

`oracle` decides an ultimately periodic trace by explicit exploration
with cycle detection, falling back to an honest `unknown` verdict when
the step bound runs out before a cycle closes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ltl import (
    FF,
    Formula,
    Implies,
    LassoTrace,
    canonical,
    eval_finite,
    eval_lasso,
    is_cosafety,
    is_valid_assumption,
    normalize,
    progress,
    propositions,
)
from .monitor import CompiledMonitor, Monitor
from .monitor import validate as validate_monitor

SAT = "sat"
UNSAT = "unsat"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class TriggerSpec:
    """Assumption, flagging monitor, trigger mode, and goal body."""

    name: str
    inputs: frozenset[str]
    outputs: frozenset[str]
    assumption: Formula
    monitor: Monitor
    repeating: bool
    body: Formula


@dataclass(frozen=True)
class Verdict:
    """Outcome of checking one trace against a trigger specification.

    `flags` lists the monitor flag positions the oracle examined, in
    order. In repeating mode `windows` pairs each flag with the end of
    its tight goal window. `reason` is a short human explanation.
    """

    status: str
    flags: tuple[int, ...] = ()
    windows: tuple[tuple[int, int], ...] = ()
    reason: str = ""


def alphabet(spec: TriggerSpec) -> frozenset[str]:
    return spec.inputs | spec.outputs


def validate_spec(spec: TriggerSpec) -> list[str]:
    """All structural errors at once; an empty list means usable."""
    errors = [f"monitor: {e}" for e in validate_monitor(spec.monitor)]
    shared = spec.inputs & spec.outputs
    if shared:
        errors.append(f"propositions {sorted(shared)} are both inputs and outputs")
    if not spec.outputs:
        errors.append("at least one output proposition is required")
    if not spec.monitor.inputs <= spec.inputs:
        extra = sorted(spec.monitor.inputs - spec.inputs)
        errors.append(f"monitor reads undeclared inputs {extra}")
    sigma = spec.inputs | spec.outputs
    loose = sorted(propositions(spec.assumption) - sigma)
    if loose:
        errors.append(f"assumption mentions undeclared propositions {loose}")
    loose = sorted(propositions(spec.body) - sigma)
    if loose:
        errors.append(f"goal mentions undeclared propositions {loose}")
    if not is_valid_assumption(spec.assumption):
        errors.append(
            "assumption must be tt or a conjunction of step invariants "
            "and recurring step goals"
        )
    if spec.repeating and not is_cosafety(spec.body):
        errors.append("a repeating trigger needs a co-safety goal")
    return errors


def reduced_formula(spec: TriggerSpec) -> Formula:
    """The plain temporal formula `assumption -> goal`, dropping the monitor.

    This is only an approximation of the trigger spec: it ignores both
    when the monitor flags and the tight-window reading of repeating
    triggers. It exists for comparison against formula-based tools.
    """
    return Implies(spec.assumption, spec.body)


def default_bound(m: Monitor, trace: LassoTrace) -> int:
    """Enough steps for every variable-free monitor to cycle or die."""
    return 64 + trace.positions * (len(m.states) + 2) * len(trace.loop)


def oracle(spec: TriggerSpec, trace: LassoTrace, bound: int | None = None) -> Verdict:
    sigma = alphabet(spec)
    for k in range(trace.positions):
        extra = trace.event(k) - sigma
        if extra:
            raise ValueError(f"trace event {k} mentions unknown propositions {sorted(extra)}")
    if bound is None:
        bound = default_bound(spec.monitor, trace)
    if not eval_lasso(spec.assumption, trace):
        return Verdict(SAT, reason="environment assumption fails on this trace; satisfied vacuously")
    if spec.repeating:
        return oracle_repeat(spec.monitor, spec.body, trace, bound)
    return oracle_once(spec.monitor, spec.body, trace, bound)


def oracle_once(monitor: Monitor, body: Formula, trace: LassoTrace, bound: int) -> Verdict:
    """One-shot mode: the goal must hold on the suffix from the flag on."""
    cm = CompiledMonitor(monitor)
    mon_inputs = monitor.inputs
    state, val = cm.initial, cm.initial_val
    seen: set[tuple] = set()
    first_loop = len(trace.prefix)
    p = 0
    while p <= bound:
        if p >= first_loop:
            key = (trace.norm(p), state, cm.frozen_val(val))
            if key in seen:
                return Verdict(SAT, reason="the monitor never flags on this trace")
            seen.add(key)
        state, val = cm.step(state, val, trace.event(p) & mon_inputs)
        if state in cm.flagging:
            if eval_lasso(body, trace.shift(p)):
                return Verdict(SAT, flags=(p,), reason=f"flag at {p}; the goal holds from there on")
            return Verdict(UNSAT, flags=(p,), reason=f"flag at {p}; the goal fails from there on")
        if state == cm.sink:
            return Verdict(SAT, reason=f"monitor died at {p}; no flag is possible")
        p += 1
    return Verdict(UNKNOWN, reason=f"monitor undecided after {bound} events")


def oracle_repeat(monitor: Monitor, body: Formula, trace: LassoTrace, bound: int) -> Verdict:
    """Repeating mode: tight goal windows, monitor restart after each one.

    Each segment runs a fresh monitor from the segment start. A flag at j
    opens a window; the goal residual is progressed event by event until
    the remaining obligation holds on a single event, which closes the
    window tightly. The next segment starts right after the window.

    Three cycle checks make periodic behaviour terminate without the
    bound: repeated segment-start phases prove satisfaction, a repeated
    (phase, monitor configuration) pair inside a segment proves the
    monitor silent, and a repeated (phase, residual) pair inside a
    window scan proves the goal can never close.
    """
    cm = CompiledMonitor(monitor)
    mon_inputs = monitor.inputs
    goal = canonical(normalize(body))
    first_loop = len(trace.prefix)
    flags: list[int] = []
    windows: list[tuple[int, int]] = []
    seg_phases: set[int] = set()
    s = 0
    while s <= bound:
        if s >= first_loop:
            phase = trace.norm(s)
            if phase in seg_phases:
                return Verdict(
                    SAT,
                    tuple(flags),
                    tuple(windows),
                    "segment structure repeats; every trigger closes tightly",
                )
            seg_phases.add(phase)

        state, val = cm.initial, cm.initial_val
        seen: set[tuple] = set()
        p = s
        flagged_at = -1
        while True:
            if p > bound:
                return Verdict(UNKNOWN, tuple(flags), tuple(windows), f"monitor undecided after {bound} events")
            if p >= first_loop:
                key = (trace.norm(p), state, cm.frozen_val(val))
                if key in seen:
                    return Verdict(
                        SAT,
                        tuple(flags),
                        tuple(windows),
                        "the monitor falls silent; the trailing segment never triggers",
                    )
                seen.add(key)
            state, val = cm.step(state, val, trace.event(p) & mon_inputs)
            if state in cm.flagging:
                flagged_at = p
                break
            if state == cm.sink:
                return Verdict(SAT, tuple(flags), tuple(windows), f"monitor died at {p}; no further flags")
            p += 1
        flags.append(flagged_at)

        residual = goal
        res_seen: set[tuple[int, Formula]] = set()
        k = flagged_at
        end = -1
        while k <= bound:
            event = trace.event(k)
            if eval_finite(residual, [event], 0, 0):
                end = k
                break
            residual = canonical(progress(residual, event))
            if residual == FF:
                return Verdict(
                    UNSAT,
                    tuple(flags),
                    tuple(windows),
                    f"no window starting at flag {flagged_at} can satisfy the goal",
                )
            if k + 1 >= first_loop:
                rkey = (trace.norm(k + 1), residual)
                if rkey in res_seen:
                    return Verdict(
                        UNSAT,
                        tuple(flags),
                        tuple(windows),
                        f"goal obligations from flag {flagged_at} cycle without closing",
                    )
                res_seen.add(rkey)
            k += 1
        if end < 0:
            return Verdict(UNKNOWN, tuple(flags), tuple(windows), f"witness search undecided after {bound} events")
        windows.append((flagged_at, end))
        s = end + 1
    return Verdict(UNKNOWN, tuple(flags), tuple(windows), f"segment restarts exhausted the bound of {bound}")
