"""Synthesis of window controllers from co-safety goals.

The goal is compiled into a deterministic finite-window automaton whose
transitions are built from minimal obligation sets. A two-player game is
then solved over that automaton: the environment picks inputs, the
controller answers with outputs, and the controller wins by driving the
automaton into an accepting state or by catching the environment break a
step invariant of the assumption. The extracted strategy is a Mealy
machine that enters its accepting state exactly when the goal window
first closes, so every accepted window is tight by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .ltl import (
    FF,
    TT,
    Always,
    And,
    Ff,
    Formula,
    Implies,
    LtlError,
    Neg,
    Next,
    Or,
    Prop,
    Tt,
    Until,
    canonical,
    eval_finite,
    is_cosafety,
    normalize,
    propositions,
    subformulas,
)
from .triggers import TriggerSpec, validate_spec

UNREALISABLE_CAVEAT = (
    "no winning controller exists for the goal window treated in isolation; "
    "the full specification may still be realisable because the monitor "
    "only opens windows on the events it flags"
)


class ControllerError(Exception):
    """A controller is structurally unusable (incomplete, bad references)."""


# ---------------------------------------------------------------------------
# Deterministic finite-window automaton. States are antichains of
# obligation sets; an obligation set is discharged when it becomes empty,
# and acceptance is reaching a discharged set, which is absorbing.


_TRUE_MODELS = frozenset({frozenset()})
_NO_MODELS: frozenset = frozenset()


def _minimize(models: Iterable[frozenset]) -> frozenset:
    out: list[frozenset] = []
    for m in sorted(models, key=len):
        if not any(kept <= m for kept in out):
            out.append(m)
    return frozenset(out)


def _conj(a: frozenset, b: frozenset) -> frozenset:
    return _minimize({x | y for x in a for y in b})


def _moves(f: Formula, event: frozenset, cache: dict) -> frozenset:
    """Minimal ways to discharge one step of f on this event; each element
    is the set of obligations handed to the next position."""
    key = (f, event)
    got = cache.get(key)
    if got is not None:
        return got
    if isinstance(f, Tt):
        r = _TRUE_MODELS
    elif isinstance(f, Ff):
        r = _NO_MODELS
    elif isinstance(f, Prop):
        r = _TRUE_MODELS if f.name in event else _NO_MODELS
    elif isinstance(f, Neg) and isinstance(f.operand, Prop):
        r = _NO_MODELS if f.operand.name in event else _TRUE_MODELS
    elif isinstance(f, Next):
        r = frozenset({frozenset({f.operand})})
    elif isinstance(f, And):
        r = _conj(_moves(f.left, event, cache), _moves(f.right, event, cache))
    elif isinstance(f, Or):
        r = _minimize(_moves(f.left, event, cache) | _moves(f.right, event, cache))
    elif isinstance(f, Until):
        keep = _conj(_moves(f.left, event, cache), frozenset({frozenset({f})}))
        r = _minimize(_moves(f.right, event, cache) | keep)
    else:
        raise LtlError(f"{type(f).__name__} is not co-safety normal form")
    cache[key] = r
    return r


@dataclass(frozen=True)
class Dfw:
    props: tuple[str, ...]
    letters: tuple[frozenset, ...]
    initial: int
    accepting: frozenset[int]
    delta: tuple[tuple[int, ...], ...]

    @property
    def n_states(self) -> int:
        return len(self.delta)

    def letter(self, event: frozenset) -> int:
        idx = 0
        for i, p in enumerate(self.props):
            if p in event:
                idx |= 1 << i
        return idx


def build_dfw(body: Formula, props: Iterable[str]) -> Dfw:
    goal = canonical(normalize(body))
    prop_order = tuple(sorted(props))
    loose = propositions(goal) - set(prop_order)
    if loose:
        raise LtlError(f"goal mentions propositions outside the alphabet: {sorted(loose)}")
    letters = tuple(
        frozenset(p for i, p in enumerate(prop_order) if mask >> i & 1)
        for mask in range(1 << len(prop_order))
    )
    cache: dict = {}
    start = frozenset({frozenset({goal})})
    index: dict[frozenset, int] = {start: 0}
    order: list[frozenset] = [start]
    rows: list[tuple[int, ...]] = []
    at = 0
    while at < len(order):
        macro = order[at]
        row = []
        for event in letters:
            nxt: set = set()
            for obligations in macro:
                options = _TRUE_MODELS
                for q in obligations:
                    options = _conj(options, _moves(q, event, cache))
                    if not options:
                        break
                nxt |= options
            target = _minimize(nxt)
            j = index.get(target)
            if j is None:
                j = len(order)
                index[target] = j
                order.append(target)
            row.append(j)
        rows.append(tuple(row))
        at += 1
    accepting = frozenset(i for m, i in index.items() if frozenset() in m)
    return Dfw(prop_order, letters, 0, accepting, tuple(rows))


def dfw_accepts(dfw: Dfw, word: Sequence[frozenset]) -> bool:
    state = dfw.initial
    for event in word:
        state = dfw.delta[state][dfw.letter(event)]
    return state in dfw.accepting


# ---------------------------------------------------------------------------
# Mealy machines: explicit transition rows keyed by the full input
# valuation, with an optional per-state wildcard row used when no
# explicit row matches. Accepting states mark closed goal windows.


@dataclass(frozen=True)
class MealyMachine:
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    states: tuple[str, ...]
    initial: str
    accepting: frozenset[str]
    transitions: Mapping[tuple[str, frozenset], tuple[frozenset, str]]
    defaults: Mapping[str, tuple[frozenset, str]]


def mealy_step(mm: MealyMachine, state: str, inputs: frozenset) -> tuple[frozenset, str]:
    key = (state, frozenset(inputs) & frozenset(mm.inputs))
    hit = mm.transitions.get(key)
    if hit is None:
        hit = mm.defaults.get(state)
    if hit is None:
        raise ControllerError(f"no move from state '{state}' on inputs {sorted(inputs)}")
    return hit


def mealy_play(mm: MealyMachine, input_seq: Sequence[frozenset]) -> tuple[list[frozenset], int | None]:
    """Outputs per step and the index of the first accepting state entry."""
    state = mm.initial
    outs: list[frozenset] = []
    first: int | None = None
    for i, inputs in enumerate(input_seq):
        o, state = mealy_step(mm, state, inputs)
        outs.append(o)
        if first is None and state in mm.accepting:
            first = i
    return outs, first


def validate_mealy(mm: MealyMachine) -> list[str]:
    errors: list[str] = []
    states = set(mm.states)
    inputs = set(mm.inputs)
    outputs = set(mm.outputs)
    if mm.initial not in states:
        errors.append(f"initial state '{mm.initial}' not declared")
    for q in mm.accepting:
        if q not in states:
            errors.append(f"accepting state '{q}' not declared")
    covered: dict[str, set[frozenset]] = {q: set() for q in mm.states}
    for (q, valuation), (out, target) in mm.transitions.items():
        where = f"row ({q}, {sorted(valuation)})"
        if q not in states:
            errors.append(f"{where}: unknown source state")
            continue
        if not valuation <= inputs:
            errors.append(f"{where}: valuation mentions undeclared inputs")
        if not out <= outputs:
            errors.append(f"{where}: undeclared outputs {sorted(out - outputs)}")
        if target not in states:
            errors.append(f"{where}: unknown target state '{target}'")
        covered[q].add(valuation)
    for q, (out, target) in mm.defaults.items():
        if q not in states:
            errors.append(f"default row for unknown state '{q}'")
            continue
        if not out <= outputs:
            errors.append(f"default row of '{q}': undeclared outputs {sorted(out - outputs)}")
        if target not in states:
            errors.append(f"default row of '{q}': unknown target state '{target}'")
    for q in mm.states:
        if q in mm.defaults:
            continue
        want = 1 << len(mm.inputs)
        if len(mm.inputs) > 16:
            errors.append(
                f"state '{q}' has no wildcard row and {len(mm.inputs)} inputs; "
                "explicit completeness is not checkable at this size"
            )
        elif len(covered[q]) < want:
            errors.append(
                f"state '{q}' covers {len(covered[q])} of {want} input valuations "
                "and has no wildcard row"
            )
    return errors


# ---------------------------------------------------------------------------
# Assumption step checks. Only invariant conjuncts can be breached during
# a finite play; recurrence conjuncts never fail on a finite prefix and
# are left to the trace oracle.


def split_assumption(f: Formula) -> tuple[list[Formula], list[Formula]]:
    """Invariant step conjuncts and recurrence conjuncts, after normalization."""
    steps: list[Formula] = []
    fairs: list[Formula] = []

    def walk(g: Formula) -> None:
        if isinstance(g, Tt):
            return
        if isinstance(g, And):
            walk(g.left)
            walk(g.right)
            return
        if isinstance(g, Always):
            inner = g.operand
            if isinstance(inner, Until) and isinstance(inner.left, Tt):
                fairs.append(inner.right)
            else:
                steps.append(inner)
            return
        raise LtlError("assumption must be tt or conjunctions of invariant/recurrence terms")

    walk(normalize(f))
    return steps, fairs


def _optimistic(f: Formula, pos: bool = True) -> Formula:
    """Replace next-step reads by the value that keeps f satisfiable, so a
    single event can be checked before its successor is known."""
    if isinstance(f, Next):
        return TT if pos else FF
    if isinstance(f, Neg):
        return Neg(_optimistic(f.operand, not pos))
    if isinstance(f, (And, Or)):
        return type(f)(_optimistic(f.left, pos), _optimistic(f.right, pos))
    return f


class _StepChecks:
    """Breach tables over the letter alphabet: solo_bad[E] means some
    invariant already fails on E alone, pair_bad[A][B] means some
    invariant fails on the two-event window A B."""

    def __init__(self, assumption: Formula, letters: Sequence[frozenset]):
        self.steps, self.fairs = split_assumption(assumption)
        solo = [_optimistic(b) for b in self.steps]
        self.solo_bad = tuple(
            any(not eval_finite(b, [e], 0, 0) for b in solo) for e in letters
        )
        self.pair_bad = tuple(
            tuple(
                any(not eval_finite(b, [a, e], 0, 1) for b in self.steps)
                for e in letters
            )
            for a in letters
        )


def _has_next(f: Formula) -> bool:
    return any(isinstance(g, Next) for g in subformulas(f))


# ---------------------------------------------------------------------------
# The reachability game and strategy extraction.

_NORMAL, _ACCEPT, _BREACH = 0, 1, 2


def synthesize(spec: TriggerSpec, max_nodes: int = 200_000) -> MealyMachine | None:
    """A winning controller for the goal window, or None if the window
    game is lost. Losing the window game does not always mean the full
    specification is unrealisable; see UNREALISABLE_CAVEAT."""
    errors = validate_spec(spec)
    if errors:
        raise ValueError("; ".join(errors))
    if not is_cosafety(spec.body):
        raise ValueError(
            "synthesis needs a co-safety goal; open-ended one-shot goals are check-only"
        )
    props = sorted(spec.inputs | spec.outputs)
    dfw = build_dfw(spec.body, props)
    checks = _StepChecks(spec.assumption, dfw.letters)
    track_prev = any(_has_next(b) for b in checks.steps)
    pos = {p: i for i, p in enumerate(dfw.props)}

    def mask(group: Iterable[str]) -> list[tuple[frozenset, int]]:
        names = sorted(group)
        out = []
        for bits in range(1 << len(names)):
            chosen = frozenset(n for i, n in enumerate(names) if bits >> i & 1)
            out.append((chosen, sum(1 << pos[n] for n in chosen)))
        return out

    in_moves = mask(spec.inputs)
    out_moves = mask(spec.outputs)
    # fewest outputs first (then name order), so strategy ties resolve to
    # the least set and the controller never emits more than it must
    out_moves.sort(key=lambda t: (len(t[0]), tuple(sorted(t[0]))))

    start = (dfw.initial, None)
    node_id: dict[tuple, int] = {start: 0}
    nodes: list[tuple] = [start]
    moves: list[list[list[tuple[int, int]]]] = []
    at = 0
    while at < len(nodes):
        d, prev = nodes[at]
        per_input: list[list[tuple[int, int]]] = []
        for _, imask in in_moves:
            per_output: list[tuple[int, int]] = []
            for _, omask in out_moves:
                letter = imask | omask
                breach = checks.solo_bad[letter] or (
                    prev is not None and checks.pair_bad[prev][letter]
                )
                target = dfw.delta[d][letter]
                if target in dfw.accepting:
                    per_output.append((_ACCEPT, -1))
                elif breach:
                    per_output.append((_BREACH, -1))
                else:
                    succ = (target, letter if track_prev else None)
                    j = node_id.get(succ)
                    if j is None:
                        j = len(nodes)
                        if j >= max_nodes:
                            raise ValueError("window game exceeds the node budget")
                        node_id[succ] = j
                        nodes.append(succ)
                    per_output.append((_NORMAL, j))
            per_input.append(per_output)
        moves.append(per_input)
        at += 1

    dist = [math.inf] * len(nodes)
    changed = True
    while changed:
        changed = False
        for n in range(len(nodes)):
            worst = 0.0
            for per_output in moves[n]:
                best = math.inf
                for kind, succ in per_output:
                    cost = 1.0 if kind != _NORMAL else 1.0 + dist[succ]
                    if cost < best:
                        best = cost
                worst = max(worst, best)
            if worst < dist[n]:
                dist[n] = worst
                changed = True

    if math.isinf(dist[0]):
        return None

    name_of: dict[int, str] = {0: "s0"}
    queue = [0]
    transitions: dict[tuple[str, frozenset], tuple[frozenset, str]] = {}
    seen = 0
    while seen < len(queue):
        n = queue[seen]
        seen += 1
        state = name_of[n]
        for (ival, _), per_output in zip(in_moves, moves[n]):
            best_cost = math.inf
            chosen: tuple[frozenset, int, int] | None = None
            for (oval, _), (kind, succ) in zip(out_moves, per_output):
                cost = 1.0 if kind != _NORMAL else 1.0 + dist[succ]
                if cost < best_cost:
                    best_cost = cost
                    chosen = (oval, kind, succ)
            assert chosen is not None
            oval, kind, succ = chosen
            if kind == _ACCEPT:
                target = "acc"
            elif kind == _BREACH:
                target = "halt"
            else:
                target = name_of.get(succ)
                if target is None:
                    target = f"s{len(name_of)}"
                    name_of[succ] = target
                    queue.append(succ)
            transitions[(state, ival)] = (oval, target)

    states = tuple(name_of[n] for n in queue) + ("acc", "halt")
    return MealyMachine(
        inputs=tuple(sorted(spec.inputs)),
        outputs=tuple(sorted(spec.outputs)),
        states=states,
        initial="s0",
        accepting=frozenset({"acc"}),
        transitions=transitions,
        defaults={"acc": (frozenset(), "halt"), "halt": (frozenset(), "halt")},
    )


# ---------------------------------------------------------------------------
# Disambiguation: split overlapping cases of a disjunctive goal into
# exclusive sign patterns and add a fresh witness proposition that must
# rise exactly once. The rewritten goal makes the chosen case and the
# closing moment observable; nothing downstream consumes it.


def disambiguate(body: Formula, reserved: Iterable[str] = ()) -> tuple[Formula, str]:
    parts: list[Formula] = []

    def walk(g: Formula) -> None:
        if isinstance(g, Or):
            walk(g.left)
            walk(g.right)
        else:
            parts.append(g)

    walk(body)
    if len(parts) > 6:
        raise ValueError("too many overlapping cases to disambiguate")
    used = propositions(body) | set(reserved)
    fresh = "w"
    k = 0
    while fresh in used:
        fresh = f"w{k}"
        k += 1
    w = Prop(fresh)

    patterns: list[Formula] = []
    for bits in range(1, 1 << len(parts)):
        lits = [p if bits >> i & 1 else Neg(p) for i, p in enumerate(parts)]
        conj = lits[0]
        for lit in lits[1:]:
            conj = And(conj, lit)
        patterns.append(conj)
    split = patterns[0]
    for p in patterns[1:]:
        split = Or(split, p)
    exactly_once = And(
        Until(Neg(w), w),
        Always(Implies(w, Next(Always(Neg(w))))),
    )
    return And(split, exactly_once), fresh
