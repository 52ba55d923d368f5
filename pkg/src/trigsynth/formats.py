"""Textual formats: spec files, lasso traces, controller files, DOT export.

Grammar and JSON layouts are documented in docs/FORMATS.md. Parse errors
carry 1-based line and column positions. Every serializer in this module is
deterministic: equal objects produce byte-identical text, so exported files
can be compared directly.
"""

from __future__ import annotations

import json
import re
from typing import Mapping

from .compose import ControllerTransition, SymbolicController
from .expr import (
    Action,
    Arith,
    Assignment,
    BoolLit,
    BoolOp,
    Compare,
    Expr,
    InEvent,
    IntLit,
    Ite,
    Not,
    Value,
    Var,
    VarDecl,
    to_text,
)
from .ltl import TT, LassoTrace, LtlError, parse_ltl
from .ltl import to_text as ltl_to_text
from .monitor import Monitor, MonitorTransition
from .synth import MealyMachine, validate_mealy
from .triggers import TriggerSpec

MEALY_KIND = "mealy-controller"
CONTROLLER_KIND = "symbolic-controller"
WILDCARD = "*"


class FormatError(Exception):
    """Base class for everything this module rejects."""


class SpecParseError(FormatError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


class TraceFormatError(FormatError):
    pass


class InterchangeError(FormatError):
    pass


def _linecol(src: str, off: int) -> tuple[int, int]:
    off = max(0, min(off, len(src)))
    line = src.count("\n", 0, off) + 1
    col = off - (src.rfind("\n", 0, off) + 1) + 1
    return line, col


def _err_at(src: str, off: int, msg: str) -> SpecParseError:
    line, col = _linecol(src, off)
    return SpecParseError(msg, line, col)


def _blank_comments(text: str) -> str:
    """Replace # comments with spaces so every offset stays valid."""
    return re.sub(r"#[^\n]*", lambda m: " " * len(m.group()), text)


# ---------------------------------------------------------------------------
# Expression fragments. The same little language appears in guard brackets,
# action braces, and controller files; precedence and parenthesization match
# expr.to_text exactly, which is what makes round-trips work.

_EXPR_TOKEN = re.compile(r":=|==|!=|<=|>=|[A-Za-z_][A-Za-z0-9_]*|\d+|[-+*/<>!&|(),]")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")


class _ExprParser:
    """Recursive descent over one fragment of a larger source text.

    `base` is the fragment's offset inside `src`, so errors point at the
    real file position. `params` maps spec parameters to the integer
    literals they substitute.
    """

    def __init__(self, text: str, base: int, src: str, params: Mapping[str, int]):
        self.src = src
        self.base = base
        self.params = params
        self.toks: list[tuple[str, int]] = []
        self.i = 0
        pos, n = 0, len(text)
        while True:
            while pos < n and text[pos] in " \t\r\n":
                pos += 1
            if pos >= n:
                break
            m = _EXPR_TOKEN.match(text, pos)
            if m is None:
                raise _err_at(src, base + pos, f"unexpected character {text[pos]!r}")
            self.toks.append((m.group(), pos))
            pos = m.end()

    def peek(self) -> str | None:
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def take(self) -> str:
        tok = self.toks[self.i][0]
        self.i += 1
        return tok

    def err(self, msg: str) -> SpecParseError:
        if self.i < len(self.toks):
            off = self.toks[self.i][1]
        elif self.toks:
            off = self.toks[-1][1] + len(self.toks[-1][0])
        else:
            off = 0
        return _err_at(self.src, self.base + off, msg)

    def expect(self, lit: str) -> None:
        if self.peek() != lit:
            raise self.err(f"expected '{lit}'")
        self.take()

    def parse_expr(self) -> Expr:
        e = self.disjunction()
        if self.peek() is not None:
            raise self.err(f"unexpected '{self.peek()}'")
        return e

    def parse_assignments(self) -> Action:
        out: list[Assignment] = []
        if self.peek() is None:
            return ()
        while True:
            name = self.peek()
            if name is None or not _IDENT.match(name):
                raise self.err("expected a variable name")
            self.take()
            self.expect(":=")
            out.append(Assignment(name, self.disjunction()))
            if self.peek() == ",":
                self.take()
                continue
            break
        if self.peek() is not None:
            raise self.err(f"unexpected '{self.peek()}'")
        return tuple(out)

    def disjunction(self) -> Expr:
        e = self.conjunction()
        while self.peek() == "|":
            self.take()
            e = BoolOp("|", e, self.conjunction())
        return e

    def conjunction(self) -> Expr:
        e = self.comparison()
        while self.peek() == "&":
            self.take()
            e = BoolOp("&", e, self.comparison())
        return e

    def comparison(self) -> Expr:
        e = self.additive()
        if self.peek() in _CMP_OPS:
            op = self.take()
            e = Compare(op, e, self.additive())
        return e

    def additive(self) -> Expr:
        e = self.multiplicative()
        while self.peek() in ("+", "-"):
            op = self.take()
            e = Arith(op, e, self.multiplicative())
        return e

    def multiplicative(self) -> Expr:
        e = self.unary()
        while self.peek() in ("*", "/"):
            op = self.take()
            e = Arith(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.peek() == "!":
            self.take()
            return Not(self.unary())
        if self.peek() == "-":
            self.take()
            operand = self.unary()
            if isinstance(operand, IntLit):
                return IntLit(-operand.value)
            return Arith("-", IntLit(0), operand)
        return self.primary()

    def primary(self) -> Expr:
        tok = self.peek()
        if tok is None:
            raise self.err("expected an expression")
        if tok == "(":
            self.take()
            e = self.disjunction()
            self.expect(")")
            return e
        if tok.isdigit():
            self.take()
            return IntLit(int(tok))
        if tok == "true":
            self.take()
            return BoolLit(True)
        if tok == "false":
            self.take()
            return BoolLit(False)
        if tok == "in":
            self.take()
            self.expect("(")
            prop = self.peek()
            if prop is None or not _IDENT.match(prop):
                raise self.err("expected a proposition name")
            self.take()
            self.expect(")")
            return InEvent(prop)
        if tok == "ite":
            self.take()
            self.expect("(")
            cond = self.disjunction()
            self.expect(",")
            then = self.disjunction()
            self.expect(",")
            orelse = self.disjunction()
            self.expect(")")
            return Ite(cond, then, orelse)
        if _IDENT.match(tok):
            self.take()
            if tok in self.params:
                return IntLit(self.params[tok])
            return Var(tok)
        raise self.err(f"unexpected '{tok}'")


def parse_expr_text(text: str, params: Mapping[str, int] | None = None) -> Expr:
    return _ExprParser(text, 0, text, dict(params or {})).parse_expr()


def parse_action_text(text: str, params: Mapping[str, int] | None = None) -> Action:
    return _ExprParser(text, 0, text, dict(params or {})).parse_assignments()


# ---------------------------------------------------------------------------
# Spec files.

_SECTIONS = ("spec", "inputs", "outputs", "param", "assume", "monitor", "trigger", "body")
_RESERVED_NAMES = frozenset({"in", "ite", "true", "false", "tt", "ff"})
_STATE_MARKERS = ("flag", "sink")

_WORD = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT_TOKEN = re.compile(r"-?\d+")


class _Cursor:
    def __init__(self, src: str):
        self.src = src
        self.n = len(src)
        self.pos = 0
        self.last = 0  # start offset of the most recent take_*

    def skip(self) -> None:
        while self.pos < self.n and self.src[self.pos] in " \t\r\n":
            self.pos += 1

    def at_end(self) -> bool:
        self.skip()
        return self.pos >= self.n

    def error(self, msg: str, off: int | None = None) -> SpecParseError:
        return _err_at(self.src, self.pos if off is None else off, msg)

    def peek_word(self) -> str | None:
        self.skip()
        m = _WORD.match(self.src, self.pos)
        return m.group() if m else None

    def take_word(self, what: str = "a name") -> str:
        self.skip()
        m = _WORD.match(self.src, self.pos)
        if m is None:
            raise self.error(f"expected {what}")
        self.last = self.pos
        self.pos = m.end()
        return m.group()

    def take_int(self) -> int:
        self.skip()
        m = _INT_TOKEN.match(self.src, self.pos)
        if m is None:
            raise self.error("expected an integer")
        self.last = self.pos
        self.pos = m.end()
        return int(m.group())

    def take_string(self) -> str:
        self.skip()
        if self.pos >= self.n or self.src[self.pos] != '"':
            raise self.error("expected a quoted name")
        end = self.src.find('"', self.pos + 1)
        if end < 0 or "\n" in self.src[self.pos + 1 : end]:
            raise self.error("unterminated quoted name")
        self.last = self.pos
        out = self.src[self.pos + 1 : end]
        self.pos = end + 1
        return out

    def try_lit(self, lit: str) -> bool:
        self.skip()
        if self.src.startswith(lit, self.pos):
            self.pos += len(lit)
            return True
        return False

    def expect(self, lit: str) -> None:
        if not self.try_lit(lit):
            raise self.error(f"expected '{lit}'")

    def until(self, stop: str, what: str) -> tuple[str, int]:
        """Raw text up to `stop` (which is consumed), plus its offset."""
        self.skip()
        start = self.pos
        end = self.src.find(stop, self.pos)
        if end < 0:
            raise self.error(f"missing '{stop}' after {what}", start)
        self.pos = end + 1
        return self.src[start:end], start


def _check_name(cur: _Cursor, name: str, role: str) -> None:
    if name in _RESERVED_NAMES:
        raise cur.error(f"'{name}' is reserved and cannot name a {role}", cur.last)


def _parse_names(cur: _Cursor, role: str) -> tuple[str, ...]:
    names: list[str] = []
    while True:
        w = cur.take_word(f"a {role} name")
        _check_name(cur, w, role)
        if w in names:
            raise cur.error(f"{role} '{w}' listed twice", cur.last)
        names.append(w)
        if cur.try_lit(","):
            continue
        cur.expect(";")
        return tuple(names)


def _parse_formula(frag: str, off: int, src: str, what: str):
    if not frag.strip():
        raise _err_at(src, off, f"empty {what}")
    try:
        return parse_ltl(frag)
    except LtlError as exc:
        raise _err_at(src, off, f"bad {what}: {exc}") from exc


def _parse_var_initial(cur: _Cursor, kind: str, params: Mapping[str, int]) -> Value:
    w = cur.peek_word()
    if w is not None:
        cur.take_word()
        if w == "true":
            v: Value = True
        elif w == "false":
            v = False
        elif w in params:
            v = params[w]
        else:
            raise cur.error(
                f"initial value must be a literal or a declared parameter, not '{w}'",
                cur.last,
            )
    else:
        v = cur.take_int()
    if kind == "int" and isinstance(v, bool):
        raise cur.error("variable is int but starts at a boolean", cur.last)
    if kind == "bool" and not isinstance(v, bool):
        raise cur.error("variable is bool but starts at an integer", cur.last)
    return v


def _parse_monitor(cur: _Cursor, params: Mapping[str, int]):
    cur.expect("{")
    var_decls: list[VarDecl] = []
    states: list[str] = []
    flagging: set[str] = set()
    sink: str | None = None
    initial: str | None = None
    transitions: list[MonitorTransition] = []

    while True:
        if cur.at_end():
            raise cur.error("monitor section never closes")
        if cur.try_lit("}"):
            break
        w = cur.take_word("a monitor item")
        at = cur.last
        if w == "var":
            vname = cur.take_word("a variable name")
            _check_name(cur, vname, "variable")
            if vname in params:
                raise cur.error(f"variable '{vname}' collides with a parameter", cur.last)
            if any(d.name == vname for d in var_decls):
                raise cur.error(f"variable '{vname}' declared twice", cur.last)
            cur.expect(":")
            kind = cur.take_word("'int' or 'bool'")
            if kind not in ("int", "bool"):
                raise cur.error("variable kind must be 'int' or 'bool'", cur.last)
            cur.expect(":=")
            init = _parse_var_initial(cur, kind, params)
            cur.expect(";")
            var_decls.append(VarDecl(vname, kind, init))
        elif w == "states":
            if states:
                raise cur.error("duplicate states line", at)
            while True:
                s = cur.take_word("a state name")
                if s in _STATE_MARKERS:
                    raise cur.error(f"'{s}' is a state marker, not a state name", cur.last)
                if s in states:
                    raise cur.error(f"state '{s}' listed twice", cur.last)
                states.append(s)
                while True:
                    nxt = cur.peek_word()
                    if nxt == "flag":
                        cur.take_word()
                        flagging.add(s)
                    elif nxt == "sink":
                        cur.take_word()
                        if sink is not None:
                            raise cur.error("a monitor has exactly one sink", cur.last)
                        sink = s
                    else:
                        break
                if cur.try_lit(","):
                    continue
                cur.expect(";")
                break
        elif w == "init":
            if initial is not None:
                raise cur.error("duplicate init line", at)
            initial = cur.take_word("a state name")
            cur.expect(";")
        else:
            source = w
            cur.expect("->")
            target = cur.take_word("a target state")
            cur.expect("[")
            frag, off = cur.until("]", "the guard")
            guard = _ExprParser(frag, off, cur.src, params).parse_expr()
            action: Action = ()
            if cur.try_lit("/"):
                cur.expect("{")
                frag2, off2 = cur.until("}", "the action")
                action = _ExprParser(frag2, off2, cur.src, params).parse_assignments()
            cur.expect(";")
            transitions.append(MonitorTransition(source, guard, action, target))

    if not states:
        raise cur.error("monitor needs a states line")
    if initial is None:
        raise cur.error("monitor needs an init line")
    if sink is None:
        raise cur.error("monitor needs a sink state (mark one with 'sink')")
    return var_decls, states, flagging, sink, initial, transitions


def parse_spec(
    text: str,
    params: Mapping[str, int] | None = None,
    name: str | None = None,
) -> TriggerSpec:
    """Parse a spec document. `params` overrides declared parameter defaults.

    Only grammar-level problems are raised here; run
    triggers.validate_spec on the result for the semantic checks.
    """
    src = _blank_comments(text)
    cur = _Cursor(src)
    overrides = dict(params or {})
    declared: dict[str, int] = {}
    seen: set[str] = set()

    spec_name = name
    inputs: tuple[str, ...] | None = None
    outputs: tuple[str, ...] | None = None
    assumption = None
    monitor_parts = None
    repeating: bool | None = None
    body = None

    while not cur.at_end():
        kw = cur.take_word("a section keyword")
        at = cur.last
        if kw not in _SECTIONS:
            raise cur.error(f"unknown section '{kw}'", at)
        if kw != "param":
            if kw in seen:
                raise cur.error(f"duplicate section '{kw}'", at)
            seen.add(kw)

        if kw == "spec":
            spec_name = cur.take_string()
            cur.expect(";")
        elif kw == "inputs":
            inputs = _parse_names(cur, "proposition")
        elif kw == "outputs":
            outputs = _parse_names(cur, "proposition")
        elif kw == "param":
            if monitor_parts is not None:
                raise cur.error("parameters must be declared before the monitor", at)
            pname = cur.take_word("a parameter name")
            _check_name(cur, pname, "parameter")
            if pname in declared:
                raise cur.error(f"parameter '{pname}' declared twice", cur.last)
            cur.expect(":=")
            value = cur.take_int()
            cur.expect(";")
            declared[pname] = overrides.get(pname, value)
        elif kw == "assume":
            frag, off = cur.until(";", "the assumption")
            assumption = _parse_formula(frag, off, src, "assumption")
        elif kw == "monitor":
            monitor_parts = _parse_monitor(cur, declared)
        elif kw == "trigger":
            mode = cur.take_word("'once' or 'repeat'")
            if mode not in ("once", "repeat"):
                raise cur.error("trigger mode must be 'once' or 'repeat'", cur.last)
            repeating = mode == "repeat"
            cur.expect(";")
        elif kw == "body":
            frag, off = cur.until(";", "the goal body")
            body = _parse_formula(frag, off, src, "goal body")

    extra = sorted(set(overrides) - set(declared))
    if extra:
        raise FormatError(f"unknown parameter override(s): {', '.join(extra)}")
    for want in ("inputs", "outputs", "monitor", "trigger", "body"):
        if want not in seen:
            raise cur.error(f"missing required section '{want}'")
    assert inputs is not None and outputs is not None
    assert monitor_parts is not None and repeating is not None and body is not None

    var_decls, states, flagging, sink, initial, transitions = monitor_parts
    monitor = Monitor(
        inputs=frozenset(inputs),
        vars=tuple(var_decls),
        states=frozenset(states),
        initial=initial,
        flagging=frozenset(flagging),
        sink=sink,
        transitions=tuple(transitions),
    )
    return TriggerSpec(
        name=spec_name or "untitled",
        inputs=frozenset(inputs),
        outputs=frozenset(outputs),
        assumption=assumption if assumption is not None else TT,
        monitor=monitor,
        repeating=repeating,
        body=body,
    )


def _value_text(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def spec_to_text(spec: TriggerSpec) -> str:
    """Serialize so that parse_spec reads back a structurally equal spec.

    The monitor is written over the full input alphabet; parameters were
    substituted at parse time, so none are emitted.
    """
    m = spec.monitor
    out = [f'spec "{spec.name}";', ""]
    out.append(f"inputs {', '.join(sorted(spec.inputs))};")
    out.append(f"outputs {', '.join(sorted(spec.outputs))};")
    out.append("")
    out.append(f"assume {ltl_to_text(spec.assumption)};")
    out.append("")
    out.append("monitor {")
    for d in m.vars:
        out.append(f"  var {d.name}: {d.kind} := {_value_text(d.initial)};")
    decls = []
    for q in sorted(m.states):
        marker = " flag" if q in m.flagging else (" sink" if q == m.sink else "")
        decls.append(q + marker)
    out.append(f"  states {', '.join(decls)};")
    out.append(f"  init {m.initial};")
    for t in m.transitions:
        line = f"  {t.source} -> {t.target} [{to_text(t.guard)}]"
        if t.action:
            assigns = ", ".join(f"{a.target} := {to_text(a.value)}" for a in t.action)
            line += f" / {{ {assigns} }}"
        out.append(line + ";")
    out.append("}")
    out.append("")
    out.append(f"trigger {'repeat' if spec.repeating else 'once'};")
    out.append(f"body {ltl_to_text(spec.body)};")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Lasso traces as JSON.


def parse_trace(text: str) -> LassoTrace:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"trace is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise TraceFormatError("trace must be a JSON object")
    extra = sorted(set(data) - {"prefix", "loop"})
    if extra:
        raise TraceFormatError(f"unknown trace fields: {', '.join(extra)}")
    if "loop" not in data:
        raise TraceFormatError("trace needs a 'loop' array")
    prefix = _event_list(data.get("prefix", []), "prefix")
    loop = _event_list(data["loop"], "loop")
    if not loop:
        raise TraceFormatError("the loop part must be nonempty")
    return LassoTrace(prefix, loop)


def _event_list(raw, what: str) -> tuple[frozenset, ...]:
    if not isinstance(raw, list):
        raise TraceFormatError(f"'{what}' must be an array of event arrays")
    out = []
    for i, ev in enumerate(raw):
        if not isinstance(ev, list) or not all(isinstance(p, str) for p in ev):
            raise TraceFormatError(f"{what}[{i}] must be an array of proposition names")
        out.append(frozenset(ev))
    return tuple(out)


def trace_to_text(trace: LassoTrace) -> str:
    obj = {
        "prefix": [sorted(ev) for ev in trace.prefix],
        "loop": [sorted(ev) for ev in trace.loop],
    }
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Mealy controller interchange. Rows are keyed by complete input valuations;
# one optional wildcard row per state acts as the default move. Duplicate
# keys are rejected here explicitly: a dict would silently keep one row and
# hide the nondeterminism.


def _load_json(text: str, kind: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InterchangeError(f"not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InterchangeError("the top level must be a JSON object")
    found = data.get("kind")
    if found != kind:
        raise InterchangeError(f"expected kind '{kind}', found {found!r}")
    return data


def _name_list(data: dict, field: str, where: str = "") -> tuple[str, ...]:
    raw = data.get(field)
    spot = f"{where}'{field}'"
    if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
        raise InterchangeError(f"{spot} must be an array of names")
    if len(set(raw)) != len(raw):
        raise InterchangeError(f"{spot} contains duplicates")
    return tuple(raw)


def _str_field(data: dict, field: str) -> str:
    raw = data.get(field)
    if not isinstance(raw, str):
        raise InterchangeError(f"'{field}' must be a string")
    return raw


def parse_mealy(text: str) -> MealyMachine:
    data = _load_json(text, MEALY_KIND)
    known = {"kind", "inputs", "outputs", "states", "initial", "accepting", "transitions"}
    extra = sorted(set(data) - known)
    if extra:
        raise InterchangeError(f"unknown fields: {', '.join(extra)}")

    inputs = _name_list(data, "inputs")
    outputs = _name_list(data, "outputs")
    states = _name_list(data, "states")
    if not states:
        raise InterchangeError("'states' must not be empty")
    initial = _str_field(data, "initial")
    if initial not in states:
        raise InterchangeError(f"initial state '{initial}' is not in the state list")
    accepting = ()
    if "accepting" in data:
        accepting = _name_list(data, "accepting")
        for q in accepting:
            if q not in states:
                raise InterchangeError(f"accepting state '{q}' is not in the state list")

    rows = data.get("transitions")
    if not isinstance(rows, list):
        raise InterchangeError("'transitions' must be an array of rows")
    transitions: dict[tuple[str, frozenset], tuple[frozenset, str]] = {}
    defaults: dict[str, tuple[frozenset, str]] = {}
    seen: set = set()
    for i, row in enumerate(rows):
        where = f"transition {i}: "
        if not isinstance(row, dict):
            raise InterchangeError(f"{where}each row must be an object")
        bad = sorted(set(row) - {"state", "inputs", "outputs", "target"})
        if bad:
            raise InterchangeError(f"{where}unknown fields: {', '.join(bad)}")
        state = row.get("state")
        target = row.get("target")
        if state not in states:
            raise InterchangeError(f"{where}unknown state {state!r}")
        if target not in states:
            raise InterchangeError(f"{where}unknown target {target!r}")
        outs = row.get("outputs")
        if not isinstance(outs, list) or not all(isinstance(x, str) for x in outs):
            raise InterchangeError(f"{where}'outputs' must be an array of names")
        for x in outs:
            if x not in outputs:
                raise InterchangeError(f"{where}'{x}' is not a declared output")
        move = (frozenset(outs), target)
        inp = row.get("inputs")
        if inp == WILDCARD:
            if (state, WILDCARD) in seen:
                raise InterchangeError(
                    f"{where}duplicate wildcard row for state '{state}'; "
                    f"the machine would be nondeterministic"
                )
            seen.add((state, WILDCARD))
            defaults[state] = move
            continue
        if not isinstance(inp, list) or not all(isinstance(x, str) for x in inp):
            raise InterchangeError(f"{where}'inputs' must be an array of names or \"*\"")
        for x in inp:
            if x not in inputs:
                raise InterchangeError(f"{where}'{x}' is not a declared input")
        val = frozenset(inp)
        if (state, val) in seen:
            raise InterchangeError(
                f"{where}duplicate row for state '{state}' and inputs "
                f"{sorted(val)}; the machine would be nondeterministic"
            )
        seen.add((state, val))
        transitions[(state, val)] = move

    mm = MealyMachine(
        inputs=inputs,
        outputs=outputs,
        states=states,
        initial=initial,
        accepting=frozenset(accepting),
        transitions=transitions,
        defaults=defaults,
    )
    problems = validate_mealy(mm)
    if problems:
        raise InterchangeError("; ".join(problems))
    return mm


def mealy_to_json(mm: MealyMachine) -> dict:
    by_state: dict[str, list] = {s: [] for s in mm.states}
    for (state, val), (outs, tgt) in mm.transitions.items():
        by_state[state].append((tuple(sorted(val)), outs, tgt))
    rows = []
    for state in mm.states:
        for val_t, outs, tgt in sorted(by_state[state]):
            rows.append(
                {"state": state, "inputs": list(val_t), "outputs": sorted(outs), "target": tgt}
            )
        if state in mm.defaults:
            outs, tgt = mm.defaults[state]
            rows.append(
                {"state": state, "inputs": WILDCARD, "outputs": sorted(outs), "target": tgt}
            )
    return {
        "kind": MEALY_KIND,
        "inputs": list(mm.inputs),
        "outputs": list(mm.outputs),
        "states": list(mm.states),
        "initial": mm.initial,
        "accepting": sorted(mm.accepting),
        "transitions": rows,
    }


def mealy_to_text(mm: MealyMachine) -> str:
    return json.dumps(mealy_to_json(mm), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Composed symbolic controllers. Guards and update expressions travel as
# text in the grammar above; transition order is significant and preserved.


def controller_to_json(sc: SymbolicController) -> dict:
    return {
        "kind": CONTROLLER_KIND,
        "inputs": sorted(sc.inputs),
        "outputs": sorted(sc.outputs),
        "vars": [{"name": d.name, "kind": d.kind, "initial": d.initial} for d in sc.vars],
        "states": list(sc.states),
        "initial": sc.initial,
        "transitions": [
            {
                "source": t.source,
                "guard": to_text(t.guard),
                "action": [[a.target, to_text(a.value)] for a in t.action],
                "outputs": sorted(t.outputs),
                "target": t.target,
                "fires_trigger": t.fires_trigger,
                "resets": t.resets,
            }
            for t in sc.transitions
        ],
    }


def controller_to_text(sc: SymbolicController) -> str:
    return json.dumps(controller_to_json(sc), indent=2, sort_keys=True) + "\n"


def _parse_embedded_expr(text, where: str) -> Expr:
    if not isinstance(text, str):
        raise InterchangeError(f"{where} must be a string")
    try:
        return parse_expr_text(text)
    except SpecParseError as exc:
        raise InterchangeError(f"{where}: {exc}") from exc


def parse_controller(text: str) -> SymbolicController:
    data = _load_json(text, CONTROLLER_KIND)
    known = {"kind", "inputs", "outputs", "vars", "states", "initial", "transitions"}
    extra = sorted(set(data) - known)
    if extra:
        raise InterchangeError(f"unknown fields: {', '.join(extra)}")

    inputs = _name_list(data, "inputs")
    outputs = _name_list(data, "outputs")
    states = _name_list(data, "states")
    if not states:
        raise InterchangeError("'states' must not be empty")
    initial = _str_field(data, "initial")
    if initial not in states:
        raise InterchangeError(f"initial state '{initial}' is not in the state list")

    raw_vars = data.get("vars", [])
    if not isinstance(raw_vars, list):
        raise InterchangeError("'vars' must be an array")
    var_decls = []
    for i, rv in enumerate(raw_vars):
        where = f"var {i}: "
        if not isinstance(rv, dict):
            raise InterchangeError(f"{where}each entry must be an object")
        vname = rv.get("name")
        kind = rv.get("kind")
        init = rv.get("initial")
        if not isinstance(vname, str) or kind not in ("int", "bool"):
            raise InterchangeError(f"{where}needs a name and a kind of 'int' or 'bool'")
        if kind == "bool" and not isinstance(init, bool):
            raise InterchangeError(f"{where}'{vname}' is bool but starts at {init!r}")
        if kind == "int" and (isinstance(init, bool) or not isinstance(init, int)):
            raise InterchangeError(f"{where}'{vname}' is int but starts at {init!r}")
        var_decls.append(VarDecl(vname, kind, init))

    rows = data.get("transitions")
    if not isinstance(rows, list):
        raise InterchangeError("'transitions' must be an array of rows")
    transitions = []
    for i, row in enumerate(rows):
        where = f"transition {i}: "
        if not isinstance(row, dict):
            raise InterchangeError(f"{where}each row must be an object")
        bad = sorted(
            set(row) - {"source", "guard", "action", "outputs", "target", "fires_trigger", "resets"}
        )
        if bad:
            raise InterchangeError(f"{where}unknown fields: {', '.join(bad)}")
        source = row.get("source")
        target = row.get("target")
        if source not in states:
            raise InterchangeError(f"{where}unknown source {source!r}")
        if target not in states:
            raise InterchangeError(f"{where}unknown target {target!r}")
        guard = _parse_embedded_expr(row.get("guard"), f"{where}guard")
        raw_action = row.get("action", [])
        if not isinstance(raw_action, list):
            raise InterchangeError(f"{where}'action' must be an array of [name, expression] pairs")
        action = []
        for j, pair in enumerate(raw_action):
            if (
                not isinstance(pair, list)
                or len(pair) != 2
                or not isinstance(pair[0], str)
            ):
                raise InterchangeError(
                    f"{where}'action' must be an array of [name, expression] pairs"
                )
            action.append(
                Assignment(pair[0], _parse_embedded_expr(pair[1], f"{where}action {j}"))
            )
        outs = row.get("outputs")
        if not isinstance(outs, list) or not all(isinstance(x, str) for x in outs):
            raise InterchangeError(f"{where}'outputs' must be an array of names")
        for x in outs:
            if x not in outputs:
                raise InterchangeError(f"{where}'{x}' is not a declared output")
        fires = row.get("fires_trigger", False)
        resets = row.get("resets", False)
        if not isinstance(fires, bool) or not isinstance(resets, bool):
            raise InterchangeError(f"{where}'fires_trigger' and 'resets' must be booleans")
        transitions.append(
            ControllerTransition(
                source=source,
                guard=guard,
                action=tuple(action),
                outputs=frozenset(outs),
                target=target,
                fires_trigger=fires,
                resets=resets,
            )
        )

    return SymbolicController(
        inputs=frozenset(inputs),
        outputs=frozenset(outputs),
        vars=tuple(var_decls),
        states=tuple(states),
        initial=initial,
        transitions=tuple(transitions),
    )


# ---------------------------------------------------------------------------
# DOT export. Plain digraphs: one arrow per transition in declaration order,
# guard / action / outputs on the edge label, a point node marking the
# initial state. Flagging states are double circles, the sink is a square.


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def _node(name: str, attrs: list[str]) -> str:
    body = f" [{', '.join(attrs)}]" if attrs else ""
    return f'  "{_dot_escape(name)}"{body};'


def _edge(src: str, tgt: str, attrs: list[str]) -> str:
    body = f" [{', '.join(attrs)}]" if attrs else ""
    return f'  "{_dot_escape(src)}" -> "{_dot_escape(tgt)}"{body};'


def _action_text(action: Action) -> str:
    return ", ".join(f"{a.target} := {to_text(a.value)}" for a in action)


def monitor_to_dot(m: Monitor, name: str = "monitor") -> str:
    lines = [
        f'digraph "{_dot_escape(name)}" {{',
        "  rankdir=LR;",
        "  node [shape=circle];",
        '  __start [shape=point, label=""];',
    ]
    for q in sorted(m.states):
        attrs = []
        if q in m.flagging:
            attrs.append("shape=doublecircle")
        elif q == m.sink:
            attrs.append("shape=square")
        lines.append(_node(q, attrs))
    lines.append(f'  __start -> "{_dot_escape(m.initial)}";')
    for t in m.transitions:
        label = to_text(t.guard)
        if t.action:
            label += " / " + _action_text(t.action)
        lines.append(_edge(t.source, t.target, [f'label="{_dot_escape(label)}"']))
    lines.append("}")
    return "\n".join(lines) + "\n"


def controller_to_dot(sc: SymbolicController, name: str = "controller") -> str:
    """Composed controller graph. Trigger-firing edges are drawn bold and
    resetting edges dashed; `!` introduces the emitted outputs."""
    lines = [
        f'digraph "{_dot_escape(name)}" {{',
        "  rankdir=LR;",
        "  node [shape=circle];",
        '  __start [shape=point, label=""];',
    ]
    for q in sc.states:
        lines.append(_node(q, []))
    lines.append(f'  __start -> "{_dot_escape(sc.initial)}";')
    for t in sc.transitions:
        label = to_text(t.guard)
        if t.action:
            label += " / " + _action_text(t.action)
        if t.outputs:
            label += " ! " + " ".join(sorted(t.outputs))
        attrs = [f'label="{_dot_escape(label)}"']
        if t.fires_trigger:
            attrs.append("penwidth=2")
        if t.resets:
            attrs.append("style=dashed")
        lines.append(_edge(t.source, t.target, attrs))
    lines.append("}")
    return "\n".join(lines) + "\n"


def mealy_to_dot(mm: MealyMachine, name: str = "mealy") -> str:
    lines = [
        f'digraph "{_dot_escape(name)}" {{',
        "  rankdir=LR;",
        "  node [shape=circle];",
        '  __start [shape=point, label=""];',
    ]
    for q in mm.states:
        lines.append(_node(q, ["shape=doublecircle"] if q in mm.accepting else []))
    lines.append(f'  __start -> "{_dot_escape(mm.initial)}";')
    by_state: dict[str, list] = {s: [] for s in mm.states}
    for (state, val), (outs, tgt) in mm.transitions.items():
        by_state[state].append((tuple(sorted(val)), outs, tgt))
    for state in mm.states:
        for val_t, outs, tgt in sorted(by_state[state]):
            label = "{" + " ".join(val_t) + "} / {" + " ".join(sorted(outs)) + "}"
            lines.append(_edge(state, tgt, [f'label="{_dot_escape(label)}"']))
        if state in mm.defaults:
            outs, tgt = mm.defaults[state]
            label = "* / {" + " ".join(sorted(outs)) + "}"
            lines.append(_edge(state, tgt, [f'label="{_dot_escape(label)}"']))
    lines.append("}")
    return "\n".join(lines) + "\n"


def sniff_kind(text: str) -> str:
    """Classify a document: 'spec', 'trace', or one of the JSON kinds."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"not valid JSON: {exc}") from exc
        if isinstance(data, dict):
            kind = data.get("kind")
            if kind in (MEALY_KIND, CONTROLLER_KIND):
                return kind
            if "loop" in data or "prefix" in data:
                return "trace"
        raise FormatError("unrecognized JSON document: no known 'kind'")
    return "spec"
