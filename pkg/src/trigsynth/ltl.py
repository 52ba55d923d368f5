"""Linear temporal logic over finite windows and lasso-shaped infinite traces.

Finite-window semantics follow the strict reading used throughout this
package: `X f` needs a next position inside the window, `U` is strong, and
`G` never holds on a finite window (it asserts something about an infinite
remainder). Lasso traces get exact evaluation by walking the finitely many
distinct positions.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Sequence, Union


@dataclass(frozen=True)
class Tt:
    pass


@dataclass(frozen=True)
class Ff:
    pass


@dataclass(frozen=True)
class Prop:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Iff:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Next:
    operand: "Formula"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class WeakUntil:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Always:
    operand: "Formula"


@dataclass(frozen=True)
class Eventually:
    operand: "Formula"


Formula = Union[
    Tt, Ff, Prop, Neg, And, Or, Implies, Iff, Next, Until, WeakUntil, Always, Eventually
]

TT = Tt()
FF = Ff()

Event = frozenset
FiniteTrace = Sequence[frozenset]


class LtlError(Exception):
    pass


@dataclass(frozen=True)
class LassoTrace:
    """prefix · loop^ω; the loop must be nonempty."""

    prefix: tuple[frozenset, ...]
    loop: tuple[frozenset, ...]

    def __post_init__(self):
        if not self.loop:
            raise LtlError("lasso loop must be nonempty")

    @property
    def positions(self) -> int:
        return len(self.prefix) + len(self.loop)

    def event(self, k: int) -> frozenset:
        p = len(self.prefix)
        if k < p:
            return self.prefix[k]
        return self.loop[(k - p) % len(self.loop)]

    def succ(self, k: int) -> int:
        k += 1
        return len(self.prefix) if k >= self.positions else k

    def norm(self, k: int) -> int:
        p = len(self.prefix)
        if k < p:
            return k
        return p + (k - p) % len(self.loop)

    def shift(self, j: int) -> "LassoTrace":
        """The suffix starting at absolute position j, again as a lasso."""
        p = len(self.prefix)
        if j <= p:
            return LassoTrace(self.prefix[j:], self.loop)
        r = (j - p) % len(self.loop)
        return LassoTrace((), self.loop[r:] + self.loop[:r])

    def unroll(self, n: int) -> list[frozenset]:
        return [self.event(k) for k in range(n)]


# ---------------------------------------------------------------------------
# Parsing. Identifiers are propositions; tt ff X U W G F ! & | -> <-> ( ).


_TOKEN = re.compile(r"\s*(->|<->|[A-Za-z_][A-Za-z0-9_]*|[!&|()])")
_RESERVED = {"tt", "ff", "X", "U", "W", "G", "F"}


class LtlParseError(LtlError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at offset {pos})")
        self.pos = pos


def _tokenize(text: str) -> list[tuple[str, int]]:
    out = []
    i = 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            stripped = text[i:].lstrip()
            if not stripped:
                break
            raise LtlParseError(f"unexpected character {stripped[0]!r}", i)
        out.append((m.group(1), m.start(1)))
        i = m.end()
    return out


class _Parser:
    def __init__(self, tokens: list[tuple[str, int]], length: int):
        self.tokens = tokens
        self.i = 0
        self.length = length

    def peek(self) -> str | None:
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def pos(self) -> int:
        return self.tokens[self.i][1] if self.i < len(self.tokens) else self.length

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise LtlParseError("unexpected end of formula", self.length)
        self.i += 1
        return tok

    def expect(self, tok: str) -> None:
        if self.peek() != tok:
            raise LtlParseError(f"expected '{tok}'", self.pos())
        self.i += 1

    # precedence climbing: <-> then -> then | then & then U/W then unary
    def formula(self) -> Formula:
        f = self.implies()
        while self.peek() == "<->":
            self.take()
            f = Iff(f, self.implies())
        return f

    def implies(self) -> Formula:
        f = self.disj()
        if self.peek() == "->":
            self.take()
            return Implies(f, self.implies())
        return f

    def disj(self) -> Formula:
        f = self.conj()
        while self.peek() == "|":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.until()
        while self.peek() == "&":
            self.take()
            f = And(f, self.until())
        return f

    def until(self) -> Formula:
        f = self.unary()
        if self.peek() in ("U", "W"):
            op = self.take()
            rest = self.until()
            return Until(f, rest) if op == "U" else WeakUntil(f, rest)
        return f

    def unary(self) -> Formula:
        tok = self.peek()
        if tok == "!":
            self.take()
            return Neg(self.unary())
        if tok == "X":
            self.take()
            return Next(self.unary())
        if tok == "G":
            self.take()
            return Always(self.unary())
        if tok == "F":
            self.take()
            return Eventually(self.unary())
        if tok == "(":
            self.take()
            f = self.formula()
            self.expect(")")
            return f
        if tok == "tt":
            self.take()
            return TT
        if tok == "ff":
            self.take()
            return FF
        if tok is not None and re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok):
            if tok in _RESERVED:
                raise LtlParseError(f"'{tok}' is reserved", self.pos())
            self.take()
            return Prop(tok)
        raise LtlParseError(f"unexpected token {tok!r}", self.pos())


def parse_ltl(text: str) -> Formula:
    p = _Parser(_tokenize(text), len(text))
    f = p.formula()
    if p.peek() is not None:
        raise LtlParseError(f"trailing input {p.peek()!r}", p.pos())
    return f


_UNARY = {Neg: "!", Next: "X", Always: "G", Eventually: "F"}


def to_text(f: Formula) -> str:
    return _fmt(f, 0)


def _fmt(f: Formula, parent: int) -> str:
    if isinstance(f, Tt):
        return "tt"
    if isinstance(f, Ff):
        return "ff"
    if isinstance(f, Prop):
        return f.name
    if isinstance(f, (Neg, Next, Always, Eventually)):
        sep = "" if isinstance(f, Neg) else " "
        return _UNARY[type(f)] + sep + _fmt(f.operand, 6)
    if isinstance(f, (Until, WeakUntil)):
        op = "U" if isinstance(f, Until) else "W"
        s = f"{_fmt(f.left, 6)} {op} {_fmt(f.right, 5)}"
        return f"({s})" if parent > 5 else s
    if isinstance(f, And):
        s = f"{_fmt(f.left, 4)} & {_fmt(f.right, 5)}"
        return f"({s})" if parent > 4 else s
    if isinstance(f, Or):
        s = f"{_fmt(f.left, 3)} | {_fmt(f.right, 4)}"
        return f"({s})" if parent > 3 else s
    if isinstance(f, Implies):
        s = f"{_fmt(f.left, 3)} -> {_fmt(f.right, 2)}"
        return f"({s})" if parent > 2 else s
    if isinstance(f, Iff):
        s = f"{_fmt(f.left, 2)} <-> {_fmt(f.right, 2)}"
        return f"({s})" if parent > 1 else s
    raise LtlError(f"unknown formula node {f!r}")


# ---------------------------------------------------------------------------
# Normalization to negation normal form over {tt, ff, p, !p, &, |, X, U, G}.


def mk_and(a: Formula, b: Formula) -> Formula:
    if isinstance(a, Ff) or isinstance(b, Ff):
        return FF
    if isinstance(a, Tt):
        return b
    if isinstance(b, Tt):
        return a
    if a == b:
        return a
    return And(a, b)


def mk_or(a: Formula, b: Formula) -> Formula:
    if isinstance(a, Tt) or isinstance(b, Tt):
        return TT
    if isinstance(a, Ff):
        return b
    if isinstance(b, Ff):
        return a
    if a == b:
        return a
    return Or(a, b)


def mk_until(a: Formula, b: Formula) -> Formula:
    if isinstance(b, (Tt, Ff)):
        return b
    if isinstance(a, Ff):
        return b
    return Until(a, b)


def mk_always(a: Formula) -> Formula:
    if isinstance(a, (Tt, Ff)):
        return a
    return Always(a)


def normalize(f: Formula) -> Formula:
    """Push negations to propositions and expand F, W, ->, <->."""
    return _norm(f, True)


def _norm(f: Formula, pos: bool) -> Formula:
    if isinstance(f, Tt):
        return TT if pos else FF
    if isinstance(f, Ff):
        return FF if pos else TT
    if isinstance(f, Prop):
        return f if pos else Neg(f)
    if isinstance(f, Neg):
        return _norm(f.operand, not pos)
    if isinstance(f, And):
        a, b = _norm(f.left, pos), _norm(f.right, pos)
        return mk_and(a, b) if pos else mk_or(a, b)
    if isinstance(f, Or):
        a, b = _norm(f.left, pos), _norm(f.right, pos)
        return mk_or(a, b) if pos else mk_and(a, b)
    if isinstance(f, Implies):
        return _norm(Or(Neg(f.left), f.right), pos)
    if isinstance(f, Iff):
        return _norm(And(Implies(f.left, f.right), Implies(f.right, f.left)), pos)
    if isinstance(f, Next):
        return Next(_norm(f.operand, pos))
    if isinstance(f, Until):
        if pos:
            return mk_until(_norm(f.left, True), _norm(f.right, True))
        # !(a U b) == (!b) U (!a & !b) | G !b
        na, nb = _norm(f.left, False), _norm(f.right, False)
        return mk_or(mk_until(nb, mk_and(na, nb)), mk_always(nb))
    if isinstance(f, WeakUntil):
        return _norm(Or(Until(f.left, f.right), Always(f.left)), pos)
    if isinstance(f, Always):
        if pos:
            return mk_always(_norm(f.operand, True))
        return mk_until(TT, _norm(f.operand, False))
    if isinstance(f, Eventually):
        return _norm(Until(TT, f.operand), pos)
    raise LtlError(f"unknown formula node {f!r}")


class Fragment(enum.Enum):
    BOOLEAN = "boolean"              # propositional state formulas
    STEP_BOOLEAN = "step-boolean"    # booleans with non-nested next
    COSAFETY = "cosafety"            # no G after normalization
    ASSUMPTION = "assumption"        # conjunctions of G step / G F state terms
    GENERAL = "general"


def _is_state_formula(f: Formula) -> bool:
    if isinstance(f, (Tt, Ff, Prop)):
        return True
    if isinstance(f, Neg):
        return isinstance(f.operand, Prop)
    if isinstance(f, (And, Or)):
        return _is_state_formula(f.left) and _is_state_formula(f.right)
    return False


def _is_step_formula(f: Formula) -> bool:
    if _is_state_formula(f):
        return True
    if isinstance(f, Next):
        return _is_state_formula(f.operand)
    if isinstance(f, (And, Or)):
        return _is_step_formula(f.left) and _is_step_formula(f.right)
    return False


def _is_assumption(f: Formula) -> bool:
    if isinstance(f, And):
        return _is_assumption(f.left) and _is_assumption(f.right)
    if isinstance(f, Always):
        inner = f.operand
        if _is_step_formula(inner):
            return True
        # G F state-formula normalizes to G (tt U state-formula)
        return (
            isinstance(inner, Until)
            and isinstance(inner.left, Tt)
            and _is_state_formula(inner.right)
        )
    return False


def _contains_always(f: Formula) -> bool:
    if isinstance(f, Always):
        return True
    for name in getattr(f, "__dataclass_fields__", {}):
        v = getattr(f, name)
        if hasattr(v, "__dataclass_fields__") and _contains_always(v):
            return True
    return False


def classify(f: Formula) -> Fragment:
    """Most specific fragment of the normalized formula."""
    g = normalize(f)
    if not _contains_always(g):
        if _is_state_formula(g):
            return Fragment.BOOLEAN
        if _is_step_formula(g):
            return Fragment.STEP_BOOLEAN
        return Fragment.COSAFETY
    if _is_assumption(g):
        return Fragment.ASSUMPTION
    return Fragment.GENERAL


def is_cosafety(f: Formula) -> bool:
    return classify(f) in (Fragment.BOOLEAN, Fragment.STEP_BOOLEAN, Fragment.COSAFETY)


def is_valid_assumption(f: Formula) -> bool:
    g = normalize(f)
    return isinstance(g, Tt) or _is_assumption(g)


# ---------------------------------------------------------------------------
# Finite-window evaluation.


def eval_finite(f: Formula, trace: FiniteTrace, i: int, j: int) -> bool:
    """Does the window trace[i..j] (inclusive, nonempty) satisfy f?"""
    if not (0 <= i <= j < len(trace)):
        raise LtlError(f"bad window [{i}, {j}] for trace of length {len(trace)}")
    memo: dict[tuple[Formula, int], bool] = {}

    def rec(g: Formula, k: int) -> bool:
        key = (g, k)
        got = memo.get(key)
        if got is not None:
            return got
        r = _finite(g, k)
        memo[key] = r
        return r

    def _finite(g: Formula, k: int) -> bool:
        if isinstance(g, Tt):
            return True
        if isinstance(g, Ff):
            return False
        if isinstance(g, Prop):
            return g.name in trace[k]
        if isinstance(g, Neg):
            return not rec(g.operand, k)
        if isinstance(g, And):
            return rec(g.left, k) and rec(g.right, k)
        if isinstance(g, Or):
            return rec(g.left, k) or rec(g.right, k)
        if isinstance(g, Implies):
            return (not rec(g.left, k)) or rec(g.right, k)
        if isinstance(g, Iff):
            return rec(g.left, k) == rec(g.right, k)
        if isinstance(g, Next):
            return k < j and rec(g.operand, k + 1)
        if isinstance(g, (Until, WeakUntil)):
            # weak collapses to strong here: its G disjunct needs j = infinity
            for l in range(k, j + 1):
                if rec(g.right, l):
                    return True
                if not rec(g.left, l):
                    return False
            return False
        if isinstance(g, Always):
            return False
        if isinstance(g, Eventually):
            return any(rec(g.operand, l) for l in range(k, j + 1))
        raise LtlError(f"unknown formula node {g!r}")

    return rec(f, i)


def eval_lasso(f: Formula, trace: LassoTrace) -> bool:
    """Exact evaluation on the infinite word prefix . loop^omega."""
    memo: dict[tuple[Formula, int], bool] = {}

    def rec(g: Formula, k: int) -> bool:
        key = (g, k)
        got = memo.get(key)
        if got is not None:
            return got
        r = _inf(g, k)
        memo[key] = r
        return r

    def _inf(g: Formula, k: int) -> bool:
        if isinstance(g, Tt):
            return True
        if isinstance(g, Ff):
            return False
        if isinstance(g, Prop):
            return g.name in trace.event(k)
        if isinstance(g, Neg):
            return not rec(g.operand, k)
        if isinstance(g, And):
            return rec(g.left, k) and rec(g.right, k)
        if isinstance(g, Or):
            return rec(g.left, k) or rec(g.right, k)
        if isinstance(g, Implies):
            return (not rec(g.left, k)) or rec(g.right, k)
        if isinstance(g, Iff):
            return rec(g.left, k) == rec(g.right, k)
        if isinstance(g, Next):
            return rec(g.operand, trace.succ(k))
        if isinstance(g, (Until, WeakUntil)):
            weak = isinstance(g, WeakUntil)
            seen = set()
            pos = k
            while pos not in seen:
                seen.add(pos)
                if rec(g.right, pos):
                    return True
                if not rec(g.left, pos):
                    return False
                pos = trace.succ(pos)
            return weak
        if isinstance(g, Always):
            seen = set()
            pos = k
            while pos not in seen:
                seen.add(pos)
                if not rec(g.operand, pos):
                    return False
                pos = trace.succ(pos)
            return True
        if isinstance(g, Eventually):
            seen = set()
            pos = k
            while pos not in seen:
                seen.add(pos)
                if rec(g.operand, pos):
                    return True
                pos = trace.succ(pos)
            return False
        raise LtlError(f"unknown formula node {g!r}")

    return rec(f, 0)


def tight_sat(f: Formula, trace: FiniteTrace) -> bool:
    """Satisfaction with no satisfying strict prefix."""
    if len(trace) == 0:
        raise LtlError("tight satisfaction needs a nonempty trace")
    if not eval_finite(f, trace, 0, len(trace) - 1):
        return False
    return not any(eval_finite(f, trace, 0, k) for k in range(len(trace) - 1))


# ---------------------------------------------------------------------------
# Progression for co-safety formulas in normal form: reading one event off
# the front. Used by the repeating-trigger oracle to prove that no extension
# of a window can become a witness.


def progress(f: Formula, event: frozenset) -> Formula:
    if isinstance(f, (Tt, Ff)):
        return f
    if isinstance(f, Prop):
        return TT if f.name in event else FF
    if isinstance(f, Neg):
        if isinstance(f.operand, Prop):
            return FF if f.operand.name in event else TT
        raise LtlError("progress expects negation normal form")
    if isinstance(f, And):
        return mk_and(progress(f.left, event), progress(f.right, event))
    if isinstance(f, Or):
        return mk_or(progress(f.left, event), progress(f.right, event))
    if isinstance(f, Next):
        return f.operand
    if isinstance(f, Until):
        return mk_or(progress(f.right, event), mk_and(progress(f.left, event), f))
    raise LtlError(f"progress does not handle {type(f).__name__} (co-safety NNF only)")


def canonical(f: Formula) -> Formula:
    """Flatten, sort, and deduplicate and/or so progression residuals stabilize."""
    if isinstance(f, And):
        parts = _dedup(sorted(_flat(f, And), key=repr))
        out = parts[0]
        for p in parts[1:]:
            out = mk_and(out, p)
        return out
    if isinstance(f, Or):
        parts = _dedup(sorted(_flat(f, Or), key=repr))
        out = parts[0]
        for p in parts[1:]:
            out = mk_or(out, p)
        return out
    return f


def _dedup(parts: list) -> list:
    out = []
    for p in parts:
        if not out or out[-1] != p:
            out.append(p)
    return out


def _flat(f: Formula, kind) -> list[Formula]:
    if isinstance(f, kind):
        return _flat(f.left, kind) + _flat(f.right, kind)
    return [canonical(f)]


def subformulas(f: Formula) -> set[Formula]:
    out = {f}
    for name in getattr(f, "__dataclass_fields__", {}):
        v = getattr(f, name)
        if hasattr(v, "__dataclass_fields__"):
            out |= subformulas(v)
    return out


def propositions(f: Formula) -> set[str]:
    return {g.name for g in subformulas(f) if isinstance(g, Prop)}
