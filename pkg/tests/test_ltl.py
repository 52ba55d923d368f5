"""Temporal logic: parsing, normal form, fragments, evaluation, tightness."""

import random

import pytest

from genutil import random_cosafety, random_formula, random_lasso
from trigsynth.ltl import (
    FF,
    TT,
    Always,
    And,
    Eventually,
    Fragment,
    Iff,
    Implies,
    LassoTrace,
    LtlError,
    LtlParseError,
    Neg,
    Next,
    Or,
    Prop,
    Until,
    WeakUntil,
    canonical,
    classify,
    eval_finite,
    eval_lasso,
    is_cosafety,
    is_valid_assumption,
    normalize,
    parse_ltl,
    progress,
    propositions,
    tight_sat,
    to_text,
)


# Quantifier-style reference semantics, deliberately different in shape from
# the implementation (explicit exists/forall instead of scanning).
def ref_finite(f, t, i, j):
    name = type(f).__name__
    if name == "Tt":
        return True
    if name == "Ff":
        return False
    if name == "Prop":
        return f.name in t[i]
    if name == "Neg":
        return not ref_finite(f.operand, t, i, j)
    if name == "And":
        return ref_finite(f.left, t, i, j) and ref_finite(f.right, t, i, j)
    if name == "Or":
        return ref_finite(f.left, t, i, j) or ref_finite(f.right, t, i, j)
    if name == "Implies":
        return (not ref_finite(f.left, t, i, j)) or ref_finite(f.right, t, i, j)
    if name == "Iff":
        return ref_finite(f.left, t, i, j) == ref_finite(f.right, t, i, j)
    if name == "Next":
        return j > i and ref_finite(f.operand, t, i + 1, j)
    if name in ("Until", "WeakUntil"):
        return any(
            ref_finite(f.right, t, l, j)
            and all(ref_finite(f.left, t, k, j) for k in range(i, l))
            for l in range(i, j + 1)
        )
    if name == "Always":
        return False
    if name == "Eventually":
        return any(ref_finite(f.operand, t, l, j) for l in range(i, j + 1))
    raise AssertionError(name)


E = lambda *ps: frozenset(ps)


class TestParsing:
    def test_precedence(self):
        assert parse_ltl("a -> b | c") == Implies(Prop("a"), Or(Prop("b"), Prop("c")))
        assert parse_ltl("a & b | c") == Or(And(Prop("a"), Prop("b")), Prop("c"))
        assert parse_ltl("X a U b") == Until(Next(Prop("a")), Prop("b"))
        assert parse_ltl("a U b U c") == Until(Prop("a"), Until(Prop("b"), Prop("c")))
        assert parse_ltl("!a & b") == And(Neg(Prop("a")), Prop("b"))
        assert parse_ltl("G (a -> X b)") == Always(Implies(Prop("a"), Next(Prop("b"))))
        assert parse_ltl("a <-> b -> c") == Iff(Prop("a"), Implies(Prop("b"), Prop("c")))
        assert parse_ltl("F g & h") == And(Eventually(Prop("g")), Prop("h"))
        assert parse_ltl("a W b") == WeakUntil(Prop("a"), Prop("b"))
        assert parse_ltl("tt") == TT and parse_ltl("ff") == FF

    def test_errors(self):
        for bad in ["a &", "(a", "a b", "U a", "a !b", ""]:
            with pytest.raises(LtlParseError):
                parse_ltl(bad)

    def test_round_trip(self):
        rng = random.Random(3)
        for _ in range(300):
            f = random_formula(rng, depth=4)
            assert parse_ltl(to_text(f)) == f


class TestNormalize:
    def test_shape(self):
        rng = random.Random(11)
        banned = (Implies, Iff, WeakUntil, Eventually)
        for _ in range(200):
            g = normalize(random_formula(rng, depth=4))
            stack = [g]
            while stack:
                n = stack.pop()
                assert not isinstance(n, banned)
                if isinstance(n, Neg):
                    assert isinstance(n.operand, Prop), "negation only on propositions"
                for field in getattr(n, "__dataclass_fields__", {}):
                    v = getattr(n, field)
                    if hasattr(v, "__dataclass_fields__"):
                        stack.append(v)

    def test_preserves_lasso_semantics(self):
        rng = random.Random(13)
        for _ in range(400):
            f = random_formula(rng, depth=3)
            t = random_lasso(rng)
            assert eval_lasso(f, t) == eval_lasso(normalize(f), t)

    def test_preserves_finite_semantics_without_negated_temporal(self):
        # Strict X is not self-dual on finite windows (!X tt holds on a
        # one-event window, X !tt does not), so normal form is an
        # infinite-trace equivalence. Negation-free formulas are safe.
        assert eval_finite(parse_ltl("!(X tt)"), [frozenset()], 0, 0) is True
        assert eval_finite(normalize(parse_ltl("!(X tt)")), [frozenset()], 0, 0) is False
        rng = random.Random(17)
        for _ in range(400):
            f = random_cosafety(rng, depth=3)
            t = [
                frozenset(p for p in "abc" if rng.random() < 0.5)
                for _ in range(rng.randint(1, 6))
            ]
            assert eval_finite(f, t, 0, len(t) - 1) == eval_finite(
                normalize(f), t, 0, len(t) - 1
            )


class TestClassify:
    def test_examples(self):
        assert classify(parse_ltl("a U (b & X c)")) is Fragment.COSAFETY
        assert classify(parse_ltl("G (a | X b) & G F c")) is Fragment.ASSUMPTION
        assert classify(parse_ltl("G F (a & X b)")) is Fragment.GENERAL
        assert classify(parse_ltl("a & !b")) is Fragment.BOOLEAN
        assert classify(parse_ltl("a | X b")) is Fragment.STEP_BOOLEAN
        assert classify(parse_ltl("G (a -> X b)")) is Fragment.ASSUMPTION
        assert classify(parse_ltl("F (a & F b)")) is Fragment.COSAFETY
        assert classify(parse_ltl("G F a & G (b | c)")) is Fragment.ASSUMPTION
        assert classify(parse_ltl("a U b | G a")) is Fragment.GENERAL

    def test_cosafety_accepts_every_g_free_tag(self):
        for text in ["a", "a | X b", "a U b"]:
            assert is_cosafety(parse_ltl(text))
        assert not is_cosafety(parse_ltl("G a"))
        # negation can hide or introduce G
        assert is_cosafety(parse_ltl("!(a W ff)"))
        assert not is_cosafety(parse_ltl("!(a U b)"))

    def test_assumption_validity(self):
        assert is_valid_assumption(parse_ltl("tt"))
        assert is_valid_assumption(parse_ltl("G (a -> X b) & G F c"))
        assert not is_valid_assumption(parse_ltl("F a"))
        assert not is_valid_assumption(parse_ltl("G (a U b)"))


class TestFiniteEval:
    def test_hand_examples(self):
        t = [E("a"), E("b")]
        assert eval_finite(parse_ltl("a & X b"), t, 0, 1) is True
        assert eval_finite(parse_ltl("X tt"), t, 0, 1) is True
        assert eval_finite(parse_ltl("X tt"), t, 0, 0) is False
        assert eval_finite(parse_ltl("G a"), [E("a")] * 5, 0, 4) is False
        assert eval_finite(parse_ltl("a U b"), [E("a"), E("a"), E("b")], 0, 2) is True
        assert eval_finite(parse_ltl("a U b"), [E("a"), E(), E("b")], 0, 2) is False
        assert eval_finite(parse_ltl("F b"), [E("a"), E(), E("b")], 0, 2) is True
        assert eval_finite(parse_ltl("a W b"), [E("a"), E("a")], 0, 1) is False

    def test_window_bounds_checked(self):
        with pytest.raises(LtlError):
            eval_finite(TT, [E()], 1, 0)
        with pytest.raises(LtlError):
            eval_finite(TT, [E()], 0, 1)

    def test_against_reference(self):
        rng = random.Random(23)
        for _ in range(500):
            f = random_formula(rng, depth=3)
            t = [
                frozenset(p for p in "abc" if rng.random() < 0.5)
                for _ in range(rng.randint(1, 6))
            ]
            i = rng.randrange(len(t))
            j = rng.randrange(i, len(t))
            assert eval_finite(f, t, i, j) == ref_finite(f, t, i, j)

    def test_cosafety_persists_under_window_growth(self):
        rng = random.Random(29)
        hits = 0
        for _ in range(600):
            f = random_cosafety(rng, depth=3)
            t = [
                frozenset(p for p in "abc" if rng.random() < 0.5)
                for _ in range(rng.randint(1, 5))
            ]
            if eval_finite(f, t, 0, len(t) - 1):
                hits += 1
                ext = t + [frozenset(p for p in "abc" if rng.random() < 0.5)] * 3
                for j in range(len(t) - 1, len(ext)):
                    assert eval_finite(f, ext, 0, j)
        assert hits > 50


class TestLassoEval:
    def test_alternating(self):
        t = LassoTrace((E("p"),), (E(), E("p")))
        assert eval_lasso(parse_ltl("G (p <-> ! X p)"), t) is True
        assert eval_lasso(parse_ltl("G F p"), t) is True
        assert eval_lasso(parse_ltl("F G p"), t) is False

    def test_globally_eventually(self):
        t = LassoTrace((), (E("a"), E()))
        assert eval_lasso(parse_ltl("G F a"), t)
        assert not eval_lasso(parse_ltl("G a"), t)
        assert eval_lasso(parse_ltl("G a"), LassoTrace((E(),), (E("a"),))) is False
        assert eval_lasso(parse_ltl("X G a"), LassoTrace((E(),), (E("a"),))) is True

    def test_shift_agrees_with_suffix(self):
        rng = random.Random(31)
        for _ in range(300):
            t = random_lasso(rng)
            f = random_formula(rng, depth=3)
            j = rng.randrange(0, t.positions + 3)
            shifted = t.shift(j)
            # brute force: the shifted trace events equal the suffix events
            for k in range(12):
                assert shifted.event(k) == t.event(j + k)
            assert eval_lasso(f, shifted) == eval_lasso(f, t.shift(j))

    def test_cosafety_on_lasso_means_some_finite_witness(self):
        rng = random.Random(37)
        for _ in range(250):
            f = random_cosafety(rng, depth=3)
            t = random_lasso(rng, max_prefix=4, max_loop=3)
            horizon = t.positions + 2 * len(t.loop) + 3
            unrolled = t.unroll(horizon)
            witnessed = any(
                eval_finite(f, unrolled, 0, k) for k in range(horizon)
            )
            if witnessed:
                assert eval_lasso(f, t)


class TestTight:
    def test_hand_examples(self):
        P = E("p")
        assert tight_sat(parse_ltl("X tt"), [P, P]) is True
        assert tight_sat(parse_ltl("X tt"), [P]) is False
        assert tight_sat(parse_ltl("X tt"), [P, P, P]) is False
        t = [E("a"), E("a", "b"), E("b")]
        assert tight_sat(parse_ltl("a U b"), t) is False, "a shorter prefix satisfies"
        assert tight_sat(parse_ltl("a U b"), t[:2]) is True
        assert tight_sat(parse_ltl("p & X tt"), [P, E()]) is True

    def test_at_most_one_tight_prefix(self):
        rng = random.Random(41)
        for _ in range(300):
            f = random_cosafety(rng, depth=3)
            t = [
                frozenset(p for p in "abc" if rng.random() < 0.5)
                for _ in range(rng.randint(1, 7))
            ]
            count = sum(tight_sat(f, t[: k + 1]) for k in range(len(t)))
            assert count <= 1

    def test_empty_trace_rejected(self):
        with pytest.raises(LtlError):
            tight_sat(TT, [])


class TestProgress:
    def test_residual_chain_matches_direct_eval(self):
        rng = random.Random(43)
        for _ in range(400):
            f = normalize(random_cosafety(rng, depth=3))
            t = [
                frozenset(p for p in "abc" if rng.random() < 0.5)
                for _ in range(rng.randint(1, 6))
            ]
            residual = f
            for e in t[:-1]:
                residual = canonical(progress(residual, e))
            assert eval_finite(residual, t[-1:], 0, 0) == eval_finite(
                f, t, 0, len(t) - 1
            )

    def test_ff_residual_means_no_extension_satisfies(self):
        f = normalize(parse_ltl("p & X tt"))
        assert progress(f, frozenset()) == FF
        f2 = normalize(parse_ltl("a U b"))
        assert progress(f2, frozenset()) == FF
        assert progress(f2, frozenset({"a"})) == f2

    def test_canonical_preserves_semantics_and_is_idempotent(self):
        rng = random.Random(47)
        for _ in range(200):
            f = normalize(random_cosafety(rng, depth=3))
            c = canonical(f)
            assert canonical(c) == c
            t = [
                frozenset(p for p in "abc" if rng.random() < 0.5)
                for _ in range(rng.randint(1, 5))
            ]
            assert eval_finite(f, t, 0, len(t) - 1) == eval_finite(c, t, 0, len(t) - 1)

    def test_propositions(self):
        assert propositions(parse_ltl("a U (b & X !c)")) == {"a", "b", "c"}
