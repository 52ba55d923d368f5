"""Monitor stepping semantics, validation, lints, and the compiled path."""

import random

import pytest

from genutil import random_monitor, random_trace
from trigsynth.casestudies import averaging_monitor, knock_monitor, room_monitor
from trigsynth.expr import (
    Assignment,
    BoolLit,
    BoolOp,
    Compare,
    EvalError,
    InEvent,
    IntLit,
    Var,
    VarDecl,
)
from trigsynth.monitor import (
    CompiledMonitor,
    Configuration,
    Dead,
    Flagged,
    Monitor,
    MonitorTransition,
    Pending,
    immediate_monitor,
    initial_configuration,
    lint,
    run,
    step,
    validate,
)


def test_knock_single_step_flags_when_target_reached():
    m = knock_monitor(1)
    c = initial_configuration(m)
    assert c.state == "watch" and c.val == {"counter": 1}
    after = step(m, c, frozenset({"knock"}))
    assert after.state == "hit"
    assert after.val == {"counter": 1}, "flagging transition carries no update"


def test_knock_counts_to_n():
    m = knock_monitor(2)
    assert run(m, [frozenset({"knock"}), frozenset({"knock"})]) == Flagged(1)
    r = run(m, [frozenset({"knock"})])
    assert isinstance(r, Pending) and r.valuation == {"counter": 2}
    # silence stutters: knocks separated by quiet steps still count
    trace = [frozenset({"knock"}), frozenset(), frozenset(), frozenset({"knock"})]
    assert run(m, trace) == Flagged(3)


def test_stutter_keeps_configuration():
    m = knock_monitor(3)
    c = initial_configuration(m)
    after = step(m, c, frozenset())
    assert after.state == c.state and after.val == c.val
    after.val["counter"] = 99
    assert c.val["counter"] == 1, "stutter returns a fresh configuration"


def test_flagging_state_falls_into_sink_with_valuation_kept():
    m = knock_monitor(1)
    c = Configuration("hit", {"counter": 7})
    after = step(m, c, frozenset())
    assert after.state == "stop" and after.val == {"counter": 7}
    again = step(m, after, frozenset({"knock"}))
    assert again.state == "stop", "sink is absorbing"


def test_explicit_sink_transition_reports_dead():
    m = Monitor(
        inputs=frozenset({"a"}),
        vars=(),
        states=frozenset({"s", "hit", "bot"}),
        initial="s",
        flagging=frozenset({"hit"}),
        sink="bot",
        transitions=(
            MonitorTransition("s", InEvent("a"), (), "hit"),
            MonitorTransition("s", BoolLit(True), (), "bot"),
        ),
    )
    r = run(m, [frozenset(), frozenset({"a"})])
    assert r == Dead(0, {})
    assert run(m, [frozenset({"a"})]) == Flagged(0)


def test_first_enabled_transition_wins():
    m = Monitor(
        inputs=frozenset({"a"}),
        vars=(VarDecl("x", "int", 0),),
        states=frozenset({"s", "hit", "bot"}),
        initial="s",
        flagging=frozenset({"hit"}),
        sink="bot",
        transitions=(
            MonitorTransition("s", BoolLit(True), (Assignment("x", IntLit(1)),), "s"),
            MonitorTransition("s", BoolLit(True), (Assignment("x", IntLit(2)),), "s"),
        ),
    )
    after = step(m, initial_configuration(m), frozenset())
    assert after.val["x"] == 1
    assert any("overlap" in w for w in lint(m))


def test_averaging_monitor_flags_when_rate_drops():
    m = averaging_monitor(0)
    e = frozenset({"e"})
    q = frozenset()
    # rates before each event: 1/1, 2/2, then 2/3 = 0 which flags
    assert run(m, [e, q, q]) == Flagged(2)
    assert isinstance(run(m, [e, e, e, e]), Pending)


def test_room_monitor_use_then_empty():
    m = room_monitor(2, 2)
    use = frozenset({"inUse"})
    q = frozenset()
    assert run(m, [use, use, q, q]) == Flagged(3)
    # renewed use inside the empty period resets the empty counter
    assert run(m, [use, use, q, use, q, q]) == Flagged(5)
    # not used long enough: the single-use event only advances the counter
    assert isinstance(run(m, [use, q, q, q]), Pending)


def test_event_with_undeclared_prop_rejected():
    m = knock_monitor(1)
    with pytest.raises(EvalError):
        run(m, [frozenset({"mystery"})])


def test_immediate_monitor():
    m = immediate_monitor(["a", "b"])
    assert validate(m) == []
    assert run(m, [frozenset()]) == Flagged(0)
    assert run(m, [frozenset({"b"})]) == Flagged(0)
    assert isinstance(run(m, []), Pending)


def test_validate_catches_structural_errors():
    base = knock_monitor(2)
    ok = validate(base)
    assert ok == []

    bad = Monitor(
        inputs=frozenset({"a"}),
        vars=(VarDecl("x", "int", True),),
        states=frozenset({"s", "bot"}),
        initial="s",
        flagging=frozenset({"s"}),
        sink="bot",
        transitions=(
            MonitorTransition("bot", BoolLit(True), (), "s"),
            MonitorTransition("s", IntLit(3), (), "ghost"),
            MonitorTransition("s", InEvent("zz"), (), "s"),
        ),
    )
    msgs = "\n".join(validate(bad))
    assert "initial state cannot be a flagging state" in msgs
    assert "sink has no outgoing transitions" in msgs
    assert "unknown target state" in msgs
    assert "guard is not boolean" in msgs
    assert "not a declared input" in msgs
    assert "starts at" in msgs


def test_divisor_zero_lint():
    m = Monitor(
        inputs=frozenset({"a"}),
        vars=(VarDecl("x", "int", 0),),
        states=frozenset({"s", "hit", "bot"}),
        initial="s",
        flagging=frozenset({"hit"}),
        sink="bot",
        transitions=(
            MonitorTransition(
                "s",
                Compare(">", __import__("trigsynth.expr", fromlist=["Arith"]).Arith("/", IntLit(4), Var("x")), IntLit(0)),
                (),
                "hit",
            ),
        ),
    )
    assert any("divisor" in w for w in lint(m))
    assert not any("divisor" in w for w in lint(averaging_monitor(0)))


def test_flag_at_most_once_and_prefix_stability():
    rng = random.Random(7)
    for _ in range(60):
        m = random_monitor(rng)
        assert validate(m) == []
        for _ in range(10):
            t = random_trace(rng, max_len=16)
            r = run(m, t)
            if isinstance(r, Flagged):
                j = r.index
                for k in range(j + 1, len(t) + 1):
                    assert run(m, t[:k]) == Flagged(j)
                ext = t + random_trace(rng, max_len=4)
                assert run(m, ext) == Flagged(j)


def test_compiled_monitor_matches_interpreter():
    rng = random.Random(21)
    for _ in range(40):
        m = random_monitor(rng)
        cm = CompiledMonitor(m)
        for _ in range(8):
            t = random_trace(rng, max_len=12)
            assert cm.run(t) == run(m, t)


def test_compiled_step_matches_interpreted_step():
    m = room_monitor(2, 3)
    cm = CompiledMonitor(m)
    rng = random.Random(5)
    c = initial_configuration(m)
    s, v = cm.initial, cm.initial_val
    for _ in range(40):
        ev = frozenset(p for p in ("inUse", "isClean") if rng.random() < 0.5)
        c = step(m, c, ev)
        s, v = cm.step(s, v, ev)
        assert (c.state, c.val) == (s, dict(v))
