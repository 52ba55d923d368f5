"""Monitor/controller composition and closed-loop verification."""

import dataclasses
import random

import pytest

from trigsynth.casestudies import (
    knock_monitor,
    parity_even_spec,
    room_spec,
    two_bus_spec,
)
from trigsynth.expr import to_text
from trigsynth.ltl import TT, parse_ltl
from trigsynth.synth import ControllerError, MealyMachine, synthesize
from trigsynth.triggers import TriggerSpec
from trigsynth.compose import (
    CompiledController,
    compose,
    run_controller,
    verify_against_oracle,
)

f = frozenset


def knock_repeat_spec(n=2):
    return TriggerSpec(
        name="knock-repeat",
        inputs=frozenset({"knock"}),
        outputs=frozenset({"open"}),
        assumption=TT,
        monitor=knock_monitor(n),
        repeating=True,
        body=parse_ltl("open"),
    )


def always_machine(spec, outputs):
    return MealyMachine(
        inputs=tuple(sorted(spec.inputs)),
        outputs=tuple(sorted(spec.outputs)),
        states=("s0",),
        initial="s0",
        accepting=frozenset({"s0"}),
        transitions={},
        defaults={"s0": (frozenset(outputs), "s0")},
    )


class TestCompose:
    def test_parity_collapses_to_two_locations(self):
        spec = parity_even_spec()
        sc = compose(spec, synthesize(spec))
        assert sc.states == ("mon_watch", "ctl_s1")
        assert len(sc.transitions) == 2
        flag, back = sc.transitions
        assert flag.source == "mon_watch" and flag.target == "ctl_s1"
        assert flag.outputs == f({"p"}) and flag.fires_trigger and not flag.resets
        assert back.source == "ctl_s1" and back.target == "mon_watch"
        assert back.outputs == f() and back.resets and not back.fires_trigger

    def test_knock_repeat_folds_into_one_location(self):
        spec = knock_repeat_spec(2)
        sc = compose(spec, synthesize(spec))
        assert sc.states == ("mon_watch",)
        loop, fused = sc.transitions
        assert "counter != 2" in to_text(loop.guard)
        assert loop.outputs == f() and not loop.fires_trigger
        assert "counter == 2" in to_text(fused.guard)
        assert fused.outputs == f({"open"}) and fused.fires_trigger and fused.resets
        # the reset writes the initial variable values back
        assert [(a.target, to_text(a.value)) for a in fused.action] == [("counter", "1")]

    def test_knock_run_counts_resets_and_stutters(self):
        spec = knock_repeat_spec(2)
        sc = compose(spec, synthesize(spec))
        recs = run_controller(sc, [f({"knock"})] * 4)
        assert [sorted(r.outputs) for r in recs] == [[], ["open"], [], ["open"]]
        assert [r.fires_trigger for r in recs] == [False, True, False, True]
        assert [r.resets for r in recs] == [False, True, False, True]
        # knock-free events match no guard, so the machine stutters
        quiet = run_controller(sc, [f(), f({"knock"}), f(), f({"knock"})])
        assert [sorted(r.outputs) for r in quiet] == [[], [], [], ["open"]]

    def test_room_episode_walkthrough(self):
        spec = room_spec(2, 2)
        sc = compose(spec, synthesize(spec))
        inputs = [
            f({"inUse"}),
            f({"inUse"}),
            f(),
            f(),  # monitor flags here: used 2 steps, empty 2 steps
            f({"isClean"}),
            f(),
        ]
        recs = run_controller(sc, inputs)
        assert [r.fires_trigger for r in recs] == [False, False, False, True, False, False]
        assert recs[3].outputs == f({"clean", "doorLocked"})
        assert recs[4].outputs == f()
        assert recs[5].resets
        assert recs[5].state == "mon_used"

    def test_flag_locations_never_appear(self):
        for spec in [parity_even_spec(), knock_repeat_spec(2), room_spec()]:
            sc = compose(spec, synthesize(spec))
            flagging = {f"mon_{q}" for q in spec.monitor.flagging}
            assert not flagging & set(sc.states)
            assert all(t.target not in flagging for t in sc.transitions)

    def test_interchange_wildcard_composes_constant_size(self):
        sizes = set()
        for n in (4, 8, 12):
            spec = two_bus_spec(n, n)
            sc = compose(spec, always_machine(spec, {"ack"}))
            sizes.add((len(sc.states), len(sc.transitions)))
        assert sizes == {(1, 2)}

    def test_one_shot_keeps_the_accepting_state(self):
        spec = dataclasses.replace(parity_even_spec(), repeating=False)
        sc = compose(spec, synthesize(spec))
        assert "ctl_acc" in sc.states
        assert all(not t.resets for t in sc.transitions)
        recs = run_controller(sc, [f()] * 4)
        assert [sorted(r.outputs) for r in recs] == [["p"], [], [], []]
        assert recs[-1].state == "ctl_halt"

    def test_incomplete_machines_are_rejected(self):
        spec = parity_even_spec()
        broken = MealyMachine(
            inputs=("tick",),
            outputs=("p",),
            states=("s0",),
            initial="s0",
            accepting=frozenset(),
            transitions={("s0", f()): (f(), "s0")},
            defaults={},
        )
        with pytest.raises(ControllerError):
            compose(spec, broken)


class TestCompiledController:
    def test_step_matches_run_records(self):
        spec = room_spec()
        sc = compose(spec, synthesize(spec))
        cc = CompiledController(sc)
        rng = random.Random(9)
        state, val = cc.initial, cc.initial_val
        inputs = [
            frozenset(p for p in ("inUse", "isClean") if rng.random() < 0.5)
            for _ in range(30)
        ]
        recs = run_controller(sc, inputs)
        for i, rec in enumerate(recs):
            outputs, state, val, fires, resets = cc.step(state, val, inputs[i])
            assert (outputs, state, fires, resets) == (
                rec.outputs,
                rec.state,
                rec.fires_trigger,
                rec.resets,
            )


class TestVerifyAgainstOracle:
    def test_parity_runs_clean(self):
        spec = parity_even_spec()
        sc = compose(spec, synthesize(spec))
        report = verify_against_oracle(spec, sc, episodes=100, horizon=20, seed=5)
        assert report.closed == 100
        assert report.sat == 100 and report.clean
        assert report.vacuous == 0

    def test_room_runs_clean(self):
        spec = room_spec()
        sc = compose(spec, synthesize(spec))
        report = verify_against_oracle(spec, sc, episodes=100, horizon=40, seed=6)
        assert report.closed == 100 and report.clean
        assert report.vacuous == 0

    def test_two_bus_with_wildcard_controller_runs_clean(self):
        spec = two_bus_spec(3, 2)
        sc = compose(spec, always_machine(spec, {"ack"}))
        report = verify_against_oracle(spec, sc, episodes=100, horizon=40, seed=7)
        assert report.closed == 100 and report.clean

    def test_dropping_an_output_is_caught(self):
        spec = parity_even_spec()
        sc = compose(spec, synthesize(spec))
        flag = sc.transitions[0]
        broken = dataclasses.replace(sc, transitions=(
            dataclasses.replace(flag, outputs=frozenset()),
            sc.transitions[1],
        ))
        report = verify_against_oracle(spec, broken, episodes=50, horizon=20, seed=8)
        assert report.unsat > 0
        assert report.counterexamples
        trace, verdict = report.counterexamples[0]
        assert verdict.status == "unsat"
        assert trace.loop  # a genuine lasso was recorded
