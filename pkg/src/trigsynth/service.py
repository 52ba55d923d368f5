"""HTTP service around the toolchain.

One endpoint per CLI verb (check, synthesize, eval-trace, export, verify)
plus a session store for interactive simulation. The CLI talks to this app
in process by default, so the service is the single integration surface;
request and response bodies are plain JSON throughout.
"""

from __future__ import annotations

import secrets
from typing import Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .compose import CompiledController, SymbolicController, compose, verify_against_oracle
from .formats import (
    CONTROLLER_KIND,
    FormatError,
    MEALY_KIND,
    controller_to_dot,
    controller_to_text,
    mealy_to_dot,
    mealy_to_text,
    monitor_to_dot,
    parse_controller,
    parse_mealy,
    parse_spec,
    parse_trace,
    sniff_kind,
    trace_to_text,
)
from .ltl import to_text as ltl_to_text
from .monitor import lint
from .synth import UNREALISABLE_CAVEAT, synthesize
from .triggers import TriggerSpec, oracle, reduced_formula, validate_spec


class SpecPayload(BaseModel):
    spec_text: str
    params: dict[str, int] = Field(default_factory=dict)
    name: str | None = None


class CheckResponse(BaseModel):
    name: str
    valid: bool
    errors: list[str] = Field(default_factory=list)
    warnings: list[str] = Field(default_factory=list)
    repeating: bool | None = None
    inputs: list[str] = Field(default_factory=list)
    outputs: list[str] = Field(default_factory=list)
    reduced_formula: str | None = None


class SynthesizeRequest(SpecPayload):
    backend: Literal["builtin", "interchange"] = "builtin"
    controller_json: str | None = None
    include_dot: bool = False


class SynthesizeResponse(BaseModel):
    name: str
    controller_json: str
    dot: str | None = None
    locations: int
    transitions: int


class EvalTraceRequest(SpecPayload):
    trace_text: str
    bound: int | None = None


class EvalTraceResponse(BaseModel):
    status: Literal["sat", "unsat", "unknown"]
    flags: list[int]
    windows: list[tuple[int, int]]
    reason: str


class ExportRequest(BaseModel):
    text: str
    format: Literal["dot", "interchange"]
    name: str | None = None
    params: dict[str, int] = Field(default_factory=dict)


class ExportResponse(BaseModel):
    kind: str
    content: str


class VerifyRequest(SynthesizeRequest):
    episodes: int = 100
    horizon: int = 40
    seed: int = 0


class Counterexample(BaseModel):
    prefix: list[list[str]]
    loop: list[list[str]]
    status: str
    reason: str


class VerifyResponse(BaseModel):
    name: str
    episodes: int
    closed: int
    open: int
    sat: int
    unsat: int
    unknown: int
    vacuous: int
    clean: bool
    counterexamples: list[Counterexample]


class SimulationCreate(BaseModel):
    controller_json: str


class SimulationView(BaseModel):
    id: str
    state: str
    valuation: dict[str, int | bool]
    inputs: list[str]
    outputs: list[str]
    steps: int


class SimulationStepRequest(BaseModel):
    inputs: list[str] = Field(default_factory=list)


class SimulationStepResponse(BaseModel):
    state: str
    valuation: dict[str, int | bool]
    outputs: list[str]
    fires_trigger: bool
    resets: bool
    steps: int


class _Simulation:
    def __init__(self, sid: str, sc: SymbolicController):
        self.id = sid
        self.sc = sc
        self.cc = CompiledController(sc)
        self.state = self.cc.initial
        self.val = dict(self.cc.initial_val)
        self.steps = 0

    def view(self) -> SimulationView:
        return SimulationView(
            id=self.id,
            state=self.state,
            valuation=dict(self.val),
            inputs=sorted(self.sc.inputs),
            outputs=sorted(self.sc.outputs),
            steps=self.steps,
        )


def _bad_request(message) -> HTTPException:
    return HTTPException(status_code=400, detail=message)


def _load_spec(payload: SpecPayload) -> TriggerSpec:
    """Parse and validate, turning any problem into a 400 with details."""
    try:
        spec = parse_spec(payload.spec_text, params=payload.params, name=payload.name)
    except FormatError as exc:
        raise _bad_request({"errors": [str(exc)]}) from exc
    errors = validate_spec(spec)
    if errors:
        raise _bad_request({"errors": errors})
    return spec


def _machine_for(spec: TriggerSpec, req: SynthesizeRequest):
    if req.backend == "interchange":
        if not req.controller_json:
            raise _bad_request("the interchange backend needs 'controller_json'")
        try:
            return parse_mealy(req.controller_json)
        except FormatError as exc:
            raise _bad_request({"errors": [str(exc)]}) from exc
    try:
        machine = synthesize(spec)
    except ValueError as exc:
        raise _bad_request({"errors": [str(exc)]}) from exc
    if machine is None:
        raise HTTPException(
            status_code=422,
            detail={
                "reason": UNREALISABLE_CAVEAT,
                "formula": ltl_to_text(reduced_formula(spec)),
            },
        )
    return machine


def create_app() -> FastAPI:
    app = FastAPI(title="trigsynth", version=__version__)
    simulations: dict[str, _Simulation] = {}

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/check", response_model=CheckResponse)
    def check(payload: SpecPayload) -> CheckResponse:
        try:
            spec = parse_spec(payload.spec_text, params=payload.params, name=payload.name)
        except FormatError as exc:
            return CheckResponse(
                name=payload.name or "untitled", valid=False, errors=[str(exc)]
            )
        errors = validate_spec(spec)
        if errors:
            return CheckResponse(name=spec.name, valid=False, errors=errors)
        return CheckResponse(
            name=spec.name,
            valid=True,
            warnings=lint(spec.monitor),
            repeating=spec.repeating,
            inputs=sorted(spec.inputs),
            outputs=sorted(spec.outputs),
            reduced_formula=ltl_to_text(reduced_formula(spec)),
        )

    @app.post("/synthesize", response_model=SynthesizeResponse)
    def synthesize_endpoint(req: SynthesizeRequest) -> SynthesizeResponse:
        spec = _load_spec(req)
        machine = _machine_for(spec, req)
        try:
            sc = compose(spec, machine)
        except Exception as exc:
            raise _bad_request({"errors": [str(exc)]}) from exc
        return SynthesizeResponse(
            name=spec.name,
            controller_json=controller_to_text(sc),
            dot=controller_to_dot(sc, spec.name) if req.include_dot else None,
            locations=len(sc.states),
            transitions=len(sc.transitions),
        )

    @app.post("/eval-trace", response_model=EvalTraceResponse)
    def eval_trace(req: EvalTraceRequest) -> EvalTraceResponse:
        spec = _load_spec(req)
        try:
            trace = parse_trace(req.trace_text)
        except FormatError as exc:
            raise _bad_request({"errors": [str(exc)]}) from exc
        try:
            verdict = oracle(spec, trace, bound=req.bound)
        except ValueError as exc:
            raise _bad_request({"errors": [str(exc)]}) from exc
        return EvalTraceResponse(
            status=verdict.status,
            flags=list(verdict.flags),
            windows=[tuple(w) for w in verdict.windows],
            reason=verdict.reason,
        )

    @app.post("/export", response_model=ExportResponse)
    def export(req: ExportRequest) -> ExportResponse:
        try:
            kind = sniff_kind(req.text)
        except FormatError as exc:
            raise _bad_request({"errors": [str(exc)]}) from exc
        try:
            if kind == "spec":
                spec = parse_spec(req.text, params=req.params, name=req.name)
                if req.format == "dot":
                    return ExportResponse(
                        kind=kind, content=monitor_to_dot(spec.monitor, spec.name)
                    )
                raise _bad_request("interchange export needs a controller document")
            if kind == MEALY_KIND:
                mm = parse_mealy(req.text)
                content = (
                    mealy_to_dot(mm, req.name or "controller")
                    if req.format == "dot"
                    else mealy_to_text(mm)
                )
                return ExportResponse(kind=kind, content=content)
            if kind == CONTROLLER_KIND:
                sc = parse_controller(req.text)
                if req.format == "dot":
                    return ExportResponse(
                        kind=kind, content=controller_to_dot(sc, req.name or "controller")
                    )
                raise _bad_request(
                    "a composed controller has symbolic guards; "
                    "interchange export applies to plain controller tables"
                )
            # trace documents re-export canonically, dot makes no sense
            if req.format == "dot":
                raise _bad_request("a trace has no graph to draw")
            return ExportResponse(kind=kind, content=trace_to_text(parse_trace(req.text)))
        except FormatError as exc:
            raise _bad_request({"errors": [str(exc)]}) from exc

    @app.post("/verify", response_model=VerifyResponse)
    def verify(req: VerifyRequest) -> VerifyResponse:
        spec = _load_spec(req)
        machine = _machine_for(spec, req)
        try:
            sc = compose(spec, machine)
        except Exception as exc:
            raise _bad_request({"errors": [str(exc)]}) from exc
        report = verify_against_oracle(
            spec, sc, episodes=req.episodes, horizon=req.horizon, seed=req.seed
        )
        return VerifyResponse(
            name=spec.name,
            episodes=report.episodes,
            closed=report.closed,
            open=report.open,
            sat=report.sat,
            unsat=report.unsat,
            unknown=report.unknown,
            vacuous=report.vacuous,
            clean=report.clean,
            counterexamples=[
                Counterexample(
                    prefix=[sorted(e) for e in lasso.prefix],
                    loop=[sorted(e) for e in lasso.loop],
                    status=verdict.status,
                    reason=verdict.reason,
                )
                for lasso, verdict in report.counterexamples
            ],
        )

    @app.post("/simulations", response_model=SimulationView, status_code=201)
    def create_simulation(req: SimulationCreate) -> SimulationView:
        try:
            sc = parse_controller(req.controller_json)
        except FormatError as exc:
            raise _bad_request({"errors": [str(exc)]}) from exc
        sid = secrets.token_hex(8)
        sim = _Simulation(sid, sc)
        simulations[sid] = sim
        return sim.view()

    def _get_simulation(sid: str) -> _Simulation:
        sim = simulations.get(sid)
        if sim is None:
            raise HTTPException(status_code=404, detail=f"no simulation '{sid}'")
        return sim

    @app.get("/simulations/{sid}", response_model=SimulationView)
    def show_simulation(sid: str) -> SimulationView:
        return _get_simulation(sid).view()

    @app.post("/simulations/{sid}/step", response_model=SimulationStepResponse)
    def step_simulation(sid: str, req: SimulationStepRequest) -> SimulationStepResponse:
        sim = _get_simulation(sid)
        unknown = sorted(set(req.inputs) - sim.sc.inputs)
        if unknown:
            raise _bad_request(f"unknown input propositions: {', '.join(unknown)}")
        outputs, state, val, fires, resets = sim.cc.step(
            sim.state, sim.val, frozenset(req.inputs)
        )
        sim.state, sim.val = state, dict(val)
        sim.steps += 1
        return SimulationStepResponse(
            state=state,
            valuation=dict(val),
            outputs=sorted(outputs),
            fires_trigger=fires,
            resets=resets,
            steps=sim.steps,
        )

    @app.delete("/simulations/{sid}")
    def delete_simulation(sid: str) -> dict:
        _get_simulation(sid)
        del simulations[sid]
        return {"deleted": sid}

    return app


app = create_app()
