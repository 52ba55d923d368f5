"""Command-line front end.

Every verb is a thin client over the HTTP service: by default an in-process
app instance, with --server pointing the same commands at a running one.
Exit codes: 0 ok, 1 invalid spec or failed verification, 2 unrealisable
goal, 3 I/O or backend trouble.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import sys
from pathlib import Path

import click
import httpx

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_UNREALISABLE = 2
EXIT_IO = 3


class Service:
    """Uniform .post/.get/.delete against a local or remote app."""

    def __init__(self, server: str | None):
        if server is None:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service import create_app

            self._http = TestClient(create_app())
        else:
            self._http = httpx.Client(base_url=server, timeout=300.0)

    def _call(self, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except httpx.HTTPError as exc:
            click.echo(f"service unreachable: {exc}", err=True)
            sys.exit(EXIT_IO)

    def post(self, path: str, payload: dict):
        return self._call(self._http.post, path, json=payload)

    def get(self, path: str):
        return self._call(self._http.get, path)

    def delete(self, path: str):
        return self._call(self._http.delete, path)


def _read_file(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        click.echo(f"cannot read {path}: {exc}", err=True)
        sys.exit(EXIT_IO)


def _write_file(path: str, content: str) -> None:
    try:
        Path(path).write_text(content)
    except OSError as exc:
        click.echo(f"cannot write {path}: {exc}", err=True)
        sys.exit(EXIT_IO)


def _parse_params(pairs: tuple[str, ...]) -> dict[str, int]:
    params: dict[str, int] = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        try:
            params[name] = int(value)
        except ValueError:
            sep = ""
        if not sep or not name:
            click.echo(f"bad --param '{pair}', expected name=integer", err=True)
            sys.exit(EXIT_INVALID)
    return params


def _expect_ok(resp) -> dict:
    """Return the JSON body on success, otherwise exit with the mapped code."""
    if resp.status_code < 300:
        return resp.json()
    try:
        detail = resp.json().get("detail")
    except ValueError:
        detail = resp.text
    if resp.status_code == 422 and isinstance(detail, dict) and "reason" in detail:
        click.echo(f"unrealisable: {detail['reason']}", err=True)
        if detail.get("formula"):
            click.echo(f"goal: {detail['formula']}", err=True)
        sys.exit(EXIT_UNREALISABLE)
    if isinstance(detail, dict) and "errors" in detail:
        for err in detail["errors"]:
            click.echo(f"error: {err}", err=True)
    else:
        click.echo(f"error: {detail}", err=True)
    sys.exit(EXIT_INVALID)


def _resolve_backend(svc: Service, backend: str, payload: dict) -> None:
    """Fill the synthesis payload's backend fields.

    builtin            use the service's own game solver
    external:<file>    a pre-produced interchange controller (JSON file)
    external:<command> run the command with the reduced goal formula and the
                       input/output proposition lists appended as arguments;
                       it must print an interchange controller on stdout
    """
    if backend == "builtin":
        payload["backend"] = "builtin"
        return
    if not backend.startswith("external:"):
        click.echo(
            f"unknown backend '{backend}'; use builtin or external:<command-or-file>",
            err=True,
        )
        sys.exit(EXIT_INVALID)
    ref = backend[len("external:") :].strip()
    if not ref:
        click.echo("empty external backend reference", err=True)
        sys.exit(EXIT_INVALID)

    controller_json: str | None = None
    if os.path.isfile(ref):
        content = _read_file(ref)
        if content.lstrip().startswith("{"):
            controller_json = content
    if controller_json is None:
        info = _expect_ok(
            svc.post(
                "/check",
                {k: payload[k] for k in ("spec_text", "params", "name")},
            )
        )
        if not info["valid"]:
            for err in info["errors"]:
                click.echo(f"error: {err}", err=True)
            sys.exit(EXIT_INVALID)
        argv = shlex.split(ref) + [
            info["reduced_formula"],
            ",".join(info["inputs"]),
            ",".join(info["outputs"]),
        ]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=300)
        except (OSError, subprocess.TimeoutExpired) as exc:
            click.echo(f"backend command failed: {exc}", err=True)
            sys.exit(EXIT_IO)
        if proc.returncode != 0:
            click.echo(
                f"backend command exited {proc.returncode}: {proc.stderr.strip()}",
                err=True,
            )
            sys.exit(EXIT_IO)
        controller_json = proc.stdout
    payload["backend"] = "interchange"
    payload["controller_json"] = controller_json


def _spec_payload(spec_path: str, param: tuple[str, ...]) -> dict:
    return {
        "spec_text": _read_file(spec_path),
        "params": _parse_params(param),
        "name": Path(spec_path).stem,
    }


_server_option = click.option(
    "--server", default=None, metavar="URL", help="Use a running service at URL."
)
_param_option = click.option(
    "--param",
    multiple=True,
    metavar="NAME=INT",
    help="Bind an integer parameter (repeatable).",
)


@click.group()
def main() -> None:
    """Compile monitor-triggered temporal specifications into controllers."""


@main.command()
@click.argument("spec_path", type=click.Path())
@_param_option
@_server_option
def check(spec_path: str, param: tuple[str, ...], server: str | None) -> None:
    """Parse and validate a spec file."""
    svc = Service(server)
    body = _expect_ok(svc.post("/check", _spec_payload(spec_path, param)))
    if not body["valid"]:
        for err in body["errors"]:
            click.echo(f"error: {err}", err=True)
        sys.exit(EXIT_INVALID)
    for warning in body["warnings"]:
        click.echo(f"warning: {warning}")
    mode = "repeat" if body["repeating"] else "once"
    click.echo(
        f"ok: {body['name']} ({mode} trigger, "
        f"inputs {' '.join(body['inputs'])}, outputs {' '.join(body['outputs'])})"
    )
    click.echo(f"goal: {body['reduced_formula']}")


@main.command()
@click.argument("spec_path", type=click.Path())
@click.option(
    "--backend",
    default="builtin",
    metavar="NAME",
    help="builtin, or external:<command-or-file>.",
)
@click.option("--out", default=None, type=click.Path(), help="Write the controller here.")
@click.option("--dot", default=None, type=click.Path(), help="Also write a DOT rendering.")
@_param_option
@_server_option
def synthesize(
    spec_path: str,
    backend: str,
    out: str | None,
    dot: str | None,
    param: tuple[str, ...],
    server: str | None,
) -> None:
    """Synthesize a composed controller from a spec file."""
    svc = Service(server)
    payload = _spec_payload(spec_path, param)
    _resolve_backend(svc, backend, payload)
    payload["include_dot"] = dot is not None
    body = _expect_ok(svc.post("/synthesize", payload))
    if out:
        _write_file(out, body["controller_json"])
    else:
        click.echo(body["controller_json"], nl=False)
    if dot:
        _write_file(dot, body["dot"])
    click.echo(
        f"synthesized {body['name']}: {body['locations']} locations, "
        f"{body['transitions']} transitions",
        err=True,
    )


@main.command("eval-trace")
@click.argument("spec_path", type=click.Path())
@click.argument("trace_path", type=click.Path())
@click.option("--bound", default=None, type=int, help="Unrolling bound override.")
@_param_option
@_server_option
def eval_trace(
    spec_path: str,
    trace_path: str,
    bound: int | None,
    param: tuple[str, ...],
    server: str | None,
) -> None:
    """Evaluate a spec against a lasso trace file."""
    svc = Service(server)
    payload = _spec_payload(spec_path, param)
    payload["trace_text"] = _read_file(trace_path)
    payload["bound"] = bound
    body = _expect_ok(svc.post("/eval-trace", payload))
    click.echo(f"{body['status']}: {body['reason']}")
    flags = " ".join(str(i) for i in body["flags"]) or "-"
    click.echo(f"flags: {flags}")
    windows = " ".join(f"{a}..{b}" for a, b in body["windows"]) or "-"
    click.echo(f"windows: {windows}")


def _format_valuation(val: dict) -> str:
    parts = []
    for name, value in val.items():
        if isinstance(value, bool):
            parts.append(f"{name}={'true' if value else 'false'}")
        else:
            parts.append(f"{name}={value}")
    return " ".join(parts)


@main.command()
@click.argument("controller_path", type=click.Path())
@_server_option
def simulate(controller_path: str, server: str | None) -> None:
    """Step a controller interactively.

    Each input line names the propositions true this step, separated by
    spaces; an empty line is the empty event. Type quit (or close stdin)
    to stop. Works the same with piped input.
    """
    svc = Service(server)
    body = _expect_ok(
        svc.post("/simulations", {"controller_json": _read_file(controller_path)})
    )
    sid = body["id"]
    click.echo(f"inputs: {' '.join(body['inputs'])}")
    location = body["state"]
    valuation = _format_valuation(body["valuation"])
    click.echo(f"at {location}" + (f"  {valuation}" if valuation else ""))
    interactive = sys.stdin.isatty()
    try:
        while True:
            if interactive:
                click.echo("> ", nl=False)
            line = sys.stdin.readline()
            if not line:
                break
            line = line.strip()
            if line == "quit":
                break
            resp = svc.post(f"/simulations/{sid}/step", {"inputs": line.split()})
            if resp.status_code != 200:
                detail = resp.json().get("detail")
                click.echo(f"error: {detail}", err=True)
                continue
            step = resp.json()
            valuation = _format_valuation(step["valuation"])
            outputs = " ".join(step["outputs"]) or "-"
            marks = ""
            if step["fires_trigger"]:
                marks += "  [flag]"
            if step["resets"]:
                marks += "  [reset]"
            click.echo(
                f"step {step['steps']}: {step['state']}"
                + (f"  {valuation}" if valuation else "")
                + f"  ! {outputs}{marks}"
            )
    finally:
        svc.delete(f"/simulations/{sid}")


@main.command()
@click.argument("path", type=click.Path())
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["dot", "interchange"]),
    default="dot",
    help="Output format.",
)
@click.option("--out", default=None, type=click.Path(), help="Write here instead of stdout.")
@_param_option
@_server_option
def export(
    path: str,
    fmt: str,
    out: str | None,
    param: tuple[str, ...],
    server: str | None,
) -> None:
    """Render a spec, controller, or trace document deterministically."""
    svc = Service(server)
    body = _expect_ok(
        svc.post(
            "/export",
            {
                "text": _read_file(path),
                "format": fmt,
                "name": Path(path).stem.split(".")[0],
                "params": _parse_params(param),
            },
        )
    )
    if out:
        _write_file(out, body["content"])
    else:
        click.echo(body["content"], nl=False)


@main.command()
@click.argument("spec_path", type=click.Path())
@click.option("--backend", default="builtin", metavar="NAME")
@click.option("--episodes", default=100, show_default=True)
@click.option("--horizon", default=40, show_default=True)
@click.option("--seed", default=0, show_default=True)
@_param_option
@_server_option
def verify(
    spec_path: str,
    backend: str,
    episodes: int,
    horizon: int,
    seed: int,
    param: tuple[str, ...],
    server: str | None,
) -> None:
    """Synthesize, then check the controller against the trace oracle."""
    svc = Service(server)
    payload = _spec_payload(spec_path, param)
    _resolve_backend(svc, backend, payload)
    payload.update({"episodes": episodes, "horizon": horizon, "seed": seed})
    body = _expect_ok(svc.post("/verify", payload))
    click.echo(
        f"{body['name']}: {body['episodes']} episodes "
        f"({body['closed']} closed, {body['open']} open)"
    )
    click.echo(
        f"verdicts: sat {body['sat']}, unsat {body['unsat']}, "
        f"unknown {body['unknown']}, vacuous {body['vacuous']}"
    )
    for ce in body["counterexamples"]:
        prefix = "; ".join(" ".join(e) or "-" for e in ce["prefix"]) or "-"
        loop = "; ".join(" ".join(e) or "-" for e in ce["loop"])
        click.echo(f"counterexample ({ce['status']}): prefix [{prefix}] loop [{loop}]")
        click.echo(f"  {ce['reason']}")
    if not body["clean"]:
        click.echo("verification failed", err=True)
        sys.exit(EXIT_INVALID)
    click.echo("verification clean")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("trigsynth.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
