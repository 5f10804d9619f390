"""Command-line interface.

Commands::

    gtproj check SOURCE      decide implementability; exit 0 yes / 1 no
    gtproj project SOURCE    emit the per-role machines (text, json, dot)
    gtproj simulate SOURCE   explore the machines' asynchronous executions
    gtproj bench             run check over the bundled corpus
    gtproj gen-gk K          emit a protocol whose machine needs 2**K states

``SOURCE`` is a file path or ``-`` for stdin.  Exit codes: 0 success (for
``check``: implementable), 1 not implementable, 2 usage, parse, or
well-formedness error.
"""
from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import click

from . import corpus
from .automata import format_trace
from .csm import Csm, explore
from .oracle import generate_gk
from .projection import SubsetMachine, build_projections, machine_to_dot
from .syntax import (
    GlobalType,
    ParseError,
    Role,
    measure_size,
    parse_global_type,
    pretty,
    pretty_inline,
    roles_of,
    validate_well_formedness,
)
from .validity import (
    ReceiveViolationDetails,
    SendViolationDetails,
    ValidityViolation,
    Verdict,
    ViolationKind,
    check_implementability,
)

__all__ = ["RunConfig", "run_command", "main"]


@dataclass(frozen=True)
class RunConfig:
    """One CLI invocation, decoupled from the argument parser."""

    command: str  # "check" | "project" | "simulate" | "bench" | "gen-gk"
    source: Optional[str] = None  # path or "-" for stdin
    k: Optional[int] = None  # gen-gk only
    channel_bound: int = 4
    depth: int = 14
    fmt: str = "text"  # "text" | "json" | "dot"
    all_violations: bool = False
    out: Optional[str] = None


# --------------------------------------------------------------------------- #
# Helpers
# --------------------------------------------------------------------------- #


def _read_source(source: str) -> tuple[str, str]:
    """Return (protocol name, text).  ``-`` reads stdin."""
    if source == "-":
        return "stdin", sys.stdin.read()
    path = Path(source)
    return path.stem, path.read_text()

def _emit(payload: str, out: Optional[str]) -> None:
    if out is None:
        click.echo(payload, nl=not payload.endswith("\n"))
    else:
        Path(out).write_text(payload if payload.endswith("\n") else payload + "\n")


def _ms(seconds: float) -> float:
    return round(seconds * 1000.0, 3)


def _violation_json(v: ValidityViolation) -> dict:
    body: dict = {
        "kind": v.kind.value,
        "role": v.role.name,
        "state": [pretty_inline(m) for m in v.state],
    }
    if v.kind is ViolationKind.SEND_VALIDITY:
        d: SendViolationDetails = v.details  # type: ignore[assignment]
        body["transition"] = str(d.transition[1])
        body["unable"] = [pretty_inline(m) for m in d.missing]
    else:
        d2: ReceiveViolationDetails = v.details  # type: ignore[assignment]
        body["first"] = str(d2.transition_one[1])
        body["second"] = str(d2.transition_two[1])
        body["witness_subterm"] = pretty_inline(d2.witness_subterm)
        body["available"] = str(d2.offending_event)
    return body


def _projection_rows(projections: dict[Role, SubsetMachine]) -> list[dict]:
    rows = []
    for role in sorted(projections, key=lambda r: r.name):
        m = projections[role]
        rows.append(
            {
                "role": role.name,
                "states": len(m.states),
                "transitions": len(m.transitions),
                "final_states": len(m.finals),
            }
        )
    return rows


def _verdict_json(verdict: Verdict, all_violations: bool) -> dict:
    body: dict = {"implementable": verdict.implementable}
    if verdict.violation is not None:
        body["violation"] = _violation_json(verdict.violation)
    if verdict.counterexample is not None:
        body["counterexample"] = format_trace(verdict.counterexample)
    if all_violations and verdict.violations:
        body["violations"] = [_violation_json(v) for v in verdict.violations]
    return body


def _check_payload(name: str, g: GlobalType, all_violations: bool) -> tuple[dict, Verdict]:
    t0 = time.perf_counter()
    projections = build_projections(g)
    t1 = time.perf_counter()
    verdict = check_implementability(
        g, all_violations=all_violations, _projections=projections
    )
    t2 = time.perf_counter()
    payload = {
        "protocol": {
            "name": name,
            "size": measure_size(g),
            "roles": [r.name for r in roles_of(g)],
        },
        "verdict": _verdict_json(verdict, all_violations),
        "projections": _projection_rows(verdict.projections)
        if verdict.projections is not None
        else [],
        "timings": {"project_ms": _ms(t1 - t0), "check_ms": _ms(t2 - t1)},
    }
    return payload, verdict


def _render_check_text(payload: dict, verdict: Verdict, all_violations: bool) -> str:
    info = payload["protocol"]
    lines = [
        f"protocol {info['name']}: roles {', '.join(info['roles'])}; size {info['size']}"
    ]
    if verdict.implementable:
        lines.append("verdict: implementable")
        for row in payload["projections"]:
            lines.append(
                f"projection {row['role']}: {row['states']} states, "
                f"{row['transitions']} transitions, {row['final_states']} final"
            )
    else:
        lines.append("verdict: not implementable")
        shown = verdict.violations if all_violations else (verdict.violation,)
        for i, violation in enumerate(shown, start=1):
            prefix = f"violation {i}: " if len(shown) > 1 else "violation: "
            lines.append(prefix + violation.describe())
        lines.append(f"counterexample: {format_trace(verdict.counterexample)}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- #
# Commands
# --------------------------------------------------------------------------- #


def _parse_checked(name: str, text_value: str) -> GlobalType:
    """Parse and validate; raises ParseError or _Diagnostics on failure."""
    g = parse_global_type(text_value)
    report = validate_well_formedness(g)
    if not report.ok:
        raise _Diagnostics(
            [f"{name}: {v.rule.value}: {v.message}" for v in report.violations]
        )
    return g


class _Diagnostics(Exception):
    """Well-formedness failures to be printed to stderr (exit 2)."""

    def __init__(self, lines: list[str]) -> None:
        super().__init__("; ".join(lines))
        self.lines = lines


def _cmd_check(cfg: RunConfig) -> int:
    name, text_value = _read_source(cfg.source or "-")
    t0 = time.perf_counter()
    g = _parse_checked(name, text_value)
    parse_ms = _ms(time.perf_counter() - t0)
    payload, verdict = _check_payload(name, g, cfg.all_violations)
    payload["schema"] = 1
    payload["timings"]["parse_ms"] = parse_ms
    if cfg.fmt == "json":
        _emit(json.dumps(payload, indent=2, sort_keys=True), cfg.out)
    else:
        _emit(_render_check_text(payload, verdict, cfg.all_violations), cfg.out)
    return 0 if verdict.implementable else 1


def _cmd_project(cfg: RunConfig) -> int:
    name, text_value = _read_source(cfg.source or "-")
    g = _parse_checked(name, text_value)
    _, table = build_projections(g)
    machines = {role: machine for role, (_, machine) in table.items()}
    roles = sorted(machines, key=lambda r: r.name)
    if cfg.fmt == "dot":
        blocks = [machine_to_dot(machines[r], name=f"{name}_{r.name}") for r in roles]
        _emit("\n".join(blocks), cfg.out)
    elif cfg.fmt == "json":
        payload = {
            "schema": 1,
            "protocol": {
                "name": name,
                "size": measure_size(g),
                "roles": [r.name for r in roles_of(g)],
            },
            "machines": [
                {
                    "role": r.name,
                    "initial": machines[r].state_number(machines[r].initial),
                    "states": [
                        {
                            "number": i,
                            "members": list(s.ids),
                            "final": s in machines[r].finals,
                        }
                        for i, s in enumerate(machines[r].states)
                    ],
                    "transitions": [
                        {
                            "source": machines[r].state_number(s),
                            "event": str(event),
                            "target": machines[r].state_number(t),
                        }
                        for s in machines[r].states
                        for event, t in machines[r].out(s)
                    ],
                }
                for r in roles
            ],
        }
        _emit(json.dumps(payload, indent=2, sort_keys=True), cfg.out)
    else:
        lines = []
        for r in roles:
            m = machines[r]
            lines.append(
                f"machine for role {r}: {len(m.states)} states, "
                f"{len(m.transitions)} transitions, {len(m.finals)} final"
            )
            for i, s in enumerate(m.states):
                marks = []
                if s == m.initial:
                    marks.append("initial")
                if s in m.finals:
                    marks.append("final")
                suffix = f" ({', '.join(marks)})" if marks else ""
                lines.append(f"  s{i} = {s}{suffix}")
                for event, t in m.out(s):
                    lines.append(f"    s{i} --{event}--> s{m.state_number(t)}")
        _emit("\n".join(lines) + "\n", cfg.out)
    return 0


def _cmd_simulate(cfg: RunConfig) -> int:
    name, text_value = _read_source(cfg.source or "-")
    g = _parse_checked(name, text_value)
    _, table = build_projections(g)
    system = Csm({role: machine for role, (_, machine) in table.items()})
    report = explore(system, channel_bound=cfg.channel_bound, depth=cfg.depth)
    if cfg.fmt == "json":
        payload = {
            "schema": 1,
            "protocol": {"name": name, "roles": [r.name for r in roles_of(g)]},
            "visited": report.visited,
            "deadlocks": [format_trace(trace) for _, trace in report.deadlocks],
            "frontier_cut": report.frontier_cut,
            "channel_bound": cfg.channel_bound,
            "depth": cfg.depth,
        }
        _emit(json.dumps(payload, indent=2, sort_keys=True), cfg.out)
    else:
        lines = [
            f"protocol {name}: explored {report.visited} configurations "
            f"(channel bound {cfg.channel_bound}, depth {cfg.depth})"
        ]
        for _, trace in report.deadlocks:
            lines.append(f"deadlock after {format_trace(trace)}")
        if not report.deadlocks:
            lines.append("no deadlocks")
        lines.append(f"frontier cut: {'yes' if report.frontier_cut else 'no'}")
        _emit("\n".join(lines) + "\n", cfg.out)
    return 0


def _cmd_bench(cfg: RunConfig) -> int:
    results = []
    for entry in corpus.entries():
        text_value = entry.text()
        t0 = time.perf_counter()
        g = parse_global_type(text_value)
        parse_ms = _ms(time.perf_counter() - t0)
        payload, verdict = _check_payload(entry.name, g, all_violations=False)
        payload["timings"]["parse_ms"] = parse_ms
        payload["name"] = entry.name
        results.append((payload, verdict))
    if cfg.fmt == "json":
        body = {"schema": 1, "results": [p for p, _ in results]}
        _emit(json.dumps(body, indent=2, sort_keys=True), cfg.out)
    else:
        lines = [f"{'name':<12} {'verdict':<28} {'size':>4} {'roles':>5} {'ms':>8}"]
        for payload, verdict in results:
            if verdict.implementable:
                label = "implementable"
            else:
                label = f"not impl. ({verdict.violation.kind.value})"
            total = sum(payload["timings"].values())
            lines.append(
                f"{payload['name']:<12} {label:<28} {payload['protocol']['size']:>4} "
                f"{len(payload['protocol']['roles']):>5} {total:>8.2f}"
            )
        _emit("\n".join(lines) + "\n", cfg.out)
    return 0


def _cmd_gen_gk(cfg: RunConfig) -> int:
    g = generate_gk(cfg.k or 1)
    _emit(pretty(g) + "\n", cfg.out)
    return 0


_COMMANDS = {
    "check": _cmd_check,
    "project": _cmd_project,
    "simulate": _cmd_simulate,
    "bench": _cmd_bench,
    "gen-gk": _cmd_gen_gk,
}


def run_command(cfg: RunConfig) -> int:
    """Execute one invocation; returns the process exit code.

    Exit codes: 0 success (``check``: implementable), 1 ``check`` on a
    protocol that is not implementable, 2 unreadable/malformed/ill-formed
    input or bad usage.
    """
    handler = _COMMANDS.get(cfg.command)
    if handler is None:
        click.echo(f"error: unknown command {cfg.command!r}", err=True)
        return 2
    try:
        return handler(cfg)
    except ParseError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except _Diagnostics as exc:
        click.echo("error: protocol is not well-formed", err=True)
        for line in exc.lines:
            click.echo(f"  {line}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


# --------------------------------------------------------------------------- #
# click wiring
# --------------------------------------------------------------------------- #


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(package_name="gtproj")
def main() -> None:
    """Decide implementability of multiparty protocols and emit per-role
    machines."""


_FORMAT = click.Choice(["text", "json"])
_FORMAT_DOT = click.Choice(["text", "json", "dot"])


@main.command()
@click.argument("source")
@click.option("--format", "fmt", type=_FORMAT, default="text", show_default=True)
@click.option("--all", "all_violations", is_flag=True, help="Report every violation.")
@click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None)
def check(source: str, fmt: str, all_violations: bool, out: Optional[str]) -> None:
    """Decide implementability of the protocol in SOURCE ('-' = stdin)."""
    sys.exit(
        run_command(
            RunConfig(
                command="check",
                source=source,
                fmt=fmt,
                all_violations=all_violations,
                out=out,
            )
        )
    )


@main.command()
@click.argument("source")
@click.option("--format", "fmt", type=_FORMAT_DOT, default="text", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None)
def project(source: str, fmt: str, out: Optional[str]) -> None:
    """Emit the per-role machines of the protocol in SOURCE."""
    sys.exit(run_command(RunConfig(command="project", source=source, fmt=fmt, out=out)))


@main.command()
@click.argument("source")
@click.option("--bound", "channel_bound", type=click.IntRange(min=1), default=4,
              show_default=True, help="Channel capacity during exploration.")
@click.option("--depth", type=click.IntRange(min=0), default=14, show_default=True,
              help="Maximum trace length during exploration.")
@click.option("--format", "fmt", type=_FORMAT, default="text", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None)
def simulate(
    source: str, channel_bound: int, depth: int, fmt: str, out: Optional[str]
) -> None:
    """Explore the asynchronous executions of SOURCE's machines."""
    sys.exit(
        run_command(
            RunConfig(
                command="simulate",
                source=source,
                channel_bound=channel_bound,
                depth=depth,
                fmt=fmt,
                out=out,
            )
        )
    )


@main.command()
@click.option("--format", "fmt", type=_FORMAT, default="text", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None)
def bench(fmt: str, out: Optional[str]) -> None:
    """Run check over the bundled corpus and report sizes and timings."""
    sys.exit(run_command(RunConfig(command="bench", fmt=fmt, out=out)))


@main.command("gen-gk")
@click.argument("k", type=click.IntRange(min=1))
@click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None)
def gen_gk(k: int, out: Optional[str]) -> None:
    """Emit a protocol whose role-q machine needs at least 2**K states."""
    sys.exit(run_command(RunConfig(command="gen-gk", k=k, out=out)))


if __name__ == "__main__":
    main()
