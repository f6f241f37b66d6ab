"""Command-line front end.

Exit codes are a stable contract: 0 success, 1 check failed, 2 input
error, 3 a verdict was reached, 4 deadlock.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import run_benchmark, run_verification, BenchError
from .parser import (
    SourceError,
    parse_monitor,
    parse_process,
    parse_type,
    render_monitor,
    render_process,
    render_type,
)
from .proxy import ConfigError, FrameError, ProxyConfig, line_codec, serve
from .semantics import (
    CleanTermination,
    Configuration,
    Deadlock,
    Running,
    StuckReport,
    VerdictReached,
    run_trace,
)
from .synthesis import synthesize
from .typecheck import EMPTY_ENVS, check_well_formed, dual, explain_failure, typecheck

OK = 0
CHECK_FAILED = 1
INPUT_ERROR = 2
VERDICT = 3
DEADLOCK = 4


class InputError(Exception):
    pass


def _read(path: str) -> str:
    p = Path(path)
    if not p.exists():
        raise InputError(f"no such file: {path}")
    return p.read_text(encoding="utf-8")


def _load_type(path: str):
    try:
        session_type = parse_type(_read(path))
    except SourceError as exc:
        raise InputError(f"{path}:{exc}") from None
    violations = check_well_formed(session_type)
    if violations:
        raise InputError(f"{path}: " + "; ".join(str(v) for v in violations))
    return session_type


def _load_process(path: str):
    try:
        return parse_process(_read(path))
    except SourceError as exc:
        raise InputError(f"{path}:{exc}") from None


def cmd_parse(args) -> int:
    source = _read(args.file)
    kinds = [args.kind] if args.kind != "auto" else ["type", "process", "monitor"]
    errors = []
    for kind in kinds:
        parser = {"type": parse_type, "process": parse_process, "monitor": parse_monitor}[kind]
        renderer = {"type": render_type, "process": render_process, "monitor": render_monitor}[kind]
        try:
            ast = parser(source)
        except SourceError as exc:
            errors.append(f"as {kind}: {exc}")
            continue
        print(f"{kind}: {renderer(ast)}")
        return OK
    raise InputError(f"{args.file} did not parse; " + "; ".join(errors))


def cmd_check(args) -> int:
    session_type = _load_type(args.type)
    process = _load_process(args.process)
    if typecheck(EMPTY_ENVS, process, session_type):
        print("well-typed")
        return OK
    report = explain_failure(EMPTY_ENVS, process, session_type)
    print(f"ill-typed: {report}")
    return CHECK_FAILED


def cmd_dual(args) -> int:
    print(render_type(dual(_load_type(args.type))))
    return OK


def cmd_synth(args) -> int:
    print(render_monitor(synthesize(_load_type(args.type))))
    return OK


def cmd_simulate(args) -> int:
    session_type = _load_type(args.type)
    process = _load_process(args.process)
    codec = line_codec()
    script = []
    try:
        for line in _read(args.script).splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            script.append(codec.decode_line(line.encode("utf-8")))
    except FrameError as exc:
        raise InputError(f"{args.script}: {exc}") from None
    config = Configuration(process, synthesize(session_type))
    from .proxy import builtin_predicates

    log, outcome = run_trace(
        config, script, predicates=builtin_predicates(), max_steps=args.max_steps
    )
    for action in log:
        print(action)
    print(f"-- {outcome}")
    if isinstance(outcome, Running):
        return OK
    assert isinstance(outcome, StuckReport)
    if isinstance(outcome.kind, VerdictReached):
        return VERDICT
    if isinstance(outcome.kind, Deadlock):
        return DEADLOCK
    return OK  # clean termination


def cmd_verify(args) -> int:
    override = None
    if args.monitor is not None:
        try:
            override = parse_monitor(_read(args.monitor))
        except SourceError as exc:
            raise InputError(f"{args.monitor}:{exc}") from None
    rows: list[str] = []

    def emit(line: str) -> None:
        if args.format == "plain":
            print(line)

    outcomes = run_verification(
        args.corpus,
        depth=args.depth,
        completeness_depth=max(args.depth, 32),
        seed=args.seed,
        monitor_override=override,
        override_entry=args.monitor_entry,
        emit=emit,
    )
    if args.format == "csv":
        print("suite,passed,detail")
        for o in outcomes:
            detail = o.detail.replace('"', "'")
            print(f'{o.name},{int(o.passed)},"{detail}"')
    return OK if all(o.passed for o in outcomes) else CHECK_FAILED


def cmd_proxy(args) -> int:
    def endpoint(text: str) -> tuple[str, int]:
        host, _, port = text.rpartition(":")
        if not host or not port.isdigit():
            raise InputError(f"bad endpoint (want host:port): {text}")
        return (host, int(port))

    try:
        config = ProxyConfig(
            type_file=args.type,
            listen_endpoint=endpoint(args.listen),
            forward_endpoint=endpoint(args.forward),
            predicates=args.predicates,
            session_limit=args.session_limit,
            idle_timeout=args.idle_timeout,
        )
        serve(config)
    except (ConfigError, SourceError, FileNotFoundError) as exc:
        raise InputError(str(exc)) from None
    return OK


def cmd_bench(args) -> int:
    try:
        report = run_benchmark(args.protocol, args.mode, args.iterations)
    except BenchError as exc:
        raise InputError(str(exc)) from None
    if args.format == "csv":
        print("protocol,mode,iterations,mean_ms,p99_ms")
        print(report.csv_row())
    else:
        print(report)
    return OK if report.verdicts == 0 else VERDICT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sessmon",
        description="Session type checking, monitor synthesis, simulation, verification, and proxies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a source file and print its canonical rendering")
    p.add_argument("file")
    p.add_argument("--kind", choices=["auto", "type", "process", "monitor"], default="auto")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("check", help="typecheck a process against a session type")
    p.add_argument("type")
    p.add_argument("process")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("dual", help="print the dual of a session type")
    p.add_argument("type")
    p.set_defaults(func=cmd_dual)

    p = sub.add_parser("synth", help="print the synthesized monitor of a session type")
    p.add_argument("type")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="run a monitored process against a scripted environment")
    p.add_argument("type")
    p.add_argument("process")
    p.add_argument("script", help="one wire-format message per line")
    p.add_argument("--max-steps", type=int, default=10_000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the soundness/blame/completeness/subject-reduction suites")
    p.add_argument("corpus")
    p.add_argument("--depth", type=int, default=16)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--monitor", default=None, help="hand-written monitor file substituted in the soundness suite")
    p.add_argument("--monitor-entry", default=None, help="corpus entry the substituted monitor applies to")
    p.add_argument("--format", choices=["plain", "csv"], default="plain")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("proxy", help="serve a synthesized monitor as a TCP proxy")
    p.add_argument("--type", required=True)
    p.add_argument("--listen", required=True, help="host:port for the untrusted side")
    p.add_argument("--forward", required=True, help="host:port of the trusted side")
    p.add_argument("--predicates", default="builtin")
    p.add_argument("--session-limit", type=int, default=8)
    p.add_argument("--idle-timeout", type=float, default=30.0)
    p.set_defaults(func=cmd_proxy)

    p = sub.add_parser("bench", help="run the unsafe/monitored loopback benchmarks")
    p.add_argument("protocol", choices=["PingPong", "SmtpFragment"])
    p.add_argument("mode", choices=["Unsafe", "Monitored"])
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--format", choices=["plain", "csv"], default="plain")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    except SourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
