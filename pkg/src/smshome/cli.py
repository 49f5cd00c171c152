"""Command-line entry point: serve, one-shot sends, runs, replay, fuzzing.

Machine-readable results go to stdout as one line of JSON when
``--format json`` is selected; diagnostics always go to stderr.  Exit
codes: 0 success, 2 unusable input (unrecognized utterance, bad flags),
3 command not confirmed (timeout or failure ack), 4 replay divergence,
1 anything else.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .codec import Ack, UnrecognizedUtterance, parse_utterance, render_ack
from .controller import FailureMode, device_name, parse_device_spec
from .fuzz import fuzz_codec, mutant_decode
from .runner import CorruptLog, replay_log, run_scenario, write_log
from .scenario import InvalidScenario, Scenario, demo_scenario
from .service import create_app

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BAD_INPUT = 2
EXIT_NOT_CONFIRMED = 3
EXIT_DIVERGED = 4


class CliError(Exception):
    """Operator mistake with a known exit code; message goes to stderr."""

    def __init__(self, message: str, code: int = EXIT_BAD_INPUT):
        self.code = code
        super().__init__(message)


def _say(text: str) -> None:
    print(text, file=sys.stderr)


def _emit(payload: dict, fmt: str, text_lines: list[str]) -> None:
    if fmt == "json":
        print(json.dumps(payload, sort_keys=True, separators=(",", ":")))
    else:
        for line in text_lines:
            print(line)


def _parse_failure_flag(text: str) -> tuple:
    """``fan=stuck`` or ``LIGHT1=flaky:0.3`` -> (kind, index, mode)."""
    device_part, eq, mode_part = text.partition("=")
    if not eq:
        raise CliError(f"--failure needs device=mode, got {text!r}")
    spec = device_part.strip().upper()
    if spec and not spec[-1].isdigit():
        spec += "1"
    try:
        kind, index = parse_device_spec(spec)
        mode = FailureMode.parse(mode_part.strip())
    except ValueError as exc:
        raise CliError(f"--failure {text!r}: {exc}") from None
    return kind, index, mode


def _scenario_from_args(args, script: list[tuple[float, str]] | None = None) -> Scenario:
    """Base scenario (file or defaults) with flag overrides applied."""
    path = getattr(args, "scenario", None)
    if path:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CliError(f"cannot read scenario: {exc}", EXIT_ERROR) from None
        except json.JSONDecodeError as exc:
            raise CliError(f"scenario is not valid JSON: {exc}") from None
        try:
            scenario = Scenario.from_dict(data)
        except InvalidScenario as exc:
            raise CliError(f"bad scenario: {exc}") from None
    else:
        scenario = Scenario()

    if script is not None:
        scenario.script = script
    if getattr(args, "seed", None) is not None:
        scenario.seed = args.seed

    channel = {}
    for flag, field in (("delay", "base_delay_s"), ("jitter", "jitter_s"),
                        ("loss", "loss_prob"), ("dup", "dup_prob")):
        value = getattr(args, flag, None)
        if value is not None:
            channel[field] = value
    if channel:
        scenario.sms = dataclasses.replace(scenario.sms, **channel)

    retry = {}
    if getattr(args, "timeout", None) is not None:
        retry["timeout_s"] = args.timeout
    if getattr(args, "retries", None) is not None:
        retry["max_retries"] = args.retries
    if retry:
        scenario.retry = dataclasses.replace(scenario.retry, **retry)

    for text in getattr(args, "failure", None) or []:
        kind, index, mode = _parse_failure_flag(text)
        for i, (dk, di, _) in enumerate(scenario.devices):
            if (dk, di) == (kind, index):
                scenario.devices[i] = (dk, di, mode)
                break
        else:
            raise CliError(f"--failure names unknown device {device_name(kind, index)}")

    try:
        return scenario.validated()
    except InvalidScenario as exc:
        raise CliError(f"bad scenario: {exc}") from None


def _device_lines(devices: list[dict]) -> list[str]:
    lines = []
    for row in devices:
        name = f"{row['kind']}{row['index']}"
        relay = "on" if row["relay_on"] else "off"
        effective = "on" if row["effective_on"] else "off"
        note = ""
        if row["failure"]["mode"] != "NONE":
            note = f"  [{row['failure']['mode'].lower()}]"
        lines.append(f"{name:<9}relay {relay:<4}effective {effective}{note}")
    return lines


def cmd_send(args) -> int:
    try:
        command = parse_utterance(args.utterance)
    except UnrecognizedUtterance as exc:
        _say(f"error: {exc}")
        return EXIT_BAD_INPUT

    scenario = _scenario_from_args(args, script=[(0.0, args.utterance)])
    world = run_scenario(scenario)
    ticket = world.phone.tickets()[0]
    ok = ticket["state"] == "ACKED_OK"
    # The correlated ack is reconstructible from the resolved state: a
    # match requires equal (device, index, action), success is the state.
    ack_text = None
    if ticket["state"] in ("ACKED_OK", "ACKED_FAIL"):
        ack_text = render_ack(Ack(command.device, command.index, command.action, ok))

    snap = world.snapshot()
    payload = {
        "utterance": args.utterance,
        "wire": ticket["wire"],
        "ack": ack_text,
        "state": ticket["state"],
        "attempts": ticket["attempts"],
        "settled_at_s": snap["now"],
        "devices": snap["devices"],
    }
    plural = "attempt" if ticket["attempts"] == 1 else "attempts"
    lines = [
        f"wire     {ticket['wire']}",
        f"ack      {ack_text if ack_text is not None else '(none)'}",
        f"state    {ticket['state']} after {ticket['attempts']} {plural}",
    ]
    lines += _device_lines(snap["devices"])
    _emit(payload, args.format, lines)
    return EXIT_OK if ok else EXIT_NOT_CONFIRMED


def _run_and_report(scenario: Scenario, args) -> int:
    world = run_scenario(scenario)
    log_path = Path(args.log) if args.log else Path(f"run-seed{scenario.seed}.jsonl")
    write_log(world, log_path)
    snap = world.snapshot()
    tickets = {t["id"]: t["state"] for t in world.phone.tickets()}
    payload = {
        "log": str(log_path),
        "records": len(world.records),
        "settled_at_s": snap["now"],
        "tickets": tickets,
        "devices": snap["devices"],
    }
    lines = [
        f"log      {log_path} ({len(world.records)} records)",
        f"settled  t={snap['now']:g}s",
    ]
    lines += [f"{tid:<9}{state}" for tid, state in tickets.items()]
    lines += _device_lines(snap["devices"])
    _emit(payload, args.format, lines)
    return EXIT_OK


def cmd_run(args) -> int:
    if not args.scenario:
        raise CliError("run needs --scenario <path> (or use the demo subcommand)")
    return _run_and_report(_scenario_from_args(args), args)


def cmd_demo(args) -> int:
    scenario = demo_scenario()
    if args.seed is not None:
        scenario.seed = args.seed
        scenario.validated()
    return _run_and_report(scenario, args)


def cmd_replay(args) -> int:
    try:
        result = replay_log(args.log)
    except FileNotFoundError:
        _say(f"error: no such log: {args.log}")
        return EXIT_ERROR
    except CorruptLog as exc:
        _say(f"error: corrupt log: {exc}")
        return EXIT_ERROR

    payload = result.to_dict()
    payload["log"] = str(args.log)
    if result.matched:
        lines = [f"replay   MATCHED ({result.original_count} records regenerated)"]
    else:
        lines = [
            f"replay   DIVERGED at seq {result.first_divergent_seq}",
            f"records  {result.original_count} logged, "
            f"{result.regenerated_count} regenerated",
        ]
        if result.note:
            lines.append(f"note     {result.note}")
    _emit(payload, args.format, lines)
    return EXIT_OK if result.matched else EXIT_DIVERGED


def cmd_fuzz(args) -> int:
    if args.iterations <= 0:
        raise CliError("--iterations must be > 0")
    if args.self_test:
        # Prove the harness can catch a defect: a decoder with a planted
        # off-by-one must produce a counterexample.
        planted = fuzz_codec(args.iterations, seed=args.seed, decode=mutant_decode)
        if planted.ok:
            _say("error: self-test failed, planted decoder defect went undetected")
            return EXIT_ERROR
        payload = {"self_test": "ok", "planted_defect": planted.to_dict()}
        lines = [
            "self-test ok: planted defect detected",
            f"check    {planted.failed_check}",
            f"input    {planted.counterexample}",
        ]
        _emit(payload, args.format, lines)
        return EXIT_OK

    report = fuzz_codec(args.iterations, seed=args.seed)
    payload = report.to_dict()
    if report.ok:
        lines = [f"fuzz     ok ({report.iterations} iterations, seed {report.seed})"]
    else:
        lines = [
            f"fuzz     FAILED check {report.failed_check}",
            f"input    {report.counterexample}",
            f"detail   {report.detail}",
        ]
    _emit(payload, args.format, lines)
    return EXIT_OK if report.ok else EXIT_ERROR


def cmd_serve(args) -> int:
    import uvicorn

    scenario = _scenario_from_args(args)
    if args.mode is not None:
        scenario.run_mode = args.mode
    elif not args.scenario:
        # Interactive default; scripted runs keep stepped determinism.
        scenario.run_mode = "realtime"
    if args.speed is not None:
        scenario.speed = args.speed
    try:
        scenario.validated()
    except InvalidScenario as exc:
        raise CliError(f"bad scenario: {exc}") from None

    app = create_app(scenario, runs_dir=args.runs_dir, panel_dir=args.panel)
    _say(f"serving on http://{args.host}:{args.port} "
         f"({scenario.run_mode}, seed {scenario.seed})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smshome",
        description="Simulated voice-to-SMS home appliance control.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "text"), default="text",
                        help="output style (default text)")

    shaping = argparse.ArgumentParser(add_help=False)
    shaping.add_argument("--seed", type=int, help="simulation seed")
    shaping.add_argument("--scenario", metavar="PATH",
                         help="scenario JSON file to start from")
    shaping.add_argument("--loss", type=float, metavar="P",
                         help="SMS loss probability")
    shaping.add_argument("--delay", type=float, metavar="S",
                         help="SMS base delay in seconds")
    shaping.add_argument("--jitter", type=float, metavar="S",
                         help="SMS delay jitter in seconds")
    shaping.add_argument("--dup", type=float, metavar="P",
                         help="SMS duplication probability")
    shaping.add_argument("--failure", action="append", metavar="DEV=MODE",
                         help="device fault, e.g. fan=stuck or light=flaky:0.3")
    shaping.add_argument("--timeout", type=float, metavar="S",
                         help="ack timeout before resend")
    shaping.add_argument("--retries", type=int, metavar="N",
                         help="resend attempts after the first send")

    p = sub.add_parser("send", parents=[shaping, common],
                       help="run one utterance to quiescence and report the ack")
    p.add_argument("utterance", help='e.g. "Light On"')
    p.set_defaults(func=cmd_send)

    p = sub.add_parser("run", parents=[shaping, common],
                       help="execute a scenario script and write its log")
    p.add_argument("--log", metavar="PATH", help="log file (default run-seed<seed>.jsonl)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("demo", parents=[common],
                       help="run the bundled six-command script")
    p.add_argument("--seed", type=int, help="override the demo seed")
    p.add_argument("--log", metavar="PATH", help="log file (default run-seed<seed>.jsonl)")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("replay", parents=[common],
                       help="regenerate a run from its log and verify byte equality")
    p.add_argument("log", help="JSONL run log")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("fuzz", parents=[common],
                       help="randomized codec round-trip and bijectivity checks")
    p.add_argument("--iterations", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--self-test", action="store_true",
                   help="verify the harness catches a planted decoder defect")
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("serve", parents=[shaping],
                       help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--mode", choices=("stepped", "realtime"),
                   help="clock mode (default realtime unless a scenario file says otherwise)")
    p.add_argument("--speed", type=float, help="realtime multiplier over wall clock")
    p.add_argument("--runs-dir", default="runs", metavar="DIR",
                   help="directory for per-run JSONL logs")
    p.add_argument("--panel", metavar="DIR",
                   help="static control-panel build to mount at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        _say(f"error: {exc}")
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
