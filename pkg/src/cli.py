#!/usr/bin/env python3
# Copyright 2025 Veilsum Developers.
# See LICENSE file for licensing details.

"""Command-line entry point: run scenarios, verify and dump transcripts, run attacks."""

import argparse
import logging
import sys
from pathlib import Path

import yaml
from pydantic import ValidationError

from core.actor import ProtocolError
from core.models import CompromiseTarget
from core.structured_config import RunConfig, ScenarioConfig
from literals import CONFIG_PATH, PROJECT_KEY
from managers.adversary import AdversaryManager, HarnessError, run_malicious_suite
from managers.transcript import Transcript, TranscriptError, verify_transcript
from world import run_scenario

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )


def _print(report: dict | list) -> None:
    print(yaml.safe_dump(report, sort_keys=False), end="")


def _validation_errors(error: ValidationError) -> list[str]:
    return [
        f"{'.'.join(str(part) for part in detail['loc'])}: {detail['msg']}"
        for detail in error.errors()
    ]


def _load(args: argparse.Namespace) -> tuple[ScenarioConfig, RunConfig]:
    config = RunConfig.load(args.config, log_level=args.log_level)
    _configure_logging(config.log_level)

    scenario = ScenarioConfig.from_file(args.scenario)
    overrides = {
        "seed": getattr(args, "seed", None),
        "profile": args.profile,
        "timeout_heights": getattr(args, "timeout", None),
    }
    overrides = {key: value for key, value in overrides.items() if value is not None}
    if overrides:
        scenario = ScenarioConfig(**(scenario.dict() | overrides))

    return scenario, config


def cmd_run(args: argparse.Namespace) -> int:
    """Runs a scenario and writes its transcript; 2 when any session was aborted."""
    try:
        scenario, config = _load(args)
    except ValidationError as e:
        for line in _validation_errors(e):
            print(f"[error] {line}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, yaml.YAMLError, ValueError) as e:
        print(f"[error] {e}", file=sys.stderr)
        return EXIT_ERROR

    try:
        transcript = run_scenario(scenario, config, leaky=args.leaky or ())
    except (ProtocolError, ValueError) as e:
        print(f"[error] {e}", file=sys.stderr)
        return EXIT_ERROR

    transcript.write(args.out)
    _print(
        {
            "transcript": str(args.out),
            "decisions": {line.user: line.outcome for line in transcript.decisions},
            "aborted": {line.user or line.session_id: line.reason for line in transcript.aborted},
        }
    )
    return transcript.exit_code


def _read(path: Path) -> Transcript | None:
    try:
        return Transcript.read(path)
    except TranscriptError as e:
        print(f"[error] {e}", file=sys.stderr)
        return None


def cmd_verify(args: argparse.Namespace) -> int:
    """Re-verifies a transcript offline; reports the first failure with its height."""
    _configure_logging(args.log_level or "WARNING")
    transcript = _read(args.transcript)
    if transcript is None:
        return EXIT_ERROR

    failure = verify_transcript(transcript)
    if failure is not None:
        print(f"[verify] FAIL {failure}")
        return EXIT_ERROR

    print(f"[verify] OK ({len(transcript.records)} records)")
    return EXIT_OK


def cmd_attack(args: argparse.Namespace) -> int:
    """Compromises one entity, every entity (`all`) or a collusion (`a+b`) and reports."""
    _configure_logging(args.log_level or "WARNING")
    transcript = _read(args.transcript)
    if transcript is None:
        return EXIT_ERROR

    manager = AdversaryManager(transcript)
    try:
        if "+" in args.target:
            members = args.target.split("+")
            claim = manager.collusion(list(members))
            _print(
                {
                    "collusion": members,
                    "linkage": "none" if claim is None else claim.evidence,
                    "address": None if claim is None else claim.address,
                }
            )
            return EXIT_OK

        targets: list[CompromiseTarget | str] = (
            list(manager.targets()) if args.target == "all" else [args.target]
        )
        reports = [manager.attack(target) for target in targets]
    except HarnessError as e:
        print(f"[error] {e}", file=sys.stderr)
        return EXIT_ERROR

    _print([report.to_dict() for report in reports])
    return EXIT_OK if all(report.passed for report in reports) else EXIT_ERROR


def cmd_suite(args: argparse.Namespace) -> int:
    """Runs a scenario with and without its malicious users."""
    try:
        scenario, config = _load(args)
        report = run_malicious_suite(scenario, config)
    except ValidationError as e:
        for line in _validation_errors(e):
            print(f"[error] {line}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, yaml.YAMLError, ValueError, HarnessError, ProtocolError) as e:
        print(f"[error] {e}", file=sys.stderr)
        return EXIT_ERROR

    _print(report.to_dict())
    return EXIT_OK if report.passed else EXIT_ERROR


def cmd_dump(args: argparse.Namespace) -> int:
    """Prints the ledger of a transcript as a table."""
    _configure_logging(args.log_level or "WARNING")
    transcript = _read(args.transcript)
    if transcript is None:
        return EXIT_ERROR

    print(f"{'height':>6}  {'kind':<18}  {'author':<16}  {'session':<16}  {'bytes':>6}")
    for record in transcript.records:
        print(
            f"{record.height:>6}  {record.kind:<18}  {record.author:<16}  "
            f"{record.session_id.hex()[:16]:<16}  {len(record.payload):>6}"
        )
    if transcript.meta.watermark:
        print(transcript.meta.watermark)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """The argument parser for every subcommand."""
    parser = argparse.ArgumentParser(
        prog=PROJECT_KEY, description="Privacy-preserving asset verification simulator."
    )
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    commands = parser.add_subparsers(dest="command", required=True)

    def scenario_command(name: str, summary: str) -> argparse.ArgumentParser:
        command = commands.add_parser(name, help=summary)
        command.add_argument("scenario", type=Path, help="scenario YAML file")
        command.add_argument("--profile", choices=["test", "full"])
        command.add_argument("--config", type=Path, default=CONFIG_PATH, help="options file")
        return command

    run = scenario_command("run", "run a scenario and write its transcript")
    run.add_argument("--seed", type=int)
    run.add_argument("--timeout", type=int, help="timeout in scheduler ticks")
    run.add_argument("--out", type=Path, default=Path("transcript.jsonl"))
    run.add_argument(
        "--leaky",
        action="append",
        help="replace a role with its leaking negative-control variant (repeatable)",
    )
    run.set_defaults(handler=cmd_run)

    suite = scenario_command("suite", "compare honest outcomes with and without attackers")
    suite.set_defaults(handler=cmd_suite)

    verify = commands.add_parser("verify", help="re-verify a transcript offline")
    verify.add_argument("transcript", type=Path)
    verify.set_defaults(handler=cmd_verify)

    attack = commands.add_parser("attack", help="compromise entities of a completed run")
    attack.add_argument("transcript", type=Path)
    attack.add_argument(
        "--target",
        required=True,
        help="source:<id>, relayer, zkpsp, operator, all, or a collusion such as zkpsp+operator",
    )
    attack.set_defaults(handler=cmd_attack)

    dump = commands.add_parser("dump", help="print a transcript's ledger as a table")
    dump.add_argument("transcript", type=Path)
    dump.set_defaults(handler=cmd_dump)

    return parser


def main(argv: list[str] | None = None) -> int:
    """Parses arguments and dispatches to the subcommand handler."""
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
