"""Scripted runs, log files, and byte-exact replay verification.

A run executes a scenario's script against a fresh world and settles to
quiescence.  Replay rebuilds the world from the RUN_START record and
walks the original log: injection records (COMMAND, CONFIG, FAULT) are
re-applied at their logged times, everything else must regenerate from
event processing alone.  The regenerated log is compared line by line
against the original bytes; the first difference is the divergence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .scenario import InvalidScenario, Scenario
from .simnet import format_record
from .world import INJECTION_KINDS, HomeWorld

# Settling margin past the last scheduled activity; discovery retries
# stop being interesting long before this.
QUIESCENCE_SLACK_S = 60.0

_REQUIRED_FIELDS = ("ts", "seq", "kind", "src", "dst", "payload")


class CorruptLog(ValueError):
    """Log file unusable; carries the 1-based offending line number."""

    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}")


def run_horizon(scenario: Scenario) -> float:
    """Simulated time by which every ticket has settled."""
    last_at = max((at for at, _ in scenario.script), default=0.0)
    budget = scenario.retry.timeout_s * (scenario.retry.max_retries + 1)
    return last_at + budget + QUIESCENCE_SLACK_S


def run_scenario(scenario: Scenario) -> HomeWorld:
    """Execute the script and settle; returns the finished world."""
    world = HomeWorld(scenario)
    for at_s, utterance in scenario.script:
        world.sim.step_until(at_s)
        world.submit(utterance)
    world.run_until_idle(run_horizon(scenario))
    return world


def write_log(world: HomeWorld, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(world.to_jsonl(), encoding="utf-8")
    return path


def read_log(path: str | Path) -> tuple[list[str], list[dict]]:
    """Load a JSONL run log; returns (raw lines, parsed records).

    Raises:
        CorruptLog: unparseable line, missing fields, or broken seq order.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    records = []
    for i, line in enumerate(lines, start=1):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorruptLog(i, f"not valid JSON ({exc.msg})") from None
        if not isinstance(record, dict):
            raise CorruptLog(i, "record is not an object")
        missing = [f for f in _REQUIRED_FIELDS if f not in record]
        if missing:
            raise CorruptLog(i, f"missing fields: {', '.join(missing)}")
        if record["seq"] != i - 1:
            raise CorruptLog(i, f"seq {record['seq']} out of order")
        records.append(record)
    return lines, records


@dataclass(frozen=True)
class ReplayResult:
    matched: bool
    first_divergent_seq: int | None
    original_count: int
    regenerated_count: int
    note: str | None = None

    def to_dict(self) -> dict:
        return {
            "matched": self.matched,
            "first_divergent_seq": self.first_divergent_seq,
            "original_count": self.original_count,
            "regenerated_count": self.regenerated_count,
            "note": self.note,
        }


def replay_records(lines: list[str], records: list[dict]) -> ReplayResult:
    """Regenerate a run from its own log and compare byte for byte."""
    if not records or records[0]["kind"] != "RUN_START":
        raise CorruptLog(1, "first record must be RUN_START")
    try:
        scenario = Scenario.from_dict(records[0]["payload"]["scenario"])
    except (KeyError, TypeError):
        raise CorruptLog(1, "RUN_START carries no scenario") from None
    except InvalidScenario as exc:
        raise CorruptLog(1, f"bad scenario: {exc}") from None

    world = HomeWorld(scenario)
    note = None
    for i, record in enumerate(records):
        try:
            if record["kind"] in INJECTION_KINDS:
                # Drain any processing the log says happened first.
                while len(world.records) < i:
                    if world.sim.process_one() is None:
                        break
                world.sim.advance_clock(record["ts"])
                world.apply_injection(record)
            else:
                while len(world.records) <= i:
                    if world.sim.process_one() is None:
                        break
        except Exception as exc:
            note = f"regeneration stopped at seq {i}: {exc}"
            break

    regenerated = [format_record(r) for r in world.records]
    divergence = None
    for i in range(max(len(lines), len(regenerated))):
        original_line = lines[i] if i < len(lines) else None
        new_line = regenerated[i] if i < len(regenerated) else None
        if original_line != new_line:
            divergence = i
            break
    return ReplayResult(
        matched=divergence is None,
        first_divergent_seq=divergence,
        original_count=len(lines),
        regenerated_count=len(regenerated),
        note=note,
    )


def replay_log(path: str | Path) -> ReplayResult:
    lines, records = read_log(path)
    return replay_records(lines, records)
