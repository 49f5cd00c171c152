"""Run configuration: seed, channel impairments, devices, command script.

A scenario is the complete recipe for a run; two runs built from equal
scenarios and seeds produce byte-identical logs.  Parsing is strict:
unknown keys and out-of-range values are rejected with per-field
diagnostics rather than silently defaulted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .client import RetryPolicy
from .codec import DeviceKind
from .controller import NO_FAULT, FailureMode, device_name, parse_device_spec
from .simnet import SerialLinkConfig, SmsChannelConfig

RUN_MODES = ("stepped", "realtime")

DEFAULT_DEVICES = (
    (DeviceKind.SUPPLY, 1, NO_FAULT),
    (DeviceKind.LIGHT, 1, NO_FAULT),
    (DeviceKind.FAN, 1, NO_FAULT),
)


class InvalidScenario(ValueError):
    """Scenario rejected; ``problems`` lists one message per offence."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


def _failure_to_text(mode: FailureMode) -> str:
    if mode.kind == "FLAKY":
        return f"flaky:{mode.p!r}"
    return mode.kind.lower()


@dataclass
class Scenario:
    seed: int = 42
    run_mode: str = "stepped"
    speed: float = 10.0
    # Simulated time at which the relay phone answers discovery; None
    # keeps the controller looping in BT_DISCOVERY forever.
    phone_available_at: float | None = 0.0
    sms: SmsChannelConfig = field(default_factory=SmsChannelConfig)
    serial: SerialLinkConfig = field(default_factory=SerialLinkConfig)
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    devices: list[tuple[DeviceKind, int, FailureMode]] = field(
        default_factory=lambda: list(DEFAULT_DEVICES)
    )
    script: list[tuple[float, str]] = field(default_factory=list)

    def problems(self) -> list[str]:
        out = []
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            out.append("seed must be an integer")
        elif not 0 <= self.seed < 2**64:
            out.append("seed must fit in an unsigned 64-bit integer")
        if self.run_mode not in RUN_MODES:
            out.append(f"run_mode must be one of {RUN_MODES}")
        if not self.speed > 0:
            out.append("speed must be > 0")
        if self.phone_available_at is not None and self.phone_available_at < 0:
            out.append("phone_available_at must be >= 0 or null")
        out.extend(f"sms.{p}" for p in self.sms.problems())
        out.extend(f"serial.{p}" for p in self.serial.problems())
        out.extend(f"retry.{p}" for p in self.retry.problems())
        if not self.devices:
            out.append("devices must be non-empty")
        seen = set()
        for kind, index, _ in self.devices:
            if (kind, index) in seen:
                out.append(f"duplicate device {device_name(kind, index)}")
            seen.add((kind, index))
        last_at = None
        for at_s, utterance in self.script:
            if at_s < 0:
                out.append(f"script time {at_s} is negative")
            if last_at is not None and at_s < last_at:
                out.append(f"script times decrease at {at_s}")
            last_at = at_s
            if not utterance:
                out.append("script utterance must be non-empty")
        return out

    def validated(self) -> "Scenario":
        problems = self.problems()
        if problems:
            raise InvalidScenario(problems)
        return self

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "run_mode": self.run_mode,
            "speed": self.speed,
            "phone_available_at": self.phone_available_at,
            "sms": self.sms.to_dict(),
            "serial": self.serial.to_dict(),
            "retry": self.retry.to_dict(),
            "devices": [
                {"device": device_name(kind, index), "failure": _failure_to_text(mode)}
                for kind, index, mode in self.devices
            ],
            "script": [
                {"at_s": at_s, "utterance": utterance} for at_s, utterance in self.script
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise InvalidScenario(["scenario must be a JSON object"])
        problems = []

        def take(source: dict, allowed: set, where: str) -> None:
            for key in source:
                if key not in allowed:
                    problems.append(f"unknown key {where}{key}")

        take(data, {"seed", "run_mode", "speed", "phone_available_at",
                    "sms", "serial", "retry", "devices", "script"}, "")
        scenario = cls()
        if "seed" in data:
            scenario.seed = data["seed"]
        if "run_mode" in data:
            scenario.run_mode = data["run_mode"]
        if "speed" in data:
            scenario.speed = data["speed"]
        if "phone_available_at" in data:
            scenario.phone_available_at = data["phone_available_at"]

        for name, cfg_cls, attr in (
            ("sms", SmsChannelConfig, "sms"),
            ("serial", SerialLinkConfig, "serial"),
            ("retry", RetryPolicy, "retry"),
        ):
            if name not in data:
                continue
            block = data[name]
            if not isinstance(block, dict):
                problems.append(f"{name} must be an object")
                continue
            fields = set(cfg_cls().__dict__)
            take(block, fields, f"{name}.")
            kwargs = {k: v for k, v in block.items() if k in fields}
            try:
                setattr(scenario, attr, cfg_cls(**kwargs))
            except (TypeError, ValueError) as exc:
                problems.append(f"{name}: {exc}")

        if "devices" in data:
            if not isinstance(data["devices"], list):
                problems.append("devices must be a list")
            else:
                scenario.devices = []
                for i, entry in enumerate(data["devices"]):
                    if not isinstance(entry, dict):
                        problems.append(f"devices[{i}] must be an object")
                        continue
                    take(entry, {"device", "failure"}, f"devices[{i}].")
                    try:
                        kind, index = parse_device_spec(entry.get("device", ""))
                        mode = FailureMode.parse(entry.get("failure", "none"))
                        scenario.devices.append((kind, index, mode))
                    except ValueError as exc:
                        problems.append(f"devices[{i}]: {exc}")

        if "script" in data:
            if not isinstance(data["script"], list):
                problems.append("script must be a list")
            else:
                scenario.script = []
                for i, entry in enumerate(data["script"]):
                    if not isinstance(entry, dict):
                        problems.append(f"script[{i}] must be an object")
                        continue
                    take(entry, {"at_s", "utterance"}, f"script[{i}].")
                    at_s = entry.get("at_s")
                    utterance = entry.get("utterance")
                    if not isinstance(at_s, (int, float)) or isinstance(at_s, bool):
                        problems.append(f"script[{i}].at_s must be a number")
                        continue
                    if not isinstance(utterance, str):
                        problems.append(f"script[{i}].utterance must be a string")
                        continue
                    scenario.script.append((float(at_s), utterance))

        if problems:
            raise InvalidScenario(problems)
        return scenario.validated()


def demo_scenario() -> Scenario:
    """The six stock commands, one per device action, ten seconds apart."""
    script = [
        (0.0, "Main Switch On"),
        (10.0, "Main Switch OFF"),
        (20.0, "Light On"),
        (30.0, "Light Off"),
        (40.0, "Fan On"),
        (50.0, "Fan Off"),
    ]
    return Scenario(seed=42, script=script)
