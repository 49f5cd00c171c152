"""Assembled simulation: user phone, relay phone, controller, one log.

HomeWorld wires the three endpoints onto a single event core according
to a scenario and exposes the few mutations the outside is allowed:
submit an utterance, retune the SMS channel, set a failure mode, step
time.  Every mutation is stamped into the log (COMMAND, CONFIG, FAULT)
so a recorded run can be replayed record by record.
"""

from __future__ import annotations

from .client import RemotePhone
from .codec import DeviceKind, parse_utterance
from .controller import (
    Controller,
    FailureMode,
    RelayPhone,
    device_name,
    parse_device_spec,
)
from .scenario import Scenario
from .simnet import Simulation, SmsChannelConfig

USER = "user_phone"
HOME = "home_phone"
CONTROLLER = "controller"

# Record kinds written by intake mutations rather than event processing;
# replay re-applies these and regenerates everything else.
INJECTION_KINDS = ("COMMAND", "CONFIG", "FAULT")


class HomeWorld:
    """One complete simulated installation built from a scenario."""

    def __init__(self, scenario: Scenario):
        scenario.validated()
        self.scenario = scenario
        self.sim = Simulation(seed=scenario.seed, sms=scenario.sms, serial=scenario.serial)
        self.phone = RemotePhone(self.sim, policy=scenario.retry,
                                 endpoint=USER, home_endpoint=HOME)
        self.relay = RelayPhone(self.sim, endpoint=HOME,
                                controller_endpoint=CONTROLLER, user_endpoint=USER)
        self.controller = Controller(
            self.sim,
            self.relay,
            devices=[(kind, index) for kind, index, _ in scenario.devices],
            phone_present=self._phone_present,
            endpoint=CONTROLLER,
        )
        for kind, index, mode in scenario.devices:
            self.controller.set_failure(kind, index, mode)
        self.sim.log("RUN_START", "operator", "sim", {"scenario": scenario.to_dict()})
        self.controller.boot()

    def _phone_present(self) -> bool:
        at = self.scenario.phone_available_at
        return at is not None and self.sim.now >= at

    # -- intake (each call writes one injection record) ---------------

    def submit(self, utterance: str) -> dict:
        """Hand an utterance to the user phone; returns the ticket view.

        Raises:
            UnrecognizedUtterance: nothing is logged and no SMS sent.
        """
        parse_utterance(utterance)
        self.sim.log("COMMAND", "operator", USER, {"utterance": utterance})
        return self.phone.submit(utterance).to_dict()

    def set_channel(self, config: dict) -> dict:
        """Replace the SMS impairment config; applies to subsequent sends."""
        allowed = set(SmsChannelConfig().__dict__)
        unknown = [k for k in config if k not in allowed]
        if unknown:
            raise ValueError(f"unknown channel fields: {', '.join(sorted(unknown))}")
        cfg = SmsChannelConfig(**config)
        problems = cfg.problems()
        if problems:
            raise ValueError("; ".join(problems))
        self.sim.log("CONFIG", "operator", "sim", {"sms": cfg.to_dict()})
        self.sim.sms = cfg
        return cfg.to_dict()

    def set_failure(self, kind: DeviceKind, index: int, mode: FailureMode) -> dict:
        """Set one device's actuator fault model, logged for replay."""
        # Validate the address before logging so a bad device leaves no record.
        self.controller._device(kind, index)
        self.sim.log("FAULT", "operator", device_name(kind, index),
                     {"device": device_name(kind, index), "failure": mode.to_dict()})
        self.controller.set_failure(kind, index, mode)
        return self.controller.snapshot().device(kind, index)

    def apply_injection(self, record: dict) -> None:
        """Re-apply one logged intake mutation; the replay driver's hook."""
        kind = record["kind"]
        payload = record["payload"]
        if kind == "COMMAND":
            self.submit(payload["utterance"])
        elif kind == "CONFIG":
            self.set_channel(payload["sms"])
        elif kind == "FAULT":
            device_kind, index = parse_device_spec(payload["device"])
            fault = payload["failure"]
            mode = FailureMode(fault["mode"], fault.get("p", 0.0))
            self.set_failure(device_kind, index, mode)
        else:
            raise ValueError(f"not an injection record: {kind}")

    # -- time --------------------------------------------------------

    def step(self, seconds: float) -> int:
        """Advance simulated time; returns how many events were processed."""
        if seconds < 0:
            raise ValueError("cannot step a negative duration")
        return len(self.sim.step_until(self.sim.now + seconds))

    def run_until_idle(self, limit: float) -> int:
        return len(self.sim.run_until_idle(limit))

    # -- observation -------------------------------------------------

    @property
    def records(self) -> list[dict]:
        return self.sim.records

    def snapshot(self) -> dict:
        home = self.controller.snapshot()
        return {
            "now": self.sim.now,
            "phase": self.controller.phase.value,
            "supply_on": home.supply_on,
            "devices": list(home.devices),
            "tickets": self.phone.tickets(),
            "sms": self.sim.sms.to_dict(),
        }

    def to_jsonl(self) -> str:
        return self.sim.to_jsonl()
