"""Home side of the link: relay phone forwarder and appliance controller.

The relay phone receives command SMS, decodes the serialized payload and
pushes the raw bytes over the serial hop.  The controller walks a fixed
phase cycle per frame (execute, verify, acknowledge) and drives one relay
per appliance through a fault-injectable actuator.  The main switch is a
master relay: light and fan only have observable power when their own
relay and the supply relay are both closed, though acks always report the
device's own relay because that is what the controller can check.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Callable

from .codec import (
    Ack,
    CodecError,
    DeviceKind,
    SwitchAction,
    decode_stream,
    parse_payload,
    parse_wire,
    render_ack,
)
from .simnet import TIMER, SimEvent, Simulation

DISCOVERY_INTERVAL_S = 5.0


class IllegalTransition(RuntimeError):
    """Attempted phase change outside the allowed transition graph."""


class UnknownDevice(ValueError):
    """Command addressed a (kind, index) that is not registered."""


class ControllerPhase(str, enum.Enum):
    INIT = "INIT"
    BT_DISCOVERY = "BT_DISCOVERY"
    PAIRED = "PAIRED"
    IDLE = "IDLE"
    EXECUTING = "EXECUTING"
    VERIFYING = "VERIFYING"
    ACKING = "ACKING"


_ALLOWED_TRANSITIONS = {
    (ControllerPhase.INIT, ControllerPhase.BT_DISCOVERY),
    (ControllerPhase.BT_DISCOVERY, ControllerPhase.BT_DISCOVERY),
    (ControllerPhase.BT_DISCOVERY, ControllerPhase.PAIRED),
    (ControllerPhase.PAIRED, ControllerPhase.IDLE),
    (ControllerPhase.IDLE, ControllerPhase.EXECUTING),
    (ControllerPhase.EXECUTING, ControllerPhase.VERIFYING),
    (ControllerPhase.VERIFYING, ControllerPhase.ACKING),
    (ControllerPhase.ACKING, ControllerPhase.IDLE),
}


@dataclass(frozen=True)
class FailureMode:
    """Actuator fault model: NONE, STUCK, or FLAKY with failure odds p."""

    kind: str = "NONE"
    p: float = 0.0

    def __post_init__(self):
        if self.kind not in ("NONE", "STUCK", "FLAKY"):
            raise ValueError(f"unknown failure mode {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"failure probability {self.p!r} outside [0, 1]")
        if self.kind != "FLAKY" and self.p != 0.0:
            raise ValueError(f"probability only applies to FLAKY, not {self.kind}")

    @classmethod
    def parse(cls, text: str) -> "FailureMode":
        """Parse ``none``, ``stuck``, or ``flaky:<p>`` (case-insensitive)."""
        name, _, prob = text.strip().partition(":")
        kind = name.strip().upper()
        if kind == "FLAKY":
            try:
                return cls("FLAKY", float(prob))
            except ValueError:
                raise ValueError(f"bad FLAKY probability in {text!r}") from None
        if prob:
            raise ValueError(f"{kind} takes no probability, got {text!r}")
        return cls(kind)

    def to_dict(self) -> dict:
        out: dict = {"mode": self.kind}
        if self.kind == "FLAKY":
            out["p"] = self.p
        return out


NO_FAULT = FailureMode("NONE")

_DEVICE_SPEC_RE = re.compile(r"(SUPPLY|LIGHT|FAN)([1-9][0-9]*)\Z")


def parse_device_spec(text: str) -> tuple[DeviceKind, int]:
    """Parse a device name like ``FAN1`` into (kind, index)."""
    m = _DEVICE_SPEC_RE.fullmatch(text.strip().upper())
    if m is None:
        raise ValueError(f"bad device spec {text!r}, expected e.g. LIGHT1")
    return DeviceKind[m.group(1)], int(m.group(2))


def device_name(kind: DeviceKind, index: int) -> str:
    return f"{kind.ack_name}{index}"


@dataclass
class DeviceState:
    kind: DeviceKind
    index: int
    relay_on: bool = False
    failure_mode: FailureMode = NO_FAULT

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.ack_name,
            "index": self.index,
            "relay_on": self.relay_on,
            "failure": self.failure_mode.to_dict(),
        }


@dataclass(frozen=True)
class HomeSnapshot:
    """Point-in-time copy of relay states with derived effective power."""

    devices: tuple[dict, ...]
    supply_on: bool

    def device(self, kind: DeviceKind, index: int) -> dict:
        for d in self.devices:
            if d["kind"] == kind.ack_name and d["index"] == index:
                return d
        raise UnknownDevice(device_name(kind, index))

    def to_dict(self) -> dict:
        return {"devices": list(self.devices), "supply_on": self.supply_on}


class RelayPhone:
    """Bluetooth-side handset bridging SMS text to serial bytes.

    Inbound SMS carry a serialized escape-encoded payload; the decoded
    bytes go out as one serial frame, unvalidated, because grammar checks
    belong to the controller.  Inbound serial frames are ack text from the
    controller and are forwarded as plain SMS to the user's number.
    """

    def __init__(
        self,
        sim: Simulation,
        endpoint: str = "home_phone",
        controller_endpoint: str = "controller",
        user_endpoint: str = "user_phone",
    ):
        self.sim = sim
        self.endpoint = endpoint
        self.controller_endpoint = controller_endpoint
        self.user_endpoint = user_endpoint
        self.paired = False
        sim.register(endpoint, self._on_event)

    def _on_event(self, event: SimEvent) -> None:
        if event.kind == "SMS_DELIVER":
            self._forward(event.payload)
        elif event.kind == "SERIAL_DELIVER":
            self._relay_ack(bytes(event.payload))

    def _drop(self, reason: str, text: str) -> None:
        self.sim.log("FRAME_DROP", self.endpoint, self.controller_endpoint,
                     {"reason": reason, "text": text})

    def _forward(self, text: str) -> None:
        if not self.paired:
            self._drop("not_paired", text)
            return
        try:
            values = parse_payload(text)
            # Lenient decode: control bytes pass through so the controller
            # sees exactly what was sent and applies its own grammar.
            data = decode_stream(values, strict=False)
        except CodecError as exc:
            self._drop("bad_payload", f"{text} ({exc})")
            return
        if not data:
            self._drop("bad_payload", f"{text} (empty frame)")
            return
        self.sim.serial_send(self.endpoint, self.controller_endpoint, data)

    def _relay_ack(self, frame: bytes) -> None:
        self.sim.sms_send(self.endpoint, self.user_endpoint, frame.decode("latin-1"))


class Controller:
    """Microcontroller model: one frame at a time through a fixed cycle.

    Boot loops on Bluetooth discovery until the relay phone answers, then
    sits IDLE.  Each valid frame walks EXECUTING, VERIFYING, ACKING as
    zero-delay scheduled steps; frames landing mid-cycle wait in arrival
    order.  Malformed or unaddressable frames drop without any ack since
    the wire protocol defines none for them.
    """

    def __init__(
        self,
        sim: Simulation,
        relay: RelayPhone,
        devices: list[tuple[DeviceKind, int]] | None = None,
        phone_present: Callable[[], bool] | None = None,
        discovery_interval_s: float = DISCOVERY_INTERVAL_S,
        endpoint: str = "controller",
    ):
        self.sim = sim
        self.relay = relay
        self.endpoint = endpoint
        self.phone_present = phone_present if phone_present is not None else (lambda: True)
        self.discovery_interval_s = discovery_interval_s
        self.phase = ControllerPhase.INIT
        self.devices: dict[tuple[DeviceKind, int], DeviceState] = {}
        for kind, index in devices if devices is not None else [
            (DeviceKind.SUPPLY, 1),
            (DeviceKind.LIGHT, 1),
            (DeviceKind.FAN, 1),
        ]:
            self.devices[(kind, index)] = DeviceState(kind, index)
        self._inbox: list[bytes] = []
        self._current = None
        self._discovery_attempts = 0
        sim.register(endpoint, self._on_event)

    # -- phase machine -----------------------------------------------

    def _set_phase(self, new: ControllerPhase) -> None:
        if (self.phase, new) not in _ALLOWED_TRANSITIONS:
            raise IllegalTransition(f"{self.phase.value} -> {new.value}")
        changed = new != self.phase
        self.phase = new
        if changed:
            self.sim.log("PHASE", self.endpoint, self.endpoint, {"phase": new.value})

    def boot(self) -> None:
        self._set_phase(ControllerPhase.BT_DISCOVERY)
        self._schedule_step("discovery", delay=0.0)

    def _schedule_step(self, what: str, delay: float) -> None:
        self.sim.schedule(self.sim.now + delay, TIMER, {"what": what},
                          self.endpoint, self.endpoint)

    def _on_event(self, event: SimEvent) -> None:
        if event.kind == TIMER:
            what = event.payload["what"]
            if what == "discovery":
                self._discover()
            elif what == "verify":
                self._verify_step()
            elif what == "ack":
                self._ack_step()
        elif event.kind == "SERIAL_DELIVER":
            frame = bytes(event.payload)
            if self.phase is ControllerPhase.IDLE:
                self._start_frame(frame)
            else:
                self._inbox.append(frame)

    def _discover(self) -> None:
        self._discovery_attempts += 1
        found = self.phone_present()
        self.sim.log("BT_DISCOVERY", self.endpoint, self.relay.endpoint,
                     {"found": found, "attempt": self._discovery_attempts})
        if found:
            self.relay.paired = True
            self._set_phase(ControllerPhase.PAIRED)
            self._enter_idle()
        else:
            self._set_phase(ControllerPhase.BT_DISCOVERY)
            self._schedule_step("discovery", delay=self.discovery_interval_s)

    def _enter_idle(self) -> None:
        self._set_phase(ControllerPhase.IDLE)
        if self._inbox:
            self._start_frame(self._inbox.pop(0))

    # -- frame cycle -------------------------------------------------

    def _start_frame(self, frame: bytes) -> None:
        text = frame.decode("latin-1")
        try:
            command = parse_wire(text)
        except CodecError:
            self.sim.log("FRAME_DROP", self.endpoint, self.endpoint,
                         {"reason": "bad_grammar", "bytes": list(frame)})
            return
        if (command.device, command.index) not in self.devices:
            self.sim.log("FRAME_DROP", self.endpoint, self.endpoint,
                         {"reason": "unknown_device", "text": text})
            return
        self._current = command
        self._set_phase(ControllerPhase.EXECUTING)
        self.actuate(command.device, command.index, command.action)
        self._schedule_step("verify", delay=0.0)

    def _verify_step(self) -> None:
        self._set_phase(ControllerPhase.VERIFYING)
        command = self._current
        ok = self.verify(command.device, command.index, command.action)
        self._verified_ok = ok
        self._schedule_step("ack", delay=0.0)

    def _ack_step(self) -> None:
        self._set_phase(ControllerPhase.ACKING)
        command = self._current
        ack_text = render_ack(Ack(command.device, command.index, command.action,
                                  self._verified_ok))
        self.sim.serial_send(self.endpoint, self.relay.endpoint,
                             ack_text.encode("ascii"))
        self._current = None
        self._enter_idle()

    # -- actuation ---------------------------------------------------

    def _device(self, kind: DeviceKind, index: int) -> DeviceState:
        try:
            return self.devices[(kind, index)]
        except KeyError:
            raise UnknownDevice(device_name(kind, index)) from None

    def actuate(self, kind: DeviceKind, index: int, action: SwitchAction) -> bool:
        """Pulse the switching circuit; returns true (the pulse is sent).

        STUCK leaves the relay unchanged; FLAKY leaves it unchanged with
        probability p.  Failures surface only through :meth:`verify`.
        """
        device = self._device(kind, index)
        mode = device.failure_mode
        stuck = mode.kind == "STUCK" or (
            mode.kind == "FLAKY" and self.sim.rng.chance(mode.p)
        )
        if not stuck:
            device.relay_on = action is SwitchAction.ON
        self.sim.log("ACTUATE", self.endpoint, device_name(kind, index),
                     {"action": action.wire_text, "relay_on": device.relay_on})
        return True

    def verify(self, kind: DeviceKind, index: int, expected: SwitchAction) -> bool:
        device = self._device(kind, index)
        ok = device.relay_on == (expected is SwitchAction.ON)
        self.sim.log("VERIFY", self.endpoint, device_name(kind, index),
                     {"action": expected.wire_text, "ok": ok})
        return ok

    def set_failure(self, kind: DeviceKind, index: int, mode: FailureMode) -> None:
        self._device(kind, index).failure_mode = mode

    # -- observation -------------------------------------------------

    def snapshot(self) -> HomeSnapshot:
        supply_on = all(
            d.relay_on for d in self.devices.values() if d.kind is DeviceKind.SUPPLY
        )
        rows = []
        for key in sorted(self.devices, key=lambda k: (list(DeviceKind).index(k[0]), k[1])):
            device = self.devices[key]
            if device.kind is DeviceKind.SUPPLY:
                effective = device.relay_on
            else:
                effective = device.relay_on and supply_on
            row = device.to_dict()
            row["effective_on"] = effective
            rows.append(row)
        return HomeSnapshot(devices=tuple(rows), supply_on=supply_on)
