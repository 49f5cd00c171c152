"""Simulated SMS-driven home appliance control, end to end.

The pieces chain the way the hardware would: a remote phone renders an
utterance to a wire command and sends it as SMS over a lossy channel; the
home-side relay phone forwards the bytes over serial; the controller
executes, verifies against its relays, and acks back along the same path.
Everything runs on one deterministic discrete-event clock, so every run
is replayable from its log.

>>> from smshome import demo_scenario, run_scenario
>>> world = run_scenario(demo_scenario())
>>> [t["state"] for t in world.phone.tickets()]
['ACKED_OK', 'ACKED_OK', 'ACKED_OK', 'ACKED_OK', 'ACKED_OK', 'ACKED_OK']
"""

from .client import CommandTicket, RetryPolicy, TicketState
from .codec import (
    Ack,
    CodecError,
    DeviceKind,
    SwitchAction,
    UnrecognizedUtterance,
    VoiceCommand,
    decode_stream,
    encode_stream,
    parse_ack,
    parse_utterance,
    parse_wire,
    render_ack,
    render_wire,
)
from .controller import Controller, ControllerPhase, FailureMode
from .fuzz import FuzzReport, fuzz_codec
from .runner import ReplayResult, read_log, replay_log, run_scenario, write_log
from .scenario import InvalidScenario, Scenario, demo_scenario
from .service import create_app
from .simnet import SerialLinkConfig, Simulation, SmsChannelConfig
from .world import HomeWorld

__version__ = "0.1.0"

__all__ = [
    "Ack",
    "CodecError",
    "CommandTicket",
    "Controller",
    "ControllerPhase",
    "DeviceKind",
    "FailureMode",
    "FuzzReport",
    "HomeWorld",
    "InvalidScenario",
    "ReplayResult",
    "RetryPolicy",
    "Scenario",
    "SerialLinkConfig",
    "Simulation",
    "SmsChannelConfig",
    "SwitchAction",
    "TicketState",
    "UnrecognizedUtterance",
    "VoiceCommand",
    "create_app",
    "decode_stream",
    "demo_scenario",
    "encode_stream",
    "fuzz_codec",
    "parse_ack",
    "parse_utterance",
    "parse_wire",
    "read_log",
    "render_ack",
    "render_wire",
    "replay_log",
    "run_scenario",
    "write_log",
]
