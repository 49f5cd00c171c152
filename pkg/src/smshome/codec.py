"""Text and byte codecs for the SMS appliance-control protocol.

Three formats live here:

* wire commands: compact ASCII strings such as ``LON1E``, built from a
  device letter (``S``/``L``/``F``), an action (``ON``/``OFF``), a decimal
  device index and the terminator ``E``
* acknowledgements: feedback strings such as ``LIGHT 1 on``; a trailing
  `` 0`` marks a failed operation
* payload escape: SMS bodies carry wire bytes as an unsigned integer
  sequence in which control values 0-31 are shifted up by 255, serialized
  as comma-separated decimals

Every parser is a strict inverse of its renderer.  All functions are pure
and safe to call concurrently.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterable

__all__ = [
    "DeviceKind",
    "SwitchAction",
    "VoiceCommand",
    "Ack",
    "CodecError",
    "UnrecognizedUtterance",
    "MalformedWire",
    "MalformedAck",
    "UnencodableByte",
    "MalformedPayload",
    "parse_utterance",
    "render_wire",
    "parse_wire",
    "render_ack",
    "parse_ack",
    "encode_stream",
    "decode_stream",
    "serialize_payload",
    "parse_payload",
]

# Escape encoding constants: input bytes 0..31 are shifted by 255 into
# 255..286; everything else rides through untouched.
ESCAPE_OFFSET = 255
CONTROL_MAX = 31
PAYLOAD_MAX = CONTROL_MAX + ESCAPE_OFFSET  # 286


class CodecError(ValueError):
    """Base class for every parse or encode failure in this module."""


class UnrecognizedUtterance(CodecError):
    """The utterance names no known device phrase or action."""


class MalformedWire(CodecError):
    """Text does not match the wire command grammar."""


class MalformedAck(CodecError):
    """Text does not match the acknowledgement grammar."""


class UnencodableByte(CodecError):
    """Input byte cannot be escaped without colliding with an escape value."""


class MalformedPayload(CodecError):
    """Serialized payload contains a value no encoder can produce."""


class DeviceKind(enum.Enum):
    """The three switchable device kinds and their two wire spellings."""

    SUPPLY = ("S", "SUPPLY")
    LIGHT = ("L", "LIGHT")
    FAN = ("F", "FAN")

    def __init__(self, wire_letter: str, ack_name: str):
        self.wire_letter = wire_letter
        self.ack_name = ack_name


_BY_LETTER = {kind.wire_letter: kind for kind in DeviceKind}
_BY_ACK_NAME = {kind.ack_name: kind for kind in DeviceKind}

# Spoken device phrases, matched case-insensitively after whitespace
# normalization.  "main switch" is the supply master relay.
_PHRASES = {
    "main switch": DeviceKind.SUPPLY,
    "light": DeviceKind.LIGHT,
    "fan": DeviceKind.FAN,
}


class SwitchAction(enum.Enum):
    """On/off action; rendered ``ON``/``OFF`` on the wire, lowercase in acks."""

    ON = "ON"
    OFF = "OFF"

    @property
    def wire_text(self) -> str:
        return self.value

    @property
    def ack_text(self) -> str:
        return self.value.lower()


@dataclass(frozen=True)
class VoiceCommand:
    """A parsed command intent: which device, which way, which unit."""

    device: DeviceKind
    action: SwitchAction
    index: int = 1

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"device index must be >= 1, got {self.index}")


@dataclass(frozen=True)
class Ack:
    """Operation feedback; ``success=False`` renders the trailing `` 0``."""

    device: DeviceKind
    index: int
    action: SwitchAction
    success: bool

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"device index must be >= 1, got {self.index}")


_UTTERANCE_RE = re.compile(r"(main switch|light|fan) (on|off)(?: ([0-9]+))?\Z")
_WIRE_RE = re.compile(r"([SLF])(ON|OFF)([1-9][0-9]*)E\Z")
_ACK_RE = re.compile(r"(SUPPLY|LIGHT|FAN) ([1-9][0-9]*) (on|off)( 0)?\Z")
_PAYLOAD_TOKEN_RE = re.compile(r"[0-9]+\Z")


def parse_utterance(text: str) -> VoiceCommand:
    """Interpret a spoken-style utterance such as ``"Light On"``.

    Matching is case-insensitive and tolerant of extra whitespace.  An
    optional trailing integer selects the device index (default 1).

    Raises:
        UnrecognizedUtterance: no device phrase or action was found.
    """
    normalized = " ".join(text.lower().split())
    match = _UTTERANCE_RE.fullmatch(normalized)
    if match is None:
        raise UnrecognizedUtterance(f"cannot interpret utterance: {text!r}")
    index = int(match.group(3)) if match.group(3) else 1
    if index < 1:
        raise UnrecognizedUtterance(f"device index must be >= 1: {text!r}")
    return VoiceCommand(
        device=_PHRASES[match.group(1)],
        action=SwitchAction.ON if match.group(2) == "on" else SwitchAction.OFF,
        index=index,
    )


def render_wire(cmd: VoiceCommand) -> str:
    """Render the compact wire string, e.g. ``LON1E``."""
    return f"{cmd.device.wire_letter}{cmd.action.wire_text}{cmd.index}E"


def parse_wire(text: str) -> VoiceCommand:
    """Parse a wire command string; exact inverse of :func:`render_wire`.

    Surrounding whitespace is trimmed before matching; anything else
    (unknown letter, bad action, leading-zero index, missing terminator,
    trailing garbage) is rejected.

    Raises:
        MalformedWire: the grammar does not match.
    """
    match = _WIRE_RE.fullmatch(text.strip())
    if match is None:
        raise MalformedWire(f"not a wire command: {text!r}")
    return VoiceCommand(
        device=_BY_LETTER[match.group(1)],
        action=SwitchAction.ON if match.group(2) == "ON" else SwitchAction.OFF,
        index=int(match.group(3)),
    )


def render_ack(ack: Ack) -> str:
    """Render an acknowledgement, e.g. ``LIGHT 1 on`` or ``FAN 1 off 0``."""
    text = f"{ack.device.ack_name} {ack.index} {ack.action.ack_text}"
    return text if ack.success else text + " 0"


def parse_ack(text: str) -> Ack:
    """Parse an acknowledgement string; exact inverse of :func:`render_ack`.

    Raises:
        MalformedAck: the grammar does not match.
    """
    match = _ACK_RE.fullmatch(text.strip())
    if match is None:
        raise MalformedAck(f"not an acknowledgement: {text!r}")
    return Ack(
        device=_BY_ACK_NAME[match.group(1)],
        index=int(match.group(2)),
        action=SwitchAction.ON if match.group(3) == "on" else SwitchAction.OFF,
        success=match.group(4) is None,
    )


def encode_stream(data: bytes | Iterable[int]) -> list[int]:
    """Escape a byte stream into the integer sequence carried by SMS.

    Values 0-31 become value+255 (so 0 -> 255, 31 -> 286); values 32-254
    pass through.  Output length always equals input length.

    Raises:
        UnencodableByte: an input byte is 255, which would collide with
            the escaped form of 0, or lies outside 0-255.
    """
    out: list[int] = []
    for offset, value in enumerate(data):
        if value < 0 or value > 255:
            raise UnencodableByte(f"value {value} at offset {offset} is not a byte")
        if value == 255:
            raise UnencodableByte(
                f"byte 255 at offset {offset} collides with the escape range"
            )
        out.append(value + ESCAPE_OFFSET if value <= CONTROL_MAX else value)
    return out


def decode_stream(values: Iterable[int], *, strict: bool = True) -> bytes:
    """Invert :func:`encode_stream`: 255-286 map back to 0-31, 32-254 pass.

    With ``strict=False`` raw control values 0-31 are passed through
    instead of rejected; relays use that mode so grammar validation stays
    with the receiving controller.

    Raises:
        MalformedPayload: a value lies outside what the encoder can emit.
    """
    out = bytearray()
    for offset, value in enumerate(values):
        if ESCAPE_OFFSET <= value <= PAYLOAD_MAX:
            out.append(value - ESCAPE_OFFSET)
        elif CONTROL_MAX < value < ESCAPE_OFFSET:
            out.append(value)
        elif 0 <= value <= CONTROL_MAX and not strict:
            out.append(value)
        else:
            raise MalformedPayload(f"value {value} at offset {offset} is not decodable")
    return bytes(out)


def serialize_payload(values: Iterable[int]) -> str:
    """Serialize an encoded payload as comma-separated decimals, no spaces."""
    return ",".join(str(value) for value in values)


def parse_payload(text: str) -> list[int]:
    """Parse the comma-separated decimal serialization back to integers.

    Raises:
        MalformedPayload: a token is empty or not a plain decimal number.
    """
    if text == "":
        return []
    values: list[int] = []
    for token in text.split(","):
        if _PAYLOAD_TOKEN_RE.fullmatch(token) is None:
            raise MalformedPayload(f"bad payload token: {token!r}")
        values.append(int(token))
    return values
