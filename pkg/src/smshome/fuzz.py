"""Seeded property fuzzer for the codec layer.

Five properties rotate across iterations: wire round trip, ack round
trip, escape-encoding bijectivity (with payload serialization), wire
grammar fixpoint on arbitrary text, and rejection of the inescapable
byte 255.  The encoder and decoder are injectable so the fuzzer can be
turned on a deliberately broken decoder to prove it catches bugs.
Counterexamples are greedily shrunk before reporting.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Sequence

from .codec import (
    Ack,
    CodecError,
    DeviceKind,
    SwitchAction,
    UnencodableByte,
    VoiceCommand,
    decode_stream,
    encode_stream,
    parse_ack,
    parse_payload,
    parse_wire,
    render_ack,
    render_wire,
    serialize_payload,
)

# Alphabet biased toward the wire grammar so random text sometimes parses.
_GRAMMAR_CHARS = "SLFONE123E0 #x"


@dataclass(frozen=True)
class FuzzReport:
    iterations: int
    seed: int
    ok: bool
    failed_check: str | None = None
    counterexample: str | None = None
    detail: str | None = None

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "seed": self.seed,
            "ok": self.ok,
            "failed_check": self.failed_check,
            "counterexample": self.counterexample,
            "detail": self.detail,
        }


class _CheckFailed(AssertionError):
    def __init__(self, detail: str, data: bytes | None = None):
        self.detail = detail
        self.data = data  # raw byte input, set when shrinkable
        super().__init__(detail)


def _check_wire_round_trip(rng: random.Random, encode, decode) -> None:
    command = VoiceCommand(
        device=rng.choice(list(DeviceKind)),
        action=rng.choice(list(SwitchAction)),
        index=rng.choice((1, 1, 2, 3, 9, rng.randint(1, 9999))),
    )
    wire = render_wire(command)
    back = parse_wire(wire)
    if back != command:
        raise _CheckFailed(f"{command} -> {wire!r} -> {back}")


def _check_ack_round_trip(rng: random.Random, encode, decode) -> None:
    ack = Ack(
        device=rng.choice(list(DeviceKind)),
        index=rng.choice((1, 1, 2, rng.randint(1, 9999))),
        action=rng.choice(list(SwitchAction)),
        success=rng.random() < 0.5,
    )
    text = render_ack(ack)
    back = parse_ack(text)
    if back != ack:
        raise _CheckFailed(f"{ack} -> {text!r} -> {back}")


def _bijectivity_detail(data: bytes, encode, decode) -> str | None:
    """Returns a failure description, or None when all properties hold."""
    try:
        values = encode(data)
    except CodecError as exc:
        return f"encode rejected legal input: {exc}"
    if len(values) != len(data):
        return f"length changed: {len(data)} bytes -> {len(values)} values"
    bad = [v for v in values if not 32 <= v <= 286]
    if bad:
        return f"encoded values outside [32, 286]: {bad[:5]}"
    try:
        back = decode(values)
    except CodecError as exc:
        return f"decode rejected encoder output: {exc}"
    if back != data:
        return f"decode is not the inverse: {list(data)} -> {values} -> {list(back)}"
    if parse_payload(serialize_payload(values)) != values:
        return "payload serialization round trip failed"
    return None


def _check_bijectivity(rng: random.Random, encode, decode) -> None:
    length = rng.randint(0, 40)
    data = bytes(rng.randint(0, 254) for _ in range(length))
    detail = _bijectivity_detail(data, encode, decode)
    if detail is not None:
        raise _CheckFailed(f"input {list(data)}: {detail}", data=data)


def _check_grammar_fixpoint(rng: random.Random, encode, decode) -> None:
    length = rng.randint(0, 10)
    text = "".join(rng.choice(_GRAMMAR_CHARS) for _ in range(length))
    try:
        command = parse_wire(text)
    except CodecError:
        return
    rendered = render_wire(command)
    if rendered != text.strip():
        raise _CheckFailed(f"parse accepted {text!r} but renders {rendered!r}")


def _check_byte_255_rejected(rng: random.Random, encode, decode) -> None:
    length = rng.randint(0, 15)
    data = list(rng.randbytes(length))
    data.insert(rng.randint(0, length), 255)
    try:
        encode(bytes(data))
    except UnencodableByte:
        return
    except CodecError as exc:
        raise _CheckFailed(f"input {data}: wrong rejection {type(exc).__name__}")
    raise _CheckFailed(f"input {data}: byte 255 was encoded")


_CHECKS: list[tuple[str, Callable]] = [
    ("wire_round_trip", _check_wire_round_trip),
    ("ack_round_trip", _check_ack_round_trip),
    ("encode_decode_bijectivity", _check_bijectivity),
    ("wire_grammar_fixpoint", _check_grammar_fixpoint),
    ("byte_255_rejected", _check_byte_255_rejected),
]


def _shrink_bytes(data: bytes, still_fails: Callable[[bytes], bool]) -> bytes:
    """Greedy minimization: drop bytes, then lower surviving values."""
    current = data
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(current):
            candidate = current[:i] + current[i + 1:]
            if still_fails(candidate):
                current = candidate
                changed = True
            else:
                i += 1
        for i in range(len(current)):
            for smaller in (0, 32):
                if current[i] > smaller:
                    candidate = current[:i] + bytes([smaller]) + current[i + 1:]
                    if still_fails(candidate):
                        current = candidate
                        changed = True
                        break
    return current


def _shrunk_counterexample(failure: _CheckFailed, encode, decode) -> str:
    """Minimize the failing input when the check exposed raw bytes."""
    if failure.data is None:
        return failure.detail
    small = _shrink_bytes(
        failure.data, lambda d: _bijectivity_detail(d, encode, decode) is not None
    )
    reason = _bijectivity_detail(small, encode, decode)
    return f"minimal input {list(small)}: {reason}"


def fuzz_codec(
    iterations: int,
    seed: int = 0,
    encode: Callable[[bytes], Sequence[int]] = encode_stream,
    decode: Callable[[Sequence[int]], bytes] = decode_stream,
) -> FuzzReport:
    """Run the property checks; stops and shrinks at the first failure."""
    if iterations <= 0:
        raise ValueError("iterations must be > 0")
    rng = random.Random(seed)
    for i in range(iterations):
        name, check = _CHECKS[i % len(_CHECKS)]
        try:
            check(rng, encode, decode)
        except _CheckFailed as failure:
            return FuzzReport(
                iterations=i + 1,
                seed=seed,
                ok=False,
                failed_check=name,
                counterexample=_shrunk_counterexample(failure, encode, decode),
                detail=failure.detail,
            )
    return FuzzReport(iterations=iterations, seed=seed, ok=True)


def mutant_decode(values: Sequence[int]) -> bytes:
    """Deliberately wrong decoder (off-by-one on escapes); self-test prey."""
    out = bytearray()
    for value in values:
        if value >= 255:
            out.append(value - 254)
        else:
            out.append(value)
    return bytes(out)
