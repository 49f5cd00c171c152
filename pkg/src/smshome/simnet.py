"""Deterministic discrete-event core with SMS and serial channel models.

A :class:`Simulation` owns the virtual clock, the event queue, the random
source and the append-only event log.  Endpoints (phones, controller)
register a handler per address; channel sends draw their impairments from
the seeded generator, so identical seed and stimulus always reproduce a
byte-identical log.

Time is float seconds.  The random source is Mersenne Twister consumed
exclusively through ``random()``, the one method with a cross-version
stream guarantee, so runs replay identically across platforms.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass
from typing import Any, Callable

# Queue event kinds.  Everything else that appears in the log (SMS_SEND,
# PHASE, TICKET, ...) is a record kind written by whoever observed it.
SMS_DELIVER = "SMS_DELIVER"
SERIAL_DELIVER = "SERIAL_DELIVER"
TIMER = "TIMER"

SMS_MAX_CHARS = 160

# Start bit + 8 data bits + stop bit per byte on the serial line.
SERIAL_BITS_PER_BYTE = 10


class PastEvent(ValueError):
    """An event was scheduled before the current simulated time."""


class OversizedSms(ValueError):
    """SMS text exceeds the single-message character cap."""


@dataclass
class SmsChannelConfig:
    """Impairment knobs for the simulated GSM text-message path."""

    base_delay_s: float = 2.0
    jitter_s: float = 0.0
    loss_prob: float = 0.0
    dup_prob: float = 0.0
    reorder_window_s: float = 0.0

    def problems(self) -> list[str]:
        out = []
        if self.base_delay_s < 0:
            out.append("base_delay_s must be >= 0")
        if self.jitter_s < 0:
            out.append("jitter_s must be >= 0")
        for name in ("loss_prob", "dup_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                out.append(f"{name} must be within [0, 1]")
        if self.reorder_window_s < 0:
            out.append("reorder_window_s must be >= 0")
        return out

    def to_dict(self) -> dict[str, float]:
        return {
            "base_delay_s": self.base_delay_s,
            "jitter_s": self.jitter_s,
            "loss_prob": self.loss_prob,
            "dup_prob": self.dup_prob,
            "reorder_window_s": self.reorder_window_s,
        }


@dataclass
class SerialLinkConfig:
    """Rate and corruption model for the short-range serial hop."""

    baud: float = 9600.0
    corrupt_prob: float = 0.0

    def problems(self) -> list[str]:
        out = []
        if self.baud <= 0:
            out.append("baud must be > 0")
        if not 0.0 <= self.corrupt_prob <= 1.0:
            out.append("corrupt_prob must be within [0, 1]")
        return out

    def to_dict(self) -> dict[str, float]:
        return {"baud": self.baud, "corrupt_prob": self.corrupt_prob}


class SimRng:
    """Seeded uniform source (MT19937, ``random()`` draws only)."""

    def __init__(self, seed: int):
        self.seed = seed
        self._mt = random.Random(seed)

    def random(self) -> float:
        return self._mt.random()

    def chance(self, p: float) -> bool:
        return self._mt.random() < p

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self._mt.random()

    def below(self, n: int) -> int:
        """Integer in [0, n); n must be positive."""
        return min(n - 1, int(self._mt.random() * n))


@dataclass
class SimEvent:
    """One queued occurrence; dequeues in (ts, seq) order."""

    ts: float
    seq: int
    kind: str
    payload: Any
    src: str
    dst: str


def format_record(record: dict) -> str:
    """Canonical single-line JSON for one log record."""
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def dump_jsonl(records: list[dict]) -> str:
    """Render records as JSON Lines; empty input yields the empty string."""
    return "".join(format_record(r) + "\n" for r in records)


class Simulation:
    """Single-owner event core: all state mutates inside event processing.

    ``records`` is the append-only run log; each entry carries
    ``{ts, seq, kind, src, dst, payload}`` with ``seq`` equal to its
    position.  ``on_record`` (if set) observes every append.
    """

    def __init__(
        self,
        seed: int = 0,
        sms: SmsChannelConfig | None = None,
        serial: SerialLinkConfig | None = None,
    ):
        self.now = 0.0
        self.rng = SimRng(seed)
        self.sms = sms if sms is not None else SmsChannelConfig()
        self.serial = serial if serial is not None else SerialLinkConfig()
        self.records: list[dict] = []
        self.on_record: Callable[[dict], None] | None = None
        self._heap: list[tuple[float, int, SimEvent]] = []
        self._next_seq = 0
        self._cancelled: set[int] = set()
        self._handlers: dict[str, Callable[[SimEvent], None]] = {}

    # -- endpoints ---------------------------------------------------

    def register(self, endpoint: str, handler: Callable[[SimEvent], None]) -> None:
        self._handlers[endpoint] = handler

    # -- queue -------------------------------------------------------

    def schedule(self, ts: float, kind: str, payload: Any, src: str, dst: str) -> int:
        """Enqueue an event; returns a token usable with :meth:`cancel`."""
        if ts < self.now:
            raise PastEvent(f"cannot schedule at {ts} before now={self.now}")
        seq = self._next_seq
        self._next_seq += 1
        heapq.heappush(self._heap, (ts, seq, SimEvent(ts, seq, kind, payload, src, dst)))
        return seq

    def cancel(self, token: int) -> None:
        self._cancelled.add(token)

    def peek_ts(self) -> float | None:
        """Timestamp of the next live event, or None when idle."""
        while self._heap:
            ts, seq, _ = self._heap[0]
            if seq in self._cancelled:
                heapq.heappop(self._heap)
                self._cancelled.discard(seq)
                continue
            return ts
        return None

    def process_one(self) -> SimEvent | None:
        """Pop and dispatch the next live event; None when the queue is empty."""
        if self.peek_ts() is None:
            return None
        _, _, event = heapq.heappop(self._heap)
        self.now = event.ts
        if event.kind == SMS_DELIVER:
            self.log(SMS_DELIVER, event.src, event.dst, {"text": event.payload})
        elif event.kind == SERIAL_DELIVER:
            self.log(SERIAL_DELIVER, event.src, event.dst, {"bytes": list(event.payload)})
        handler = self._handlers.get(event.dst)
        if handler is not None:
            handler(event)
        return event

    def step_until(self, t: float) -> list[SimEvent]:
        """Process every event with ts <= t in order; leaves now == t."""
        if t < self.now:
            raise ValueError(f"cannot step backwards to {t} from {self.now}")
        processed = []
        while True:
            next_ts = self.peek_ts()
            if next_ts is None or next_ts > t:
                break
            processed.append(self.process_one())
        self.now = t
        return processed

    def run_until_idle(self, limit: float) -> list[SimEvent]:
        """Process events until the queue empties or the next one is past limit."""
        processed = []
        while True:
            next_ts = self.peek_ts()
            if next_ts is None or next_ts > limit:
                break
            processed.extend(self.step_until(next_ts))
        return processed

    def advance_clock(self, t: float) -> None:
        """Move the clock forward without processing; used by log replay."""
        if t < self.now:
            raise ValueError(f"cannot move clock backwards to {t} from {self.now}")
        next_ts = self.peek_ts()
        if next_ts is not None and next_ts < t:
            raise ValueError(f"queued event at {next_ts} precedes clock target {t}")
        self.now = t

    # -- log ---------------------------------------------------------

    def log(self, kind: str, src: str, dst: str, payload: Any) -> dict:
        record = {
            "ts": self.now,
            "seq": len(self.records),
            "kind": kind,
            "src": src,
            "dst": dst,
            "payload": payload,
        }
        self.records.append(record)
        if self.on_record is not None:
            self.on_record(record)
        return record

    def to_jsonl(self) -> str:
        return dump_jsonl(self.records)

    # -- channels ----------------------------------------------------

    def _sms_delay(self, cfg: SmsChannelConfig) -> float:
        delay = (
            cfg.base_delay_s
            + self.rng.uniform(-cfg.jitter_s, cfg.jitter_s)
            + self.rng.uniform(0.0, cfg.reorder_window_s)
        )
        return max(0.0, delay)

    def sms_send(self, src: str, dst: str, text: str) -> None:
        """Send one text message through the impaired GSM path.

        The message is lost with ``loss_prob``; otherwise it is delivered
        after base delay plus uniform jitter plus a uniform reordering
        component, and with ``dup_prob`` a second copy follows at an
        independently drawn delay.
        """
        if not text:
            raise ValueError("SMS text must be non-empty")
        if len(text) > SMS_MAX_CHARS:
            raise OversizedSms(f"SMS of {len(text)} chars exceeds {SMS_MAX_CHARS}")
        cfg = self.sms
        self.log("SMS_SEND", src, dst, {"text": text})
        if self.rng.chance(cfg.loss_prob):
            self.log("SMS_LOST", src, dst, {"text": text})
            return
        self.schedule(self.now + self._sms_delay(cfg), SMS_DELIVER, text, src, dst)
        if self.rng.chance(cfg.dup_prob):
            self.log("SMS_DUP", src, dst, {"text": text})
            self.schedule(self.now + self._sms_delay(cfg), SMS_DELIVER, text, src, dst)

    def serial_send(self, src: str, dst: str, frame: bytes) -> None:
        """Send one frame over the serial hop.

        Transmission takes 10 bits per byte at the configured baud rate.
        With ``corrupt_prob`` one byte is delivered with its high bit
        flipped, which is guaranteed to fall outside both text grammars.
        """
        if not frame:
            raise ValueError("serial frame must be non-empty")
        data = bytes(frame)
        corrupt = self.rng.chance(self.serial.corrupt_prob)
        delivered = data
        if corrupt:
            pos = self.rng.below(len(data))
            delivered = data[:pos] + bytes([data[pos] ^ 0x80]) + data[pos + 1 :]
        self.log("SERIAL_SEND", src, dst, {"bytes": list(data), "corrupt": corrupt})
        delay = (SERIAL_BITS_PER_BYTE * len(data)) / self.serial.baud
        self.schedule(self.now + delay, SERIAL_DELIVER, delivered, src, dst)
