"""Remote user's phone: utterance in, encoded SMS out, ack correlation.

Each submitted utterance becomes a ticket.  The wire protocol carries no
message IDs, so an incoming ack resolves the oldest pending ticket with
the same (device, index, action); two simultaneous identical commands can
therefore swap acks, which is harmless.  A per-ticket timer drives
resends until the retry budget runs out.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .codec import (
    MalformedAck,
    VoiceCommand,
    encode_stream,
    parse_ack,
    parse_utterance,
    render_wire,
    serialize_payload,
)
from .simnet import TIMER, SimEvent, Simulation


class TicketState(str, enum.Enum):
    PENDING = "PENDING"
    ACKED_OK = "ACKED_OK"
    ACKED_FAIL = "ACKED_FAIL"
    TIMED_OUT = "TIMED_OUT"


_TERMINAL = (TicketState.ACKED_OK, TicketState.ACKED_FAIL, TicketState.TIMED_OUT)


@dataclass
class RetryPolicy:
    timeout_s: float = 30.0
    max_retries: int = 2

    def problems(self) -> list[str]:
        out = []
        if self.timeout_s <= 0:
            out.append("timeout_s must be > 0")
        if self.max_retries < 0:
            out.append("max_retries must be >= 0")
        return out

    def to_dict(self) -> dict:
        return {"timeout_s": self.timeout_s, "max_retries": self.max_retries}


@dataclass
class CommandTicket:
    id: str
    utterance: str
    command: VoiceCommand
    wire: str
    state: TicketState
    attempts: int
    submitted_at: float
    resolved_at: float | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "utterance": self.utterance,
            "wire": self.wire,
            "device": self.command.device.ack_name,
            "index": self.command.index,
            "action": self.command.action.wire_text,
            "state": self.state.value,
            "attempts": self.attempts,
            "submitted_at": self.submitted_at,
            "resolved_at": self.resolved_at,
        }


class RemotePhone:
    """Ticket-tracking SMS sender bound to one simulation endpoint."""

    def __init__(
        self,
        sim: Simulation,
        policy: RetryPolicy | None = None,
        endpoint: str = "user_phone",
        home_endpoint: str = "home_phone",
    ):
        self.sim = sim
        self.policy = policy if policy is not None else RetryPolicy()
        self.endpoint = endpoint
        self.home_endpoint = home_endpoint
        self._tickets: list[CommandTicket] = []
        self._by_id: dict[str, CommandTicket] = {}
        self._timers: dict[str, int] = {}
        sim.register(endpoint, self._on_event)

    # -- submission --------------------------------------------------

    def submit(self, utterance: str) -> CommandTicket:
        """Parse, encode, send, and start the timeout clock.

        Raises:
            UnrecognizedUtterance: no ticket is created and no SMS sent.
        """
        command = parse_utterance(utterance)
        ticket = CommandTicket(
            id=f"t{len(self._tickets) + 1}",
            utterance=utterance,
            command=command,
            wire=render_wire(command),
            state=TicketState.PENDING,
            attempts=1,
            submitted_at=self.sim.now,
        )
        self._tickets.append(ticket)
        self._by_id[ticket.id] = ticket
        self._log_ticket(ticket)
        self._send(ticket)
        return ticket

    def _send(self, ticket: CommandTicket) -> None:
        payload = serialize_payload(encode_stream(ticket.wire.encode("ascii")))
        self.sim.sms_send(self.endpoint, self.home_endpoint, payload)
        self._timers[ticket.id] = self.sim.schedule(
            self.sim.now + self.policy.timeout_s, TIMER,
            {"what": "timeout", "ticket": ticket.id},
            self.endpoint, self.endpoint,
        )

    def _log_ticket(self, ticket: CommandTicket) -> None:
        self.sim.log("TICKET", self.endpoint, self.endpoint, ticket.to_dict())

    # -- event handling ----------------------------------------------

    def _on_event(self, event: SimEvent) -> None:
        if event.kind == "SMS_DELIVER":
            self._on_ack_sms(event.payload)
        elif event.kind == TIMER and event.payload.get("what") == "timeout":
            self._on_timeout(event.payload["ticket"])

    def _on_ack_sms(self, text: str) -> None:
        try:
            ack = parse_ack(text)
        except MalformedAck:
            self.sim.log("ACK_DISCARD", self.endpoint, self.endpoint,
                         {"reason": "malformed", "text": text})
            return
        for ticket in self._tickets:
            if ticket.state is not TicketState.PENDING:
                continue
            c = ticket.command
            if (c.device, c.index, c.action) == (ack.device, ack.index, ack.action):
                self._resolve(
                    ticket,
                    TicketState.ACKED_OK if ack.success else TicketState.ACKED_FAIL,
                )
                return
        self.sim.log("ACK_DISCARD", self.endpoint, self.endpoint,
                     {"reason": "orphan", "text": text})

    def _on_timeout(self, ticket_id: str) -> None:
        ticket = self._by_id[ticket_id]
        if ticket.state is not TicketState.PENDING:
            return  # stale timer after resolution
        if ticket.attempts <= self.policy.max_retries:
            ticket.attempts += 1
            self._log_ticket(ticket)
            self._send(ticket)
        else:
            self._resolve(ticket, TicketState.TIMED_OUT)

    def _resolve(self, ticket: CommandTicket, state: TicketState) -> None:
        assert state in _TERMINAL
        ticket.state = state
        ticket.resolved_at = self.sim.now
        token = self._timers.pop(ticket.id, None)
        if token is not None:
            self.sim.cancel(token)
        self._log_ticket(ticket)

    # -- observation -------------------------------------------------

    def tickets(self) -> list[dict]:
        return [t.to_dict() for t in self._tickets]

    def ticket(self, ticket_id: str) -> dict | None:
        ticket = self._by_id.get(ticket_id)
        return None if ticket is None else ticket.to_dict()
