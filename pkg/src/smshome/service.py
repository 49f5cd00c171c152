"""HTTP host for one live simulation: REST mutations plus an event stream.

A single lock serializes every mutation into the simulation, so
concurrent API clients cannot interleave partial state; reads hand out
immutable snapshots taken under the same lock.  The event stream is
server-sent events with ``id:`` set to the record seq, supporting
resume via ``since_seq`` or ``Last-Event-ID``.  In REALTIME mode a
background thread advances simulated time at a wall-clock multiple;
in STEPPED mode time moves only through the step endpoint.
"""

from __future__ import annotations

import asyncio
import contextlib
import queue
import threading
import time
from datetime import datetime
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .codec import UnrecognizedUtterance
from .controller import FailureMode, UnknownDevice, parse_device_spec
from .scenario import Scenario
from .simnet import format_record
from .world import HomeWorld

REALTIME_TICK_S = 0.02
STREAM_POLL_S = 0.02


class SimulationHost:
    """Owns the world, the log file, and the stream subscriber registry."""

    def __init__(self, scenario: Scenario, runs_dir: str | Path | None = None):
        self.lock = threading.Lock()
        self.scenario = scenario
        self.world = HomeWorld(scenario)
        self._subscribers: list[queue.SimpleQueue] = []
        self._log_file = None
        self.log_path: Path | None = None
        if runs_dir is not None:
            stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
            self.log_path = Path(runs_dir) / f"{stamp}-seed{scenario.seed}.jsonl"
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            self._log_file = self.log_path.open("w", encoding="utf-8")
            for record in self.world.records:
                self._log_file.write(format_record(record) + "\n")
            self._log_file.flush()
        self.world.sim.on_record = self._on_record
        self._stop = threading.Event()
        self._driver: threading.Thread | None = None
        # Settle t=0 events (discovery) so a fresh host is observable.
        with self.lock:
            self.world.sim.step_until(0.0)

    # -- record fan-out (always called with the lock held) ------------

    def _on_record(self, record: dict) -> None:
        if self._log_file is not None:
            self._log_file.write(format_record(record) + "\n")
            self._log_file.flush()
        for subscriber in self._subscribers:
            subscriber.put(record)

    def subscribe(self, since_seq: int | None) -> tuple[list[dict], queue.SimpleQueue]:
        """Atomically take the history slice and join the live feed.

        since_seq None means live-only; -1 means full history; k >= 0
        resumes with the first record after seq k.
        """
        subscriber: queue.SimpleQueue = queue.SimpleQueue()
        with self.lock:
            history = [] if since_seq is None else self.world.records[since_seq + 1:]
            self._subscribers.append(subscriber)
        return list(history), subscriber

    def unsubscribe(self, subscriber: queue.SimpleQueue) -> None:
        with self.lock:
            if subscriber in self._subscribers:
                self._subscribers.remove(subscriber)

    # -- serialized mutations -----------------------------------------

    def submit(self, utterance: str) -> dict:
        with self.lock:
            return self.world.submit(utterance)

    def step(self, seconds: float) -> dict:
        if self.scenario.run_mode != "stepped":
            raise RuntimeError("stepping is only available in stepped mode")
        with self.lock:
            processed = self.world.step(seconds)
            return {"processed": processed, "now": self.world.sim.now}

    def set_failure(self, kind, index: int, mode: FailureMode) -> dict:
        with self.lock:
            return self.world.set_failure(kind, index, mode)

    def set_channel(self, config: dict) -> dict:
        with self.lock:
            return self.world.set_channel(config)

    # -- reads --------------------------------------------------------

    def snapshot(self) -> dict:
        with self.lock:
            return self.world.snapshot()

    def tickets(self) -> list[dict]:
        with self.lock:
            return self.world.phone.tickets()

    def ticket(self, ticket_id: str) -> dict | None:
        with self.lock:
            return self.world.phone.ticket(ticket_id)

    def log_text(self) -> str:
        with self.lock:
            return self.world.to_jsonl()

    # -- realtime driver ----------------------------------------------

    def start(self) -> None:
        if self.scenario.run_mode == "realtime" and self._driver is None:
            self._driver = threading.Thread(target=self._drive, daemon=True)
            self._driver.start()

    def _drive(self) -> None:
        last = time.monotonic()
        while not self._stop.wait(REALTIME_TICK_S):
            now = time.monotonic()
            advance = (now - last) * self.scenario.speed
            last = now
            with self.lock:
                self.world.sim.step_until(self.world.sim.now + advance)

    def close(self) -> None:
        self._stop.set()
        if self._driver is not None:
            self._driver.join(timeout=2.0)
            self._driver = None
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None


class CommandIn(BaseModel):
    utterance: str


class FailureIn(BaseModel):
    mode: str
    p: float | None = None


class ChannelIn(BaseModel):
    base_delay_s: float = 2.0
    jitter_s: float = 0.0
    loss_prob: float = 0.0
    dup_prob: float = 0.0
    reorder_window_s: float = 0.0


class StepIn(BaseModel):
    seconds: float


def create_app(
    scenario: Scenario | None = None,
    runs_dir: str | Path | None = None,
    panel_dir: str | Path | None = None,
    heartbeat_s: float = 15.0,
) -> FastAPI:
    """Build the service around a fresh host; the app owns its lifecycle."""
    host = SimulationHost(scenario if scenario is not None else Scenario(), runs_dir)

    @contextlib.asynccontextmanager
    async def lifespan(_: FastAPI):
        host.start()
        yield
        host.close()

    app = FastAPI(title="smshome", lifespan=lifespan)
    app.state.host = host
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.post("/api/commands", status_code=202)
    def post_command(body: CommandIn):
        try:
            ticket = host.submit(body.utterance)
        except UnrecognizedUtterance as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return {"ticket": ticket["id"]}

    @app.get("/api/tickets")
    def get_tickets():
        return {"tickets": host.tickets()}

    @app.get("/api/tickets/{ticket_id}")
    def get_ticket(ticket_id: str):
        ticket = host.ticket(ticket_id)
        if ticket is None:
            raise HTTPException(status_code=404, detail=f"no ticket {ticket_id}")
        return ticket

    @app.get("/api/devices")
    def get_devices():
        snap = host.snapshot()
        return {"devices": snap["devices"], "supply_on": snap["supply_on"]}

    @app.put("/api/devices/{kind}/{index}/failure")
    def put_failure(kind: str, index: int, body: FailureIn):
        try:
            mode = FailureMode.parse(
                body.mode if body.p is None else f"{body.mode}:{body.p}"
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        try:
            device_kind, _ = parse_device_spec(f"{kind}{index}")
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        try:
            return host.set_failure(device_kind, index, mode)
        except UnknownDevice:
            raise HTTPException(status_code=404,
                                detail=f"no device {kind.upper()}{index}") from None

    @app.get("/api/channel")
    def get_channel():
        return host.snapshot()["sms"]

    @app.put("/api/channel")
    def put_channel(body: ChannelIn):
        try:
            return host.set_channel(body.model_dump())
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None

    @app.post("/api/sim/step")
    def post_step(body: StepIn):
        if body.seconds < 0:
            raise HTTPException(status_code=422, detail="seconds must be >= 0")
        try:
            return host.step(body.seconds)
        except RuntimeError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None

    @app.get("/api/state")
    def get_state():
        snap = host.snapshot()
        snap["run_mode"] = host.scenario.run_mode
        snap["seed"] = host.scenario.seed
        snap["log_path"] = None if host.log_path is None else str(host.log_path)
        return snap

    @app.get("/api/log")
    def get_log():
        return PlainTextResponse(host.log_text(), media_type="application/jsonl")

    @app.get("/api/events")
    def get_events(request: Request, since_seq: int | None = None):
        if since_seq is None:
            last_id = request.headers.get("last-event-id")
            if last_id is not None:
                try:
                    since_seq = int(last_id)
                except ValueError:
                    raise HTTPException(status_code=422,
                                        detail="bad Last-Event-ID") from None

        # Async poll loop rather than a blocking queue read: disconnect
        # cancels the task at the sleep, so subscribers never leak.
        async def stream():
            history, subscriber = host.subscribe(since_seq)
            try:
                for record in history:
                    yield f"id: {record['seq']}\ndata: {format_record(record)}\n\n"
                idle = 0.0
                while True:
                    try:
                        record = subscriber.get_nowait()
                    except queue.Empty:
                        await asyncio.sleep(STREAM_POLL_S)
                        idle += STREAM_POLL_S
                        if idle >= heartbeat_s:
                            idle = 0.0
                            yield "event: heartbeat\ndata: {}\n\n"
                        continue
                    idle = 0.0
                    yield f"id: {record['seq']}\ndata: {format_record(record)}\n\n"
            finally:
                host.unsubscribe(subscriber)

        return StreamingResponse(stream(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    if panel_dir is not None and Path(panel_dir).is_dir():
        app.mount("/", StaticFiles(directory=panel_dir, html=True), name="panel")

    return app
