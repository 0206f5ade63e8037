"""Live session endpoint.

One simulation per server instance.  Clients speak newline-free JSON text
frames over a WebSocket at /ws, or newline-delimited JSON over a plain
TCP socket on a fallback port.  All client commands are serialized into
the single simulation loop's queue; frame fan-out is read-only.

HTTP extras:
    GET /meta    -- parameters, detent geometry, tick and step rates
    GET /report  -- staircase report over the tick-rate view of the run
    /            -- the dashboard, when a built UI directory is available
"""

from __future__ import annotations

import asyncio
import json
import logging
import socket
import threading
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .analysis import staircase_metrics, stiffness_range_report
from .config import config_to_dict
from .session import SimSession, error_frame
from .sim import SimConfig

log = logging.getLogger("vssim.server")

FRAME_QUEUE_LIMIT = 4096


class SessionHub:
    """Bridges the session thread to any number of async subscribers."""

    def __init__(self, session: SimSession):
        self.session = session
        self.loop: asyncio.AbstractEventLoop | None = None
        self.subscribers: set[asyncio.Queue] = set()
        self._lock = threading.Lock()
        session.add_listener(self._on_frame)

    def _on_frame(self, frame: dict) -> None:
        loop = self.loop
        if loop is None or loop.is_closed():
            return
        loop.call_soon_threadsafe(self._broadcast, frame)

    def _broadcast(self, frame: dict) -> None:
        for q in list(self.subscribers):
            if q.qsize() < FRAME_QUEUE_LIMIT:
                q.put_nowait(frame)

    def subscribe(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue()
        self.subscribers.add(q)
        if self.session.paused and getattr(self.session, "_auto_paused", False):
            self.session._auto_paused = False
            self.session.submit({"type": "resume"})
        return q

    def unsubscribe(self, q: asyncio.Queue) -> None:
        self.subscribers.discard(q)
        if not self.subscribers:
            # No clients watching: hold the simulation.
            self.session._auto_paused = True
            self.session.submit({"type": "pause"})

    def handle_text(self, text: str) -> dict | None:
        """Parse and enqueue one client message; returns an error frame for
        malformed input (the connection stays open)."""
        try:
            msg = json.loads(text)
        except json.JSONDecodeError as exc:
            return error_frame(f"malformed JSON: {exc}")
        if not isinstance(msg, dict) or "type" not in msg:
            return error_frame("message must be a JSON object with a 'type' key")
        self.session.submit(msg)
        return None


def build_app(config: SimConfig, tick_hz: float = 50.0, speed: float = 1.0,
              ui_dir: str | Path | None = None, tcp_port: int | None = None) -> FastAPI:
    session = SimSession(config, tick_hz=tick_hz, speed=speed)
    hub = SessionHub(session)
    app = FastAPI(title="vssim live session")
    app.state.hub = hub
    app.state.session = session
    app.state.tcp_server = None

    @app.on_event("startup")
    async def _startup():
        hub.loop = asyncio.get_running_loop()
        session.start()
        if tcp_port is not None:
            app.state.tcp_server = await asyncio.start_server(
                lambda r, w: _tcp_client(hub, r, w), host="0.0.0.0", port=tcp_port)
            log.info("NDJSON fallback listening on tcp port %d", tcp_port)

    @app.on_event("shutdown")
    async def _shutdown():
        if app.state.tcp_server is not None:
            app.state.tcp_server.close()
        session.stop()

    @app.get("/meta")
    async def meta():
        report = stiffness_range_report(config.params)
        return JSONResponse({
            "config": config_to_dict(config),
            "tick_hz": tick_hz,
            "dt": config.dt,
            "detents": [
                {"index": r.index, "x": r.x, "k": r.k} for r in report.rows
            ],
        })

    @app.get("/report")
    async def report():
        trace = session.engine.trace_view().downsample(session.steps_per_tick)
        rep = staircase_metrics(trace, config.params)
        return JSONResponse(rep.to_dict())

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        q = hub.subscribe()
        try:
            sender = asyncio.create_task(_ws_sender(ws, q))
            while True:
                text = await ws.receive_text()
                err = hub.handle_text(text)
                if err is not None:
                    await ws.send_text(json.dumps(err))
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            hub.unsubscribe(q)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


async def _ws_sender(ws: WebSocket, q: asyncio.Queue) -> None:
    while True:
        frame = await q.get()
        await ws.send_text(json.dumps(frame))


async def _tcp_client(hub: SessionHub, reader: asyncio.StreamReader,
                      writer: asyncio.StreamWriter) -> None:
    q = hub.subscribe()

    async def pump_out():
        while True:
            frame = await q.get()
            writer.write((json.dumps(frame) + "\n").encode())
            await writer.drain()

    sender = asyncio.create_task(pump_out())
    try:
        while True:
            line = await reader.readline()
            if not line:
                break
            text = line.decode().strip()
            if not text:
                continue
            err = hub.handle_text(text)
            if err is not None:
                writer.write((json.dumps(err) + "\n").encode())
                await writer.drain()
    except (ConnectionResetError, asyncio.IncompleteReadError):
        pass
    finally:
        sender.cancel()
        hub.unsubscribe(q)
        try:
            writer.close()
        except Exception:
            pass


def port_available(port: int, host: str = "0.0.0.0") -> bool:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
        s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            s.bind((host, port))
        except OSError:
            return False
    return True


def serve(config: SimConfig, port: int = 8080, tick_hz: float = 50.0,
          speed: float = 1.0, ui_dir: str | Path | None = None,
          tcp_port: int | None = None) -> None:
    import uvicorn

    tcp_port = tcp_port if tcp_port is not None else port + 1
    app = build_app(config, tick_hz=tick_hz, speed=speed, ui_dir=ui_dir,
                    tcp_port=tcp_port)
    uvicorn.run(app, host="0.0.0.0", port=port, log_level="warning")
