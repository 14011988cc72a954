"""Socket endpoints bridging the broker to external clients.

Two transports speak the same JSON message schema:
  - raw TCP with 4-byte big-endian length-prefixed frames,
  - WebSocket (for browsers), one JSON text message per frame.

Clients publish by sending any well-formed message; its `topic` field names
the destination. A message of type `subscribe` instead attaches the
connection to a topic: {"type": "subscribe", "topic": ..., "from_seq": N}
with N = -1 meaning live tail only. Negative seq/timestamp fields on
published messages are stamped by the server.
"""

import asyncio
import json
import logging
import socket
import socketserver
import threading

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, HTMLResponse
from pathlib import Path

from .clock import WallClock
from .errors import SchemaError
from .streaming import Broker, FrameDecoder, StateMsg, encode_frame

logger = logging.getLogger(__name__)


def _resolve_from_seq(broker: Broker, topic: str, from_seq) -> int:
    if from_seq is None or int(from_seq) < 0:
        return broker.end_offset(topic)
    return int(from_seq)


def _stamp(broker_clock: WallClock, counters: dict, msg: StateMsg) -> StateMsg:
    seq = msg.seq
    ts = msg.timestamp_ms
    if seq < 0:
        seq = counters.get(msg.topic, 0)
        counters[msg.topic] = seq + 1
    if ts < 0:
        ts = broker_clock.now_ms()
    if seq == msg.seq and ts == msg.timestamp_ms:
        return msg
    return StateMsg(msg.type, msg.topic, msg.session_id, seq, ts, msg.payload)


class _WireHandler(socketserver.BaseRequestHandler):
    def handle(self):
        broker: Broker = self.server.broker
        clock: WallClock = self.server.clock
        decoder = FrameDecoder()
        counters: dict = {}
        subs = []
        senders = []
        send_lock = threading.Lock()

        def pump(sub):
            try:
                for msg in sub:
                    data = encode_frame(msg)
                    with send_lock:
                        self.request.sendall(data)
            except OSError:
                pass

        try:
            while True:
                chunk = self.request.recv(65536)
                if not chunk:
                    break
                try:
                    messages = decoder.feed(chunk)
                except SchemaError as exc:
                    logger.warning("wire client %s: %s", self.client_address, exc)
                    break
                for msg in messages:
                    if msg.type == "subscribe":
                        sub = broker.subscribe(
                            msg.topic,
                            _resolve_from_seq(broker, msg.topic, msg.payload.get("from_seq")))
                        subs.append(sub)
                        t = threading.Thread(target=pump, args=(sub,), daemon=True)
                        t.start()
                        senders.append(t)
                    else:
                        broker.publish(msg.topic, _stamp(clock, counters, msg))
        except (ConnectionError, OSError):
            pass
        finally:
            for sub in subs:
                broker.unsubscribe(sub)


class WireServer(socketserver.ThreadingTCPServer):
    """Length-prefixed JSON frame server over TCP."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, broker: Broker, clock: WallClock, host: str, port: int):
        self.broker = broker
        self.clock = clock
        super().__init__((host, port), _WireHandler)
        self._thread: threading.Thread | None = None

    def start(self):
        self._thread = threading.Thread(target=self.serve_forever,
                                        name="kteach-wire", daemon=True)
        self._thread.start()

    def stop(self):
        self.shutdown()
        self.server_close()


def build_ws_app(broker: Broker, clock: WallClock,
                 frontend_dir: Path | None = None) -> FastAPI:
    """FastAPI app exposing the broker over /ws plus the optional static UI."""
    app = FastAPI(title="kteach engine")

    @app.get("/")
    def index():
        if frontend_dir is not None:
            page = Path(frontend_dir) / "index.html"
            if page.exists():
                return FileResponse(page)
        return HTMLResponse(
            "<html><body><h3>kteach engine</h3>"
            "<p>WebSocket endpoint at <code>/ws</code>. Build the frontend "
            "to get the teaching UI here.</p></body></html>")

    if frontend_dir is not None and Path(frontend_dir).exists():
        from fastapi.staticfiles import StaticFiles
        app.mount("/app", StaticFiles(directory=str(frontend_dir), html=True), name="app")

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        loop = asyncio.get_running_loop()
        out_queue: asyncio.Queue = asyncio.Queue()
        subs = []
        counters: dict = {}
        pumps = []

        def pump(sub):
            for msg in sub:
                loop.call_soon_threadsafe(out_queue.put_nowait, msg)

        async def sender():
            while True:
                msg = await out_queue.get()
                await ws.send_text(json.dumps(msg.to_wire()))

        send_task = asyncio.create_task(sender())
        try:
            while True:
                text = await ws.receive_text()
                try:
                    obj = json.loads(text)
                    msg = StateMsg.from_wire(obj)
                except (json.JSONDecodeError, SchemaError) as exc:
                    await ws.send_text(json.dumps({"type": "error", "reason": str(exc)}))
                    continue
                if msg.type == "subscribe":
                    sub = broker.subscribe(
                        msg.topic,
                        _resolve_from_seq(broker, msg.topic, msg.payload.get("from_seq")))
                    subs.append(sub)
                    t = threading.Thread(target=pump, args=(sub,), daemon=True)
                    t.start()
                    pumps.append(t)
                else:
                    broker.publish(msg.topic, _stamp(clock, counters, msg))
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            for sub in subs:
                broker.unsubscribe(sub)

    return app


def check_port_free(host: str, port: int) -> None:
    """Raise OSError early when the port is already bound."""
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as probe:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))


class UvicornThread:
    """Run a uvicorn server on a background thread with clean shutdown."""

    def __init__(self, app, host: str, port: int):
        import uvicorn

        self._config = uvicorn.Config(app, host=host, port=port, log_level="warning")
        self._server = uvicorn.Server(self._config)
        self._thread: threading.Thread | None = None

    def start(self):
        self._thread = threading.Thread(target=self._server.run,
                                        name="kteach-ws", daemon=True)
        self._thread.start()

    @property
    def started(self) -> bool:
        return self._server.started

    def stop(self):
        self._server.should_exit = True
        if self._thread is not None:
            self._thread.join(timeout=5.0)
