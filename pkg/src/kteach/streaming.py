"""Topic-based publish/subscribe broker and the wire schema riding on it.

The broker is the in-repo stand-in for a streaming platform: named topics,
per-topic retained logs with absolute offsets, replay-from-offset, and
fan-out to live subscribers. One JSON schema serves every topic,
discriminated by a `type` field (state, command, sphere, telemetry, scene).
On sockets, messages travel as 4-byte big-endian length-prefixed UTF-8 JSON.
"""

import json
import logging
import queue
import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, SchemaError, UnavailableError
from .trajfile import TrajectoryHeader, TrajectoryWriter

logger = logging.getLogger(__name__)

ENVELOPE_FIELDS = ("type", "topic", "session_id", "seq", "timestamp_ms")
MAX_FRAME_BYTES = 1 << 20
DEFAULT_RETENTION = 100_000

# canonical topic names used by the engine
TOPIC_STATES = "kt.states"
TOPIC_COMMANDS = "kt.commands"
TOPIC_SPHERE = "kt.sphere"
TOPIC_TELEMETRY = "kt.telemetry"
TOPIC_SCENE = "kt.scene"
TOPIC_PLAYBACK = "kt.playback"


@dataclass(frozen=True)
class StateMsg:
    """One wire message: envelope fields plus a type-specific payload."""

    type: str
    topic: str
    session_id: str
    seq: int
    timestamp_ms: int
    payload: dict = field(default_factory=dict)

    def to_wire(self) -> dict:
        obj = {"type": self.type, "topic": self.topic, "session_id": self.session_id,
               "seq": self.seq, "timestamp_ms": self.timestamp_ms}
        obj.update(self.payload)
        return obj

    @classmethod
    def from_wire(cls, obj: dict) -> "StateMsg":
        missing = [k for k in ENVELOPE_FIELDS if k not in obj]
        if missing:
            raise SchemaError(f"wire message missing fields: {missing}")
        payload = {k: v for k, v in obj.items() if k not in ENVELOPE_FIELDS}
        return cls(type=str(obj["type"]), topic=str(obj["topic"]),
                   session_id=str(obj["session_id"]), seq=int(obj["seq"]),
                   timestamp_ms=int(obj["timestamp_ms"]), payload=payload)


def state_msg(topic: str, session_id: str, seq: int, timestamp_ms: int,
              q: list, gripper: str) -> StateMsg:
    return StateMsg("state", topic, session_id, seq, timestamp_ms,
                    {"q": list(q), "gripper": gripper})


def command_msg(topic: str, session_id: str, seq: int, timestamp_ms: int,
                kind: str, **extra) -> StateMsg:
    return StateMsg("command", topic, session_id, seq, timestamp_ms,
                    {"kind": kind, **extra})


def sphere_msg(topic: str, session_id: str, seq: int, timestamp_ms: int,
               position: list, orientation: list | None = None) -> StateMsg:
    payload = {"position": list(position)}
    if orientation is not None:
        payload["orientation"] = list(orientation)
    return StateMsg("sphere", topic, session_id, seq, timestamp_ms, payload)


# --- wire framing -----------------------------------------------------------

def encode_frame(msg: StateMsg) -> bytes:
    body = json.dumps(msg.to_wire(), separators=(",", ":")).encode("utf-8")
    if len(body) > MAX_FRAME_BYTES:
        raise SchemaError(f"frame of {len(body)} bytes exceeds {MAX_FRAME_BYTES}")
    return struct.pack(">I", len(body)) + body


class FrameDecoder:
    """Incremental decoder for length-prefixed frames arriving in chunks."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[StateMsg]:
        self._buf.extend(data)
        out = []
        while True:
            if len(self._buf) < 4:
                return out
            (length,) = struct.unpack(">I", self._buf[:4])
            if length > MAX_FRAME_BYTES:
                raise SchemaError(f"declared frame length {length} exceeds {MAX_FRAME_BYTES}")
            if len(self._buf) < 4 + length:
                return out
            body = bytes(self._buf[4:4 + length])
            del self._buf[:4 + length]
            try:
                obj = json.loads(body.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise SchemaError(f"frame body is not valid JSON: {exc}") from exc
            out.append(StateMsg.from_wire(obj))


# --- broker ------------------------------------------------------------------

_CLOSED = object()


class Subscription:
    """Ordered message stream for one subscriber of one topic."""

    def __init__(self, topic: str):
        self.topic = topic
        self._queue: queue.SimpleQueue = queue.SimpleQueue()
        self._closed = False

    def _push(self, msg) -> None:
        self._queue.put(msg)

    def poll(self, timeout: float | None = 0.0):
        """Next message, or None if none arrives within the timeout or the
        stream has ended."""
        if self._closed:
            return None
        try:
            if timeout is None:
                msg = self._queue.get()
            elif timeout <= 0:
                msg = self._queue.get_nowait()
            else:
                msg = self._queue.get(timeout=timeout)
        except queue.Empty:
            return None
        if msg is _CLOSED:
            self._closed = True
            return None
        return msg

    def __iter__(self):
        while True:
            msg = self.poll(timeout=None)
            if msg is None:
                return
            yield msg

    def close(self) -> None:
        self._push(_CLOSED)


class _Topic:
    __slots__ = ("name", "retained", "base_offset", "subscribers")

    def __init__(self, name: str):
        self.name = name
        self.retained: list[StateMsg] = []
        self.base_offset = 0  # absolute offset of retained[0]
        self.subscribers: list[Subscription] = []

    @property
    def next_offset(self) -> int:
        return self.base_offset + len(self.retained)


class Broker:
    """In-memory topic broker: durable (retained) per-topic logs with replay,
    total per-topic order, and concurrent publishers/subscribers."""

    def __init__(self, retention: int = DEFAULT_RETENTION):
        if retention < 1:
            raise InputError("retention must be >= 1")
        self._retention = retention
        self._topics: dict[str, _Topic] = {}
        self._lock = threading.Lock()
        self._closed = False

    def _topic(self, name: str) -> _Topic:
        topic = self._topics.get(name)
        if topic is None:
            topic = _Topic(name)
            self._topics[name] = topic
        return topic

    def publish(self, topic: str, msg: StateMsg) -> int:
        """Durably enqueue and fan out one message. Returns the absolute
        per-topic offset assigned to it."""
        if not topic:
            raise InputError("topic name must be nonempty")
        with self._lock:
            if self._closed:
                raise UnavailableError("broker has been shut down")
            t = self._topic(topic)
            offset = t.next_offset
            t.retained.append(msg)
            if len(t.retained) > self._retention:
                drop = len(t.retained) - self._retention
                del t.retained[:drop]
                t.base_offset += drop
            for sub in t.subscribers:
                sub._push(msg)
            return offset

    def subscribe(self, topic: str, from_seq: int = 0) -> Subscription:
        """Stream retained messages from offset `from_seq` onward, then live
        messages, in order and without duplication. Unknown topics are
        created empty (the subscription then sees only future messages)."""
        if from_seq < 0:
            raise InputError("from_seq must be >= 0")
        with self._lock:
            if self._closed:
                raise UnavailableError("broker has been shut down")
            t = self._topic(topic)
            sub = Subscription(topic)
            start = max(from_seq - t.base_offset, 0)
            for msg in t.retained[start:]:
                sub._push(msg)
            t.subscribers.append(sub)
            return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            t = self._topics.get(sub.topic)
            if t and sub in t.subscribers:
                t.subscribers.remove(sub)
        sub.close()

    def ensure_topic(self, topic: str) -> None:
        with self._lock:
            if self._closed:
                raise UnavailableError("broker has been shut down")
            self._topic(topic)

    def topic_names(self) -> list[str]:
        with self._lock:
            return sorted(self._topics)

    def end_offset(self, topic: str) -> int:
        with self._lock:
            t = self._topics.get(topic)
            return t.next_offset if t else 0

    def close(self) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
            for t in self._topics.values():
                for sub in t.subscribers:
                    sub.close()
                t.subscribers.clear()


# --- message conversion -------------------------------------------------------

@dataclass(frozen=True)
class StateCommand:
    """Internal joint-space command, the playback-side equivalent of a state
    message."""

    timestamp_ms: int
    q: np.ndarray
    gripper: str

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))


def header_from_start_marker(msg: StateMsg) -> TrajectoryHeader:
    p = msg.payload
    joint_names = tuple(p.get("joint_names", ()))
    return TrajectoryHeader(session_id=msg.session_id,
                            robot=str(p.get("robot", "unknown")),
                            dof=int(p.get("dof", len(joint_names))),
                            joint_names=joint_names,
                            rate_hz=float(p.get("rate_hz", 0.0)))


@dataclass(frozen=True)
class BufferResult:
    path: Path
    session_id: str
    count: int
    finalized: bool


def buffer_consume(broker: Broker, topic: str, sink, *, from_seq: int = 0,
                   wait: bool = False, poll_timeout: float = 0.2,
                   stop_flag: threading.Event | None = None) -> BufferResult:
    """Persist one session's streamed states from a topic to a trajectory file.

    The stream is expected to carry a `command` start marker (whose payload
    holds the file header fields), the session's `state` messages in seq
    order, and a `command` stop marker that triggers finalization. Messages
    from other sessions on the same topic are ignored.

    With wait=False the retained log is drained and the call returns as soon
    as the queue runs dry; a missing stop marker then leaves the file
    unfinalized (salvage-loadable). With wait=True the consumer keeps polling
    for live messages until the stop marker, a broker shutdown, or stop_flag.
    """
    sub = broker.subscribe(topic, from_seq=from_seq)
    writer: TrajectoryWriter | None = None
    sink = Path(sink)
    session_id = None
    finalized = False
    try:
        while True:
            if stop_flag is not None and stop_flag.is_set():
                break
            msg = sub.poll(timeout=poll_timeout if wait else 0.0)
            if msg is None:
                if wait and not sub._closed and not (stop_flag and stop_flag.is_set()):
                    continue
                break
            if msg.type == "command":
                kind = msg.payload.get("kind")
                if kind == "start" and writer is None:
                    session_id = msg.session_id
                    writer = TrajectoryWriter(sink, header_from_start_marker(msg))
                elif kind == "stop" and writer is not None and msg.session_id == session_id:
                    writer.finalize()
                    finalized = True
                    break
            elif msg.type == "state":
                if writer is None:
                    # no start marker seen: synthesize a header from the message
                    session_id = msg.session_id
                    q = msg.payload.get("q", [])
                    writer = TrajectoryWriter(sink, TrajectoryHeader(
                        session_id=session_id, robot="unknown", dof=len(q),
                        joint_names=tuple(f"q{i}" for i in range(len(q))), rate_hz=0.0))
                if msg.session_id != session_id:
                    continue
                writer.append(msg.seq, msg.timestamp_ms,
                              msg.payload["q"], msg.payload["gripper"])
    finally:
        broker.unsubscribe(sub)
        if writer is not None:
            writer.close()
    if writer is None:
        raise SchemaError(f"no session data observed on topic {topic!r}")
    if not finalized:
        logger.warning("buffer for %s on %s ended without a stop marker; file unfinalized",
                       session_id, topic)
    return BufferResult(path=sink, session_id=session_id, count=writer.count,
                        finalized=finalized)


class BufferNode:
    """Long-running buffer consumer: one trajectory file per start/stop pair.

    Files are named <session_id>.jsonl inside out_dir. A session interrupted
    by broker shutdown or node stop is left unfinalized on disk.
    """

    def __init__(self, broker: Broker, topic: str, out_dir):
        self.broker = broker
        self.topic = topic
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.results: list[BufferResult] = []
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="kteach-buffer", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def _run(self) -> None:
        sub = self.broker.subscribe(self.topic, from_seq=0)
        writer: TrajectoryWriter | None = None
        session_id = None
        try:
            while not self._stop.is_set():
                msg = sub.poll(timeout=0.2)
                if msg is None:
                    if sub._closed:
                        break
                    continue
                if msg.type == "command":
                    kind = msg.payload.get("kind")
                    if kind == "start":
                        if writer is not None:
                            writer.close()
                            self.results.append(BufferResult(
                                writer.path, session_id, writer.count, False))
                        session_id = msg.session_id
                        writer = TrajectoryWriter(self.out_dir / f"{session_id}.jsonl",
                                                  header_from_start_marker(msg))
                    elif kind == "stop" and writer is not None and msg.session_id == session_id:
                        writer.finalize()
                        self.results.append(BufferResult(
                            writer.path, session_id, writer.count, True))
                        writer = None
                elif msg.type == "state" and writer is not None and msg.session_id == session_id:
                    writer.append(msg.seq, msg.timestamp_ms,
                                  msg.payload["q"], msg.payload["gripper"])
        finally:
            self.broker.unsubscribe(sub)
            if writer is not None:
                writer.close()
                self.results.append(BufferResult(writer.path, session_id, writer.count, False))


def convert_msg(wire: StateMsg, dof: int | None = None) -> StateCommand:
    """Lossless wire-to-command mapping. Unknown extra payload fields are
    dropped; structural problems raise SchemaError."""
    if wire.type != "state":
        raise SchemaError(f"cannot convert message of type {wire.type!r} to a state command")
    payload = wire.payload
    if "q" not in payload or "gripper" not in payload:
        raise SchemaError("state payload must carry 'q' and 'gripper'")
    try:
        q = np.asarray([float(v) for v in payload["q"]], dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"state payload q is not a number array: {exc}") from exc
    if dof is not None and q.shape[0] != dof:
        raise SchemaError(f"q length {q.shape[0]} does not match header dof {dof}")
    if not np.all(np.isfinite(q)):
        raise SchemaError("state payload q contains non-finite values")
    gripper = payload["gripper"]
    if gripper not in ("open", "closed"):
        raise SchemaError(f"unknown gripper value {gripper!r}")
    return StateCommand(timestamp_ms=wire.timestamp_ms, q=q, gripper=gripper)
