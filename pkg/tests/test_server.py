import json
import socket
import time

import pytest
from fastapi.testclient import TestClient

from kteach.clock import WallClock
from kteach.engine import EngineConfig, LiveEngine
from kteach.fixtures import fixture_path
from kteach.server import WireServer, build_ws_app, check_port_free
from kteach.streaming import (
    Broker,
    FrameDecoder,
    StateMsg,
    TOPIC_COMMANDS,
    TOPIC_SPHERE,
    TOPIC_STATES,
    TOPIC_TELEMETRY,
    encode_frame,
    state_msg,
)


@pytest.fixture
def broker():
    b = Broker()
    yield b
    b.close()


class TestWsApp:
    def test_subscribe_receives_published(self, broker):
        app = build_ws_app(broker, WallClock())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text(json.dumps({"type": "subscribe", "topic": "t",
                                         "session_id": "-", "seq": 0,
                                         "timestamp_ms": 0, "from_seq": 0}))
                time.sleep(0.1)  # let the pump attach
                broker.publish("t", state_msg("t", "s", 0, 10, q=[0.1], gripper="open"))
                obj = json.loads(ws.receive_text())
                assert obj["type"] == "state"
                assert obj["q"] == [0.1]

    def test_client_publish_lands_on_broker(self, broker):
        app = build_ws_app(broker, WallClock())
        sub = broker.subscribe(TOPIC_COMMANDS)
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text(json.dumps({"type": "command", "topic": TOPIC_COMMANDS,
                                         "session_id": "ui", "seq": -1,
                                         "timestamp_ms": -1, "kind": "start"}))
                msg = sub.poll(timeout=2.0)
        assert msg is not None
        assert msg.payload["kind"] == "start"
        assert msg.seq == 0 and msg.timestamp_ms >= 0

    def test_malformed_message_reports_error(self, broker):
        app = build_ws_app(broker, WallClock())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.send_text("{\"type\": \"state\"}")
                obj = json.loads(ws.receive_text())
                assert obj["type"] == "error"

    def test_index_page_served(self, broker):
        app = build_ws_app(broker, WallClock())
        with TestClient(app) as client:
            page = client.get("/")
            assert page.status_code == 200


class TestWireServer:
    def test_subscribe_and_publish_over_tcp(self, broker):
        server = WireServer(broker, WallClock(), "127.0.0.1", 0)
        server.start()
        host, port = server.server_address
        try:
            for msg in (state_msg("t", "s", i, i * 50, q=[0.0], gripper="open")
                        for i in range(3)):
                broker.publish("t", msg)
            with socket.create_connection((host, port), timeout=5) as conn:
                conn.sendall(encode_frame(StateMsg("subscribe", "t", "-", 0, 0,
                                                   {"from_seq": 0})))
                decoder = FrameDecoder()
                received = []
                conn.settimeout(5)
                while len(received) < 4:
                    if len(received) == 3:
                        broker.publish("t", state_msg("t", "s", 3, 150,
                                                      q=[0.0], gripper="open"))
                    received.extend(decoder.feed(conn.recv(65536)))
                assert [m.seq for m in received] == [0, 1, 2, 3]

            with socket.create_connection((host, port), timeout=5) as conn:
                sub = broker.subscribe("u")
                conn.sendall(encode_frame(StateMsg("sphere", "u", "ui", -1, -1,
                                                   {"position": [0.4, 0.0, 0.3]})))
                msg = sub.poll(timeout=5.0)
                assert msg is not None
                assert msg.payload["position"] == [0.4, 0.0, 0.3]
        finally:
            server.stop()

    def test_port_probe(self):
        with socket.socket() as taken:
            taken.bind(("127.0.0.1", 0))
            _, port = taken.getsockname()
            taken.listen(1)
            with pytest.raises(OSError):
                check_port_free("127.0.0.1", port)


class TestLiveEngine:
    def make_engine(self, tmp_path):
        config = EngineConfig(
            urdf=str(fixture_path("arm7.urdf")),
            base_link="base_link", tip_link="wrist_link",
            scene_config=str(fixture_path("scene_cubes.json")),
            initial_q=(0.0, 0.277, 0.0, 1.759, 0.0, 1.04, 0.0),
            session_id="live", out_dir=str(tmp_path))
        return LiveEngine(config)

    def test_records_through_command_topic(self, tmp_path):
        engine = self.make_engine(tmp_path)
        states_sub = engine.broker.subscribe(TOPIC_STATES)
        telemetry_sub = engine.broker.subscribe(TOPIC_TELEMETRY)
        engine.start()
        try:
            def send(kind):
                engine.broker.publish(TOPIC_COMMANDS, StateMsg(
                    "command", TOPIC_COMMANDS, "ui", 0, 0, {"kind": kind}))

            send("start")
            time.sleep(1.5)
            engine.broker.publish(TOPIC_SPHERE, StateMsg(
                "sphere", TOPIC_SPHERE, "ui", 1, 0,
                {"position": [0.45, 0.05, 0.28]}))
            time.sleep(1.0)
            send("stop")
            time.sleep(0.5)
        finally:
            engine.stop()

        msgs = []
        while True:
            msg = states_sub.poll(0.0)
            if msg is None:
                break
            msgs.append(msg)
        kinds = [m.payload.get("kind") for m in msgs if m.type == "command"]
        states = [m for m in msgs if m.type == "state"]
        assert kinds == ["start", "stop"]
        # ~2.5 s of recording at 20 Hz
        assert 35 <= len(states) <= 65
        seqs = [m.seq for m in states]
        assert seqs == list(range(len(states)))

        # telemetry flowed at the record rate the whole time
        telemetry = []
        while True:
            msg = telemetry_sub.poll(0.0)
            if msg is None:
                break
            telemetry.append(msg)
        assert len(telemetry) >= len(states)

    def test_rejected_command_produces_event(self, tmp_path):
        engine = self.make_engine(tmp_path)
        telemetry_sub = engine.broker.subscribe(TOPIC_TELEMETRY)
        engine.start()
        try:
            engine.broker.publish(TOPIC_COMMANDS, StateMsg(
                "command", TOPIC_COMMANDS, "ui", 0, 0, {"kind": "stop"}))
            deadline = time.time() + 3.0
            rejection = None
            while time.time() < deadline and rejection is None:
                msg = telemetry_sub.poll(timeout=0.2)
                if msg and msg.payload.get("event") == "command_rejected":
                    rejection = msg
        finally:
            engine.stop()
        assert rejection is not None
        assert rejection.payload["kind"] == "stop"
