"""Engine wiring: configuration, the scripted teaching pipeline, and the
live real-time engine behind `kteach serve`.

Two independent fixed-rate timers share the session state: the IK tick
(default 30 Hz) servos toward the latest sphere pose, the record tick
(default 20 Hz) snapshots states and publishes them to the broker, where the
buffer persists them to a trajectory file. Scripted runs replay a timestamped
event file over a virtual clock (deterministic, faster than real time) or the
wall clock.
"""

import heapq
import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clock import VirtualClock, WallClock, tick_times_ms
from .errors import ConfigError, EmptyTrajectoryError, InputError, StateError
from .ik import IKParams
from .kinematics import KinematicChain, Pose, fk_frames, forward_kinematics
from .scene import Scene, load_scene_config, scene_payload, spawn_scene, step as scene_step
from .session import CommAct, CommandKind, Gripper, Mode, Session, Trajectory, VoiceCommand
from .streaming import (
    Broker,
    StateMsg,
    TOPIC_COMMANDS,
    TOPIC_PLAYBACK,
    TOPIC_SCENE,
    TOPIC_SPHERE,
    TOPIC_STATES,
    TOPIC_TELEMETRY,
    buffer_consume,
    command_msg,
)
from .urdf import extract_chain, load_urdf

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EngineConfig:
    urdf: str
    base_link: str
    tip_link: str
    ik_params: IKParams = IKParams()
    ik_hz: float = 30.0
    record_hz: float = 20.0
    bind_host: str = "127.0.0.1"
    tcp_port: int = 7780
    ws_port: int = 7781
    scene_config: str | None = None
    session_id: str = "session"
    initial_q: tuple[float, ...] | None = None
    out_dir: str = "recordings"

    def __post_init__(self):
        if not (self.ik_hz >= self.record_hz >= 1.0):
            raise ConfigError(
                f"rates must satisfy ik_hz >= record_hz >= 1 (got {self.ik_hz}, {self.record_hz})")


_IK_KEYS = ("damping", "max_iterations", "position_tol", "orientation_tol",
            "step_scale", "orientation_weight")


def _config_from_dict(data: dict, base_dir: Path) -> EngineConfig:
    def resolve(p):
        return str((base_dir / p).resolve()) if p and not Path(p).is_absolute() else p

    ik_data = {k: v for k, v in dict(data.get("ik", {})).items() if k in _IK_KEYS}
    try:
        params = IKParams(**ik_data)
        return EngineConfig(
            urdf=resolve(data["urdf"]),
            base_link=data["base_link"],
            tip_link=data["tip_link"],
            ik_params=params,
            ik_hz=float(data.get("ik_hz", 30.0)),
            record_hz=float(data.get("record_hz", 20.0)),
            bind_host=data.get("bind_host", "127.0.0.1"),
            tcp_port=int(data.get("tcp_port", 7780)),
            ws_port=int(data.get("ws_port", 7781)),
            scene_config=resolve(data.get("scene_config")),
            session_id=data.get("session_id", "session"),
            initial_q=tuple(data["initial_q"]) if data.get("initial_q") else None,
            # outputs resolve against the caller's cwd, not the config file
            out_dir=data.get("out_dir", "recordings"),
        )
    except KeyError as exc:
        raise ConfigError(f"config missing required field {exc}") from exc
    except (TypeError, ValueError, InputError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc


def _parse_flat_config(text: str) -> dict:
    """`key = value` lines; dotted keys nest (ik.damping = 0.05)."""
    data: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        value = value.strip("'\"")
        parsed: object
        if value.lower() in ("true", "false"):
            parsed = value.lower() == "true"
        elif value.lower() in ("null", "none", ""):
            parsed = None
        elif value.startswith("["):
            parsed = json.loads(value)
        else:
            try:
                parsed = int(value)
            except ValueError:
                try:
                    parsed = float(value)
                except ValueError:
                    parsed = value
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = parsed
    return data


def load_config(path) -> EngineConfig:
    """Engine config from JSON or flat key = value text."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON config: {exc}") from exc
    else:
        data = _parse_flat_config(text)
    return _config_from_dict(data, path.parent)


def load_chain(config: EngineConfig) -> KinematicChain:
    model = load_urdf(config.urdf)
    return extract_chain(model, config.base_link, config.tip_link)


# --- scripts ------------------------------------------------------------------

@dataclass(frozen=True)
class ScriptEvent:
    t_ms: int
    type: str                      # "sphere" | "command"
    position: tuple | None = None
    orientation: tuple | None = None
    kind: str | None = None


def load_script(path) -> list[ScriptEvent]:
    """Timestamped sphere poses and voice commands, one JSON object per line."""
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: invalid script line: {exc}") from exc
            etype = obj.get("type")
            if etype == "sphere":
                events.append(ScriptEvent(
                    t_ms=int(obj["t_ms"]), type="sphere",
                    position=tuple(float(v) for v in obj["position"]),
                    orientation=tuple(float(v) for v in obj["orientation"])
                    if obj.get("orientation") else None))
            elif etype == "command":
                kind = obj.get("kind")
                if kind not in ("start", "stop", "open", "close"):
                    raise InputError(f"{path}:{lineno}: unknown command kind {kind!r}")
                events.append(ScriptEvent(t_ms=int(obj["t_ms"]), type="command", kind=kind))
            else:
                raise InputError(f"{path}:{lineno}: unknown event type {etype!r}")
    return sorted(events, key=lambda e: e.t_ms)


def save_script(path, events: list[ScriptEvent]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            if e.type == "sphere":
                obj = {"t_ms": e.t_ms, "type": "sphere", "position": list(e.position)}
                if e.orientation is not None:
                    obj["orientation"] = list(e.orientation)
            else:
                obj = {"t_ms": e.t_ms, "type": "command", "kind": e.kind}
            fh.write(json.dumps(obj) + "\n")


# --- scripted pipeline ---------------------------------------------------------

@dataclass
class TeachReport:
    session_id: str
    out_path: Path | None
    states: int
    duration_s: float
    finalized: bool
    ik_ticks: int
    record_ticks: int
    trajectory: Trajectory | None = None
    act: CommAct | None = None
    final_scene: Scene | None = None
    warnings: list[str] = field(default_factory=list)


def _start_marker(session: Session, chain: KinematicChain, robot: str,
                  record_hz: float, t_ms: int) -> StateMsg:
    return command_msg(TOPIC_STATES, session.demo_id, 0, t_ms, "start",
                       robot=robot, dof=chain.dof,
                       joint_names=list(chain.joint_names), rate_hz=record_hz)


def run_scripted(config: EngineConfig, script: list[ScriptEvent], out_path,
                 *, realtime: bool = False, noise_sigma_mm: float = 0.0,
                 seed: int = 0, broker: Broker | None = None) -> TeachReport:
    """Drive the full teaching pipeline from a script: IK ticks, record ticks,
    broker streaming, and the buffer writing the trajectory file.

    Noise (if any) perturbs sphere positions with N(0, sigma^2) draws from a
    seeded generator; the draws depend only on the seed and event order, so
    runs with the same seed and different sigmas see scaled versions of the
    same perturbation. Deterministic in virtual-clock mode: same script, same
    seed, byte-identical output file.
    """
    if not script:
        raise InputError("script is empty")
    chain = load_chain(config)
    model_name = load_urdf(config.urdf).name
    own_broker = broker is None
    broker = broker or Broker()
    session = Session(chain, config.ik_params, session_id=config.session_id,
                      q0=config.initial_q, state_topic=TOPIC_STATES)
    scene = None
    if config.scene_config:
        scene = spawn_scene(load_scene_config(config.scene_config))

    rng = np.random.default_rng(seed)
    end_ms = script[-1].t_ms
    clock = WallClock() if realtime else VirtualClock()
    warnings: list[str] = []
    trajectory: Trajectory | None = None
    act: CommAct | None = None
    was_closed = False

    # merged timeline: commands, then sphere updates, then IK, then record
    heap: list[tuple[int, int, int]] = []
    counter = 0
    PRIO_CMD, PRIO_SPHERE, PRIO_IK, PRIO_REC = 0, 1, 2, 3
    items: dict[int, object] = {}

    def push(t, prio, item):
        nonlocal counter
        heapq.heappush(heap, (t, prio, counter))
        items[counter] = item
        counter += 1

    for ev in script:
        push(ev.t_ms, PRIO_CMD if ev.type == "command" else PRIO_SPHERE, ev)
    for t in tick_times_ms(config.ik_hz, end_ms + 1):
        push(t, PRIO_IK, "ik")
    for t in tick_times_ms(config.record_hz, end_ms + 1):
        push(t, PRIO_REC, "record")

    latest_sphere: Pose | None = None
    while heap:
        t, prio, idx = heapq.heappop(heap)
        item = items.pop(idx)
        clock.sleep_until(t)

        if prio == PRIO_CMD:
            cmd = VoiceCommand(CommandKind(item.kind), t)
            try:
                session.handle_voice(cmd)
            except StateError as exc:
                warnings.append(str(exc))
                logger.warning("%s", exc)
                continue
            broker.publish(TOPIC_COMMANDS, command_msg(
                TOPIC_COMMANDS, session.demo_id, len(session.events) - 1, t, item.kind))
            if cmd.kind is CommandKind.START:
                broker.publish(TOPIC_STATES, _start_marker(session, chain, model_name,
                                                           config.record_hz, t))
            elif cmd.kind is CommandKind.STOP:
                broker.publish(TOPIC_STATES, command_msg(
                    TOPIC_STATES, session.demo_id, 1, t, "stop"))
                try:
                    finished_traj, finished_act = session.finalize()
                except EmptyTrajectoryError as exc:
                    warnings.append(str(exc))
                    logger.warning("%s", exc)
                else:
                    if trajectory is None:
                        trajectory, act = finished_traj, finished_act
                    else:
                        warnings.append(
                            f"demonstration {finished_traj.session_id} recorded but only "
                            "the first one per script is persisted")
        elif prio == PRIO_SPHERE:
            pos = np.asarray(item.position, dtype=float)
            draw = rng.standard_normal(3)
            if noise_sigma_mm:
                pos = pos + draw * (noise_sigma_mm / 1000.0)
            try:
                latest_sphere = Pose(pos, np.asarray(item.orientation, dtype=float)
                                     if item.orientation else np.array([1.0, 0, 0, 0]))
            except InputError as exc:
                warnings.append(f"sphere event at {t} ms skipped: {exc}")
        elif prio == PRIO_IK:
            session.tick_ik(latest_sphere)
            if scene is not None:
                wrist = forward_kinematics(chain, session.q)
                scene = scene_step(scene, wrist, session.gripper)
                closed = session.gripper is Gripper.CLOSED
                if closed and not was_closed and scene.attached_id is None:
                    warnings.append(f"grasp at {t} ms closed on empty space")
                was_closed = closed
        else:  # PRIO_REC
            msg = session.tick_record(t)
            if msg is not None:
                broker.publish(TOPIC_STATES, msg)
            broker.publish(TOPIC_TELEMETRY, _telemetry_msg(session, chain, t))
            if scene is not None:
                broker.publish(TOPIC_SCENE, StateMsg(
                    "scene", TOPIC_SCENE, session.demo_id, session.record_ticks, t,
                    scene_payload(scene)))

    if session.mode is Mode.RECORDING:
        warnings.append("script ended while still recording; trajectory file left unfinalized")
        logger.warning("script for %s ended without a stop command", session.demo_id)

    out_path = Path(out_path) if out_path is not None else None
    finalized = False
    states = session.pending_states if trajectory is None else len(trajectory.states)
    if out_path is not None:
        result = buffer_consume(broker, TOPIC_STATES, out_path, wait=False)
        finalized = result.finalized
        states = result.count

    duration_s = (trajectory.duration_ms / 1000.0) if trajectory is not None else 0.0
    if own_broker:
        broker.close()
    return TeachReport(session_id=session.demo_id, out_path=out_path, states=states,
                       duration_s=duration_s, finalized=finalized,
                       ik_ticks=session.ik_ticks, record_ticks=session.record_ticks,
                       trajectory=trajectory, act=act, final_scene=scene,
                       warnings=warnings)


def _telemetry_msg(session: Session, chain: KinematicChain, t_ms: int) -> StateMsg:
    tip = forward_kinematics(chain, session.q)
    frames = fk_frames(chain, session.q)
    return StateMsg("telemetry", TOPIC_TELEMETRY, session.demo_id,
                    session.record_ticks, t_ms, {
                        "mode": session.mode.value,
                        "gripper": session.gripper.value,
                        "q": [float(v) for v in session.q],
                        "tip_position": [float(v) for v in tip.position],
                        "tip_orientation": [float(v) for v in tip.orientation],
                        "link_positions": [[float(v) for v in p] for p in frames],
                        "sphere_position": [float(v) for v in session.target.position],
                        "recorded_states": session.pending_states,
                    })


# --- live engine (serve mode) --------------------------------------------------

class LiveEngine:
    """Real-time engine: two fixed-rate timers over one session, command and
    sphere ingress via broker topics, telemetry/scene egress back onto the
    broker. Single writer thread; all external input arrives through topics.
    """

    def __init__(self, config: EngineConfig, broker: Broker | None = None):
        self.config = config
        self.broker = broker or Broker()
        self.chain = load_chain(config)
        self.model_name = load_urdf(config.urdf).name
        self.session = Session(self.chain, config.ik_params,
                               session_id=config.session_id, q0=config.initial_q)
        self.scene: Scene | None = None
        self._scene_config = None
        if config.scene_config:
            self._scene_config = load_scene_config(config.scene_config)
            self.scene = spawn_scene(self._scene_config)
        self.clock = WallClock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._cmd_sub = self.broker.subscribe(TOPIC_COMMANDS,
                                              from_seq=self.broker.end_offset(TOPIC_COMMANDS))
        self._sphere_sub = self.broker.subscribe(TOPIC_SPHERE,
                                                 from_seq=self.broker.end_offset(TOPIC_SPHERE))
        self._latest_sphere: Pose | None = None
        self._was_closed = False
        self._last_trajectory: Trajectory | None = None
        self._replay_view: dict | None = None  # {"q": ..., "gripper": ..., "scene": ...}
        self._replay_thread: threading.Thread | None = None

    def reset_scene(self) -> None:
        if self._scene_config:
            self.scene = spawn_scene(self._scene_config)

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="kteach-engine", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def _reject(self, kind: str, reason: str, now_ms: int) -> None:
        self.broker.publish(TOPIC_TELEMETRY, StateMsg(
            "telemetry", TOPIC_TELEMETRY, self.session.demo_id, -1, now_ms,
            {"event": "command_rejected", "kind": kind, "reason": reason}))

    def _drain_ingress(self, now_ms: int) -> None:
        while True:
            msg = self._cmd_sub.poll(0.0)
            if msg is None:
                break
            kind = msg.payload.get("kind")
            if kind == "replay":
                self._start_replay(now_ms)
                continue
            try:
                cmd = VoiceCommand(CommandKind(kind), now_ms)
            except ValueError:
                logger.warning("ignoring unknown command kind %r", kind)
                continue
            if cmd.kind is CommandKind.START and self._replay_view is not None:
                self._reject(kind, "playback in progress", now_ms)
                continue
            try:
                self.session.handle_voice(cmd)
            except StateError as exc:
                self._reject(kind, str(exc), now_ms)
                continue
            if cmd.kind is CommandKind.START:
                self.broker.publish(TOPIC_STATES, _start_marker(
                    self.session, self.chain, self.model_name, self.config.record_hz, now_ms))
            elif cmd.kind is CommandKind.STOP:
                self.broker.publish(TOPIC_STATES, command_msg(
                    TOPIC_STATES, self.session.demo_id, 1, now_ms, "stop"))
                try:
                    self._last_trajectory, _ = self.session.finalize()
                except EmptyTrajectoryError as exc:
                    logger.warning("%s", exc)

    def _start_replay(self, now_ms: int) -> None:
        """Manually triggered playback of the last finalized demonstration.

        Runs on its own thread against a fresh controller and scene; while it
        is active the telemetry and scene topics show the replayed motion."""
        from .playback import SimController, play  # deferred: playback imports session

        if self._replay_thread is not None and self._replay_thread.is_alive():
            self._reject("replay", "playback already in progress", now_ms)
            return
        if self.session.mode is Mode.RECORDING:
            self._reject("replay", "cannot replay while recording", now_ms)
            return
        traj = self._last_trajectory
        if traj is None:
            self._reject("replay", "no finalized demonstration to replay", now_ms)
            return

        controller = SimController(self.chain, q0=self.config.initial_q)
        replay_scene = spawn_scene(self._scene_config) if self._scene_config else None
        view = {"q": controller.q_actual, "gripper": Gripper.OPEN, "scene": replay_scene}
        self._replay_view = view

        def observer(step_scene, ctrl):
            view["q"] = ctrl.q_actual
            view["gripper"] = ctrl.gripper_actual
            view["scene"] = step_scene

        def run():
            try:
                report = play(traj, controller, replay_scene,
                              broker=self.broker, observer=observer)
                stacked = None
                if report.final_scene is not None:
                    from .scene import count_stacked
                    stacked = count_stacked(report.final_scene)
                self.broker.publish(TOPIC_PLAYBACK, StateMsg(
                    "telemetry", TOPIC_PLAYBACK, traj.session_id, -1,
                    self.clock.now_ms(),
                    {"event": "playback_finished", "stacked": stacked,
                     "duration_s": report.duration_s, "faults": report.faults}))
            finally:
                self._replay_view = None

        self._replay_thread = threading.Thread(target=run, name="kteach-replay",
                                               daemon=True)
        self._replay_thread.start()

    def _publish_snapshot(self, now_ms: int) -> None:
        """Telemetry and scene messages at the record cadence. While a replay
        is active they show the replayed motion instead of the idle session."""
        view = self._replay_view
        if view is None:
            self.broker.publish(TOPIC_TELEMETRY,
                                _telemetry_msg(self.session, self.chain, now_ms))
            scene = self.scene
            session_id = self.session.demo_id
        else:
            q = np.asarray(view["q"], dtype=float)
            tip = forward_kinematics(self.chain, q)
            frames = fk_frames(self.chain, q)
            session_id = (self._last_trajectory.session_id
                          if self._last_trajectory else self.session.demo_id)
            self.broker.publish(TOPIC_TELEMETRY, StateMsg(
                "telemetry", TOPIC_TELEMETRY, session_id,
                self.session.record_ticks, now_ms, {
                    "mode": "replaying",
                    "gripper": getattr(view["gripper"], "value", view["gripper"]),
                    "q": [float(v) for v in q],
                    "tip_position": [float(v) for v in tip.position],
                    "tip_orientation": [float(v) for v in tip.orientation],
                    "link_positions": [[float(v) for v in p] for p in frames],
                    "sphere_position": [float(v) for v in self.session.target.position],
                    "recorded_states": 0,
                }))
            scene = view["scene"]
        if scene is not None:
            self.broker.publish(TOPIC_SCENE, StateMsg(
                "scene", TOPIC_SCENE, session_id,
                self.session.record_ticks, now_ms, scene_payload(scene)))
        while True:
            msg = self._sphere_sub.poll(0.0)
            if msg is None:
                break
            try:
                pos = np.asarray(msg.payload["position"], dtype=float)
                quat = np.asarray(msg.payload.get("orientation", [1.0, 0, 0, 0]), dtype=float)
                self._latest_sphere = Pose(pos, quat)
            except (KeyError, InputError, ValueError) as exc:
                logger.warning("bad sphere message: %s", exc)

    def _run(self) -> None:
        ik_period = 1000.0 / self.config.ik_hz
        rec_period = 1000.0 / self.config.record_hz
        k_ik = 0
        k_rec = 0
        while not self._stop.is_set():
            now = self.clock.now_ms()
            self._drain_ingress(now)
            next_ik = round(k_ik * ik_period)
            next_rec = round(k_rec * rec_period)
            if now >= next_ik:
                self.session.tick_ik(self._latest_sphere)
                if self.scene is not None:
                    wrist = forward_kinematics(self.chain, self.session.q)
                    self.scene = scene_step(self.scene, wrist, self.session.gripper)
                    closed = self.session.gripper is Gripper.CLOSED
                    if closed and not self._was_closed and self.scene.attached_id is None:
                        logger.info("grasp closed on empty space")
                    self._was_closed = closed
                k_ik += 1
                continue
            if now >= next_rec:
                msg = self.session.tick_record(now)
                if msg is not None:
                    self.broker.publish(TOPIC_STATES, msg)
                self._publish_snapshot(now)
                k_rec += 1
                continue
            wait_ms = min(next_ik, next_rec) - now
            self._stop.wait(timeout=max(wait_ms, 1) / 1000.0)
