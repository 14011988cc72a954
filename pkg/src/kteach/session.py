"""Teaching session state machine.

A session owns one robot chain and tracks a draggable wrist target. The IK
tick (nominally 30 Hz) servos the joints toward the target; the record tick
(nominally 20 Hz) snapshots timestamped states into the trajectory while a
demonstration is active. Voice commands (start/stop/open/close) drive the
mode transitions and the gripper flag. Tick cadence is owned by the engine,
not by this module.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import EmptyTrajectoryError, StateError
from .ik import IKParams, servo_step
from .kinematics import KinematicChain, Pose, forward_kinematics
from .streaming import StateMsg, state_msg

logger = logging.getLogger(__name__)


class Gripper(str, Enum):
    OPEN = "open"
    CLOSED = "closed"


class CommandKind(str, Enum):
    START = "start"
    STOP = "stop"
    OPEN = "open"
    CLOSE = "close"


class Mode(str, Enum):
    IDLE = "idle"
    RECORDING = "recording"


class Medium(str, Enum):
    GESTURE = "gesture"
    VOICE = "voice"


@dataclass(frozen=True)
class VoiceCommand:
    kind: CommandKind
    timestamp_ms: int


@dataclass(frozen=True)
class RobotState:
    """Timestamped joint snapshot; q is a tuple so states stay immutable."""

    timestamp_ms: int
    q: tuple[float, ...]
    gripper: Gripper


@dataclass(frozen=True)
class Trajectory:
    session_id: str
    states: tuple[RobotState, ...]
    t_start_ms: int
    t_end_ms: int

    def __post_init__(self):
        if not self.states:
            raise EmptyTrajectoryError("a finalized trajectory cannot be empty")
        if self.t_start_ms != self.states[0].timestamp_ms:
            raise ValueError("t_start_ms must equal the first state's timestamp")
        if self.t_end_ms != self.states[-1].timestamp_ms:
            raise ValueError("t_end_ms must equal the last state's timestamp")

    @property
    def duration_ms(self) -> int:
        return self.t_end_ms - self.t_start_ms


@dataclass(frozen=True)
class CommAct:
    """A demonstration as one communicative act: gesture plus voice media
    conveying a trajectory over a time interval.

    The act interval covers both per-medium sub-intervals: the gestural one
    spans the recorded trajectory, the vocal one spans the start..stop
    commands bracketing it.
    """

    media: frozenset
    info: Trajectory
    interval: tuple[int, int]
    gesture_interval: tuple[int, int]
    voice_interval: tuple[int, int]
    commands: tuple[VoiceCommand, ...] = field(default=())

    def __post_init__(self):
        lo, hi = self.interval
        for sub in (self.gesture_interval, self.voice_interval):
            if sub[0] < lo or sub[1] > hi:
                raise ValueError("act interval must cover every per-medium sub-interval")


class Session:
    """Single-writer session state. All mutations go through handle_voice and
    the two tick entry points; concurrent callers must serialize externally."""

    def __init__(self, chain: KinematicChain, params: IKParams = IKParams(),
                 session_id: str = "session", q0=None,
                 state_topic: str = "kt.states"):
        self.chain = chain
        self.params = params
        self.base_id = session_id
        self.state_topic = state_topic
        self.q = chain.clamp(np.zeros(chain.dof) if q0 is None else chain.check_q(q0))
        self.gripper = Gripper.OPEN
        self.target: Pose = forward_kinematics(chain, self.q)
        self.mode = Mode.IDLE
        self.events: list[VoiceCommand] = []   # accepted commands, all demonstrations
        self.ik_ticks = 0
        self.record_ticks = 0

        self._demo_count = 0
        self._states: list[RobotState] = []
        self._demo_events: list[VoiceCommand] = []
        self._demo_id = session_id
        self._seq = 0
        self._start_ts: int | None = None
        self._pending: tuple[str, list[RobotState], list[VoiceCommand], int, int] | None = None

    @property
    def demo_id(self) -> str:
        return self._demo_id

    def handle_voice(self, cmd: VoiceCommand) -> None:
        """Apply one voice command.

        Raises:
            StateError: start while recording, or stop while idle. The
                session state is left untouched in that case.
        """
        if cmd.kind is CommandKind.START:
            if self.mode is Mode.RECORDING:
                raise StateError("start rejected: a demonstration is already recording")
            self._demo_count += 1
            self._demo_id = (self.base_id if self._demo_count == 1
                             else f"{self.base_id}-{self._demo_count}")
            self._states = []
            self._demo_events = [cmd]
            self._seq = 0
            self._start_ts = cmd.timestamp_ms
            self.mode = Mode.RECORDING
            logger.info("session %s: recording started at %d ms", self._demo_id, cmd.timestamp_ms)
        elif cmd.kind is CommandKind.STOP:
            if self.mode is Mode.IDLE:
                raise StateError("stop rejected: no demonstration is recording")
            self.mode = Mode.IDLE
            self._demo_events.append(cmd)
            self._pending = (self._demo_id, self._states, self._demo_events,
                             self._start_ts, cmd.timestamp_ms)
            logger.info("session %s: recording stopped at %d ms (%d states)",
                        self._demo_id, cmd.timestamp_ms, len(self._states))
        else:
            self.gripper = Gripper.CLOSED if cmd.kind is CommandKind.CLOSE else Gripper.OPEN
            if self.mode is Mode.RECORDING:
                self._demo_events.append(cmd)
        self.events.append(cmd)

    def tick_ik(self, sphere_pose: Pose | None = None) -> None:
        """One servo update toward the interaction sphere. Runs in every mode:
        the virtual robot always tracks the sphere."""
        if sphere_pose is not None:
            self.target = sphere_pose
        self.q = servo_step(self.chain, self.target, self.q, self.params)
        self.ik_ticks += 1

    def tick_record(self, now_ms: int) -> StateMsg | None:
        """Snapshot the current state while recording; no-op when idle.

        Non-increasing timestamps are dropped so trajectory timestamps stay
        strictly increasing regardless of scheduler behavior.
        """
        self.record_ticks += 1
        if self.mode is not Mode.RECORDING:
            return None
        if self._states and now_ms <= self._states[-1].timestamp_ms:
            logger.debug("dropping record tick at %d ms (not past %d)",
                         now_ms, self._states[-1].timestamp_ms)
            return None
        state = RobotState(now_ms, tuple(float(v) for v in self.q), self.gripper)
        self._states.append(state)
        msg = state_msg(self.state_topic, self._demo_id, self._seq, now_ms,
                        q=list(state.q), gripper=state.gripper.value)
        self._seq += 1
        return msg

    def finalize(self) -> tuple[Trajectory, CommAct]:
        """Package the last stopped demonstration as a trajectory plus act.

        Raises:
            StateError: no stop has been processed since the last finalize.
            EmptyTrajectoryError: stop arrived before any state was recorded.
        """
        if self._pending is None:
            raise StateError("nothing to finalize: no stopped demonstration pending")
        demo_id, states, events, start_ts, stop_ts = self._pending
        if not states:
            self._pending = None
            raise EmptyTrajectoryError(
                f"session {demo_id}: stopped with zero recorded states"
            )
        self._pending = None
        traj = Trajectory(session_id=demo_id, states=tuple(states),
                          t_start_ms=states[0].timestamp_ms,
                          t_end_ms=states[-1].timestamp_ms)
        gesture = (traj.t_start_ms, traj.t_end_ms)
        voice = (start_ts, stop_ts)
        interval = (min(gesture[0], voice[0]), max(gesture[1], voice[1]))
        act = CommAct(media=frozenset({Medium.GESTURE, Medium.VOICE}),
                      info=traj, interval=interval,
                      gesture_interval=gesture, voice_interval=voice,
                      commands=tuple(events))
        return traj, act

    @property
    def pending_states(self) -> int:
        return len(self._states)
