"""Trajectory playback against a simulated low-level joint controller.

Loads a finalized trajectory file and forwards its state commands at the
recorded rate (inter-command delays equal the recorded timestamp deltas),
optionally driving an attached scene so taught pick-and-place skills can be
scored afterwards.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .clock import VirtualClock, WallClock
from .errors import InputError, SchemaError
from .kinematics import KinematicChain, Pose, forward_kinematics
from .scene import Scene, step as scene_step
from .session import Gripper, RobotState, Trajectory
from .streaming import Broker, StateMsg, TOPIC_PLAYBACK
from .trajfile import TrajectoryHeader, read_trajectory_file

logger = logging.getLogger(__name__)


class TrackingMode(str, Enum):
    INSTANT = "instant"
    RATE_LIMITED = "rate_limited"


class SimController:
    """Stand-in for a robot's internal low-level controller.

    instant mode snaps to each commanded configuration (exact replay);
    rate_limited mode slews each joint at most max_velocity rad/s toward the
    command and reports a fault when it cannot get there in time.
    """

    def __init__(self, chain: KinematicChain, q0=None,
                 mode: TrackingMode = TrackingMode.INSTANT,
                 max_velocity: float = 1.5):
        if max_velocity <= 0:
            raise InputError("max_velocity must be positive")
        self.chain = chain
        self.mode = mode
        self.max_velocity = max_velocity
        self.q_actual = chain.clamp(np.zeros(chain.dof) if q0 is None else chain.check_q(q0))
        self.gripper_actual = Gripper.OPEN

    def command(self, q_cmd, gripper: Gripper, dt_ms: int) -> str | None:
        """Apply one state command. Returns a fault description or None."""
        q_cmd = self.chain.clamp(self.chain.check_q(q_cmd))
        fault = None
        if self.mode is TrackingMode.INSTANT:
            self.q_actual = q_cmd
        else:
            budget = self.max_velocity * max(dt_ms, 0) / 1000.0
            delta = q_cmd - self.q_actual
            clipped = np.clip(delta, -budget, budget)
            self.q_actual = self.chain.clamp(self.q_actual + clipped)
            lag = float(np.max(np.abs(q_cmd - self.q_actual)))
            if lag > 1e-9:
                fault = f"velocity limit: {lag:.4f} rad short of command"
        self.gripper_actual = gripper
        return fault


@dataclass(frozen=True)
class PlaybackStep:
    timestamp_ms: int
    q_commanded: tuple[float, ...]
    q_actual: tuple[float, ...]
    gripper: Gripper
    fault: str | None = None


@dataclass(frozen=True)
class PlaybackReport:
    session_id: str
    steps: tuple[PlaybackStep, ...]
    duration_s: float
    faults: int
    final_scene: Scene | None = None
    stacked: int | None = field(default=None)

    @property
    def max_tracking_error(self) -> float:
        if not self.steps:
            return 0.0
        return max(float(np.max(np.abs(np.asarray(s.q_commanded) - np.asarray(s.q_actual))))
                   for s in self.steps)


def load_trajectory(path, chain: KinematicChain | None = None,
                    salvage: bool = False) -> tuple[Trajectory, TrajectoryHeader]:
    """Read a trajectory file back into a Trajectory.

    Raises:
        CorruptFileError: truncated/unfinalized file without the salvage flag,
            or footer/body mismatch.
        SchemaError: the file's dof does not match the requested chain.
        EmptyTrajectoryError: salvaged file holds zero records.
    """
    header, records, finalized = read_trajectory_file(path, salvage=salvage)
    if chain is not None and header.dof != chain.dof:
        raise SchemaError(f"{path}: trajectory dof {header.dof} does not match "
                          f"chain dof {chain.dof}")
    states = tuple(RobotState(r.timestamp_ms, r.q, Gripper(r.gripper)) for r in records)
    traj = Trajectory(session_id=header.session_id, states=states,
                      t_start_ms=states[0].timestamp_ms if states else 0,
                      t_end_ms=states[-1].timestamp_ms if states else 0)
    if not finalized:
        logger.warning("loaded unfinalized trajectory %s (%d states)",
                       header.session_id, len(states))
    return traj, header


def play(traj: Trajectory, controller: SimController, scene: Scene | None = None,
         clock=None, broker: Broker | None = None,
         progress_topic: str = TOPIC_PLAYBACK, observer=None) -> PlaybackReport:
    """Replay a trajectory at the recorded rate.

    Commands are issued at deadlines spaced by the recorded timestamp deltas
    (the first immediately). Controller faults are recorded per step and do
    not abort playback. When a scene is attached, it advances after every
    command using the tip pose of the controller's actual configuration.
    An observer callable, if given, sees (scene, controller) after each step.
    """
    if controller.chain.dof != len(traj.states[0].q):
        raise SchemaError("trajectory dof does not match controller chain")
    clock = clock if clock is not None else WallClock()
    start_ms = clock.now_ms()
    t0 = traj.states[0].timestamp_ms

    steps = []
    faults = 0
    prev_ts = t0
    for i, state in enumerate(traj.states):
        deadline = start_ms + (state.timestamp_ms - t0)
        clock.sleep_until(deadline)
        fault = controller.command(np.asarray(state.q), state.gripper,
                                   dt_ms=state.timestamp_ms - prev_ts)
        prev_ts = state.timestamp_ms
        if fault:
            faults += 1
        if scene is not None:
            wrist = forward_kinematics(controller.chain, controller.q_actual)
            scene = scene_step(scene, wrist, controller.gripper_actual)
        if observer is not None:
            observer(scene, controller)
        steps.append(PlaybackStep(
            timestamp_ms=state.timestamp_ms,
            q_commanded=tuple(float(v) for v in state.q),
            q_actual=tuple(float(v) for v in controller.q_actual),
            gripper=controller.gripper_actual,
            fault=fault,
        ))
        if broker is not None:
            broker.publish(progress_topic, StateMsg(
                "telemetry", progress_topic, traj.session_id, i, clock.now_ms(),
                {"progress": (i + 1) / len(traj.states),
                 "q": [float(v) for v in controller.q_actual],
                 "gripper": controller.gripper_actual.value}))

    duration_s = (clock.now_ms() - start_ms) / 1000.0
    return PlaybackReport(session_id=traj.session_id, steps=tuple(steps),
                          duration_s=duration_s, faults=faults, final_scene=scene)
