import numpy as np
import pytest

from kteach.clock import VirtualClock, WallClock
from kteach.errors import CorruptFileError, SchemaError
from kteach.playback import SimController, TrackingMode, load_trajectory, play
from kteach.session import Gripper, RobotState, Trajectory
from kteach.trajfile import TrajectoryHeader, TrajectoryWriter


def write_trajectory(path, dof=2, n=100, dt=50, finalize=True, amplitude=0.4):
    header = TrajectoryHeader("s1", "bot", dof, tuple(f"j{i}" for i in range(dof)), 20)
    writer = TrajectoryWriter(path, header)
    for i in range(n):
        q = [amplitude * np.sin(i / 10.0 + j) for j in range(dof)]
        writer.append(i, i * dt, q, "open")
    if finalize:
        writer.finalize()
    else:
        writer.close()
    return path


class TestLoad:
    def test_finalized_file(self, tmp_path, planar2):
        path = write_trajectory(tmp_path / "t.jsonl", n=100)
        traj, header = load_trajectory(path, planar2)
        assert len(traj.states) == 100
        assert header.rate_hz == 20

    def test_truncated_without_salvage(self, tmp_path, planar2):
        path = write_trajectory(tmp_path / "t.jsonl", n=10, finalize=False)
        with pytest.raises(CorruptFileError):
            load_trajectory(path, planar2)

    def test_dof_mismatch(self, tmp_path, arm7):
        path = write_trajectory(tmp_path / "t.jsonl", dof=2)
        with pytest.raises(SchemaError):
            load_trajectory(path, arm7)

    def test_salvage_loads_partial(self, tmp_path, planar2):
        path = write_trajectory(tmp_path / "t.jsonl", n=10, finalize=False)
        traj, _ = load_trajectory(path, planar2, salvage=True)
        assert len(traj.states) == 10


class TestController:
    def test_instant_tracks_exactly(self, planar2):
        controller = SimController(planar2)
        fault = controller.command([0.5, -0.5], Gripper.OPEN, dt_ms=50)
        assert fault is None
        assert np.allclose(controller.q_actual, [0.5, -0.5])

    def test_rate_limited_reports_fault(self, planar2):
        controller = SimController(planar2, mode=TrackingMode.RATE_LIMITED,
                                   max_velocity=1.0)
        fault = controller.command([1.0, 0.0], Gripper.OPEN, dt_ms=50)  # 20 rad/s needed
        assert fault is not None
        assert np.allclose(controller.q_actual, [0.05, 0.0])

    def test_limits_always_respected(self, planar2):
        controller = SimController(planar2)
        controller.command([10.0, -10.0], Gripper.OPEN, dt_ms=50)
        assert np.all(controller.q_actual <= planar2.upper_limits)
        assert np.all(controller.q_actual >= planar2.lower_limits)


class TestPlay:
    def test_instant_replay_is_exact(self, tmp_path, planar2):
        path = write_trajectory(tmp_path / "t.jsonl", n=40)
        traj, _ = load_trajectory(path, planar2)
        report = play(traj, SimController(planar2), clock=VirtualClock())
        assert report.max_tracking_error == 0.0
        for step, state in zip(report.steps, traj.states):
            assert step.q_actual == state.q

    def test_virtual_clock_duration_matches_recording(self, tmp_path, planar2):
        path = write_trajectory(tmp_path / "t.jsonl", n=100, dt=50)
        traj, _ = load_trajectory(path, planar2)
        report = play(traj, SimController(planar2), clock=VirtualClock())
        assert report.duration_s == pytest.approx(4.95, abs=1e-9)

    def test_wall_clock_timing_within_two_percent(self, tmp_path, planar2):
        path = write_trajectory(tmp_path / "t.jsonl", n=50, dt=50)  # 2.45 s
        traj, _ = load_trajectory(path, planar2)
        report = play(traj, SimController(planar2), clock=WallClock())
        recorded = (traj.t_end_ms - traj.t_start_ms) / 1000.0
        assert abs(report.duration_s - recorded) <= 0.02 * recorded + 0.02

    def test_rate_limited_faults_do_not_abort(self, tmp_path, planar2):
        path = write_trajectory(tmp_path / "t.jsonl", n=30, amplitude=2.0)
        traj, _ = load_trajectory(path, planar2)
        controller = SimController(planar2, mode=TrackingMode.RATE_LIMITED,
                                   max_velocity=0.5)
        report = play(traj, controller, clock=VirtualClock())
        assert report.faults > 0
        assert len(report.steps) == 30

    def test_replay_idempotent_on_scene(self, tmp_path, arm7, teach_config_path,
                                        scene_config_path, stacking_script_path):
        from kteach.engine import load_config, load_script, run_scripted
        from kteach.scene import load_scene_config, scene_payload, spawn_scene

        config = load_config(teach_config_path)
        script = load_script(stacking_script_path)
        out = tmp_path / "demo.jsonl"
        run_scripted(config, script, out)
        traj, _ = load_trajectory(out, arm7)
        scene_config = load_scene_config(scene_config_path)

        results = []
        for _ in range(2):
            controller = SimController(arm7, q0=config.initial_q)
            report = play(traj, controller, spawn_scene(scene_config), clock=VirtualClock())
            results.append(scene_payload(report.final_scene))
        assert results[0] == results[1]

    def test_gripper_forwarded_at_recorded_position(self, tmp_path, planar2):
        header = TrajectoryHeader("s1", "bot", 2, ("a", "b"), 20)
        writer = TrajectoryWriter(tmp_path / "t.jsonl", header)
        for i in range(10):
            writer.append(i, i * 50, [0.0, 0.0], "closed" if i >= 5 else "open")
        writer.finalize()
        traj, _ = load_trajectory(tmp_path / "t.jsonl", planar2)
        report = play(traj, SimController(planar2), clock=VirtualClock())
        grippers = [s.gripper for s in report.steps]
        assert grippers[:5] == [Gripper.OPEN] * 5
        assert grippers[5:] == [Gripper.CLOSED] * 5

    def test_dof_mismatch_with_controller(self, planar2, arm7):
        states = tuple(RobotState(i * 50, (0.0,) * 7, Gripper.OPEN) for i in range(3))
        traj = Trajectory("s", states, 0, 100)
        with pytest.raises(SchemaError):
            play(traj, SimController(planar2), clock=VirtualClock())
