import numpy as np
import pytest

from kteach.errors import DimensionError, InputError
from kteach.ik import IKParams, servo_step, solve_ik
from kteach.kinematics import Pose, forward_kinematics

from conftest import random_q


class TestSolveIK:
    def test_planar_stretched_solution(self, planar2):
        result = solve_ik(planar2, Pose(np.array([1.0, 0.0, 0.0])), [0.1, -0.1],
                          IKParams(max_iterations=300))
        assert result.converged
        assert np.allclose(result.q, [0.0, 0.0], atol=1e-3)

    def test_unreachable_target_is_best_effort(self, planar2):
        result = solve_ik(planar2, Pose(np.array([1.5, 0.0, 0.0])), [0.3, 0.3],
                          IKParams(max_iterations=300))
        assert not result.converged
        assert result.position_error == pytest.approx(0.5, abs=1e-3)

    @pytest.mark.parametrize("name", ["planar2", "arm6", "arm7"])
    def test_reachable_targets_converge(self, name, all_chains, rng):
        chain = all_chains[name]
        params = IKParams(max_iterations=300)
        converged = 0
        for _ in range(30):
            q_star = random_q(chain, rng)
            target = forward_kinematics(chain, q_star)
            seed = chain.clamp(q_star + rng.uniform(-0.2, 0.2, chain.dof))
            result = solve_ik(chain, target, seed, params)
            if result.converged and result.position_error < 1e-3:
                converged += 1
        assert converged >= int(0.95 * 30)

    def test_limits_respected_exactly(self, arm7, rng):
        params = IKParams(max_iterations=100)
        for _ in range(20):
            target = forward_kinematics(arm7, random_q(arm7, rng))
            result = solve_ik(arm7, target, random_q(arm7, rng), params)
            assert np.all(result.q >= arm7.lower_limits)
            assert np.all(result.q <= arm7.upper_limits)

    def test_error_non_increasing_with_step_rejection(self, arm7, rng):
        for _ in range(10):
            target = forward_kinematics(arm7, random_q(arm7, rng))
            trace = []
            solve_ik(arm7, target, random_q(arm7, rng), IKParams(max_iterations=150),
                     trace=trace)
            diffs = np.diff(np.array(trace))
            assert np.all(diffs <= 1e-12)

    def test_deterministic(self, arm7, rng):
        target = forward_kinematics(arm7, random_q(arm7, rng))
        seed = random_q(arm7, rng)
        a = solve_ik(arm7, target, seed, IKParams())
        b = solve_ik(arm7, target, seed, IKParams())
        assert np.array_equal(a.q, b.q)
        assert a.iterations == b.iterations

    def test_converged_implies_within_tolerance(self, arm7, rng):
        params = IKParams(max_iterations=300)
        for _ in range(10):
            target = forward_kinematics(arm7, random_q(arm7, rng))
            result = solve_ik(arm7, target, random_q(arm7, rng), params)
            if result.converged:
                assert result.position_error <= params.position_tol
                assert result.orientation_error <= params.orientation_tol

    def test_dimension_mismatch(self, arm7):
        with pytest.raises(DimensionError):
            solve_ik(arm7, Pose(np.zeros(3)), np.zeros(6))

    def test_non_finite_target_rejected(self):
        with pytest.raises(InputError):
            Pose(np.array([np.inf, 0.0, 0.0]))

    def test_position_only_mode(self, planar2):
        # impossible orientation, reachable position: weight 0 must converge
        target = Pose(np.array([0.5, 0.5, 0.0]), np.array([0.0, 1.0, 0.0, 0.0]))
        result = solve_ik(planar2, target, [0.2, 0.2],
                          IKParams(max_iterations=300, orientation_weight=0.0))
        assert result.converged
        assert result.position_error < 1e-3


class TestIKParams:
    def test_rejects_bad_values(self):
        with pytest.raises(InputError):
            IKParams(damping=-0.1)
        with pytest.raises(InputError):
            IKParams(max_iterations=0)
        with pytest.raises(InputError):
            IKParams(position_tol=0.0)
        with pytest.raises(InputError):
            IKParams(step_scale=1.5)


class TestServoStep:
    def test_fixed_point(self, arm7, rng):
        q = random_q(arm7, rng)
        target = forward_kinematics(arm7, q)
        assert np.allclose(servo_step(arm7, target, q), q, atol=1e-12)

    def test_repeated_steps_reach_solver_answer(self, arm7, rng):
        params = IKParams()
        q_star = random_q(arm7, rng)
        target = forward_kinematics(arm7, q_star)
        q = chainstart = arm7.clamp(q_star + rng.uniform(-0.4, 0.4, 7))
        for _ in range(200):
            q = servo_step(arm7, target, q, params)
        solved = solve_ik(arm7, target, chainstart, IKParams(max_iterations=300))
        tip_servo = forward_kinematics(arm7, q).position
        tip_solved = forward_kinematics(arm7, solved.q).position
        assert np.allclose(tip_servo, tip_solved, atol=1e-3)
        assert np.linalg.norm(tip_servo - target.position) < 1e-3

    def test_limit_clamped_exactly(self, planar2):
        # target pulls the shoulder past its +pi limit
        q = np.array([np.pi, 0.0])
        target = Pose(np.array([-1.0, -0.2, 0.0]))
        for _ in range(50):
            q = servo_step(planar2, target, q)
        assert q[0] <= np.pi
        q_at_limit = np.array([np.pi, 0.0])
        stepped = servo_step(planar2, Pose(np.array([-1.0, -0.4, 0.0])), q_at_limit)
        assert stepped[0] <= np.pi

    def test_out_of_reach_saturates(self, planar2):
        q = np.array([0.1, 0.1])
        target = Pose(np.array([2.0, 0.0, 0.0]))
        for _ in range(100):
            q = servo_step(planar2, target, q, IKParams(orientation_weight=0.0))
        tip = forward_kinematics(planar2, q).position
        assert np.linalg.norm(tip - [1.0, 0.0, 0.0]) < 1e-2
