"""Damped least-squares inverse kinematics: full solves and single servo steps.

The solver tracks a 6-vector pose error (position difference stacked on the
rotation-vector orientation error) and updates joints with
dq = J^T (J J^T + lambda^2 I)^-1 e. Joint limits are clamped after every
update, so unreachable targets saturate instead of failing.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .kinematics import KinematicChain, Pose, fk_transform, jacobian
from .transforms import matrix_to_quat, rotation_error

_LAMBDA_CAP = 1.0  # upper bound when damping is escalated after a rejected step


@dataclass(frozen=True)
class IKParams:
    """Solver knobs. Defaults are tuned for 30 Hz wrist servoing."""

    damping: float = 0.05
    max_iterations: int = 100
    position_tol: float = 1e-4   # m
    orientation_tol: float = 1e-3  # rad
    step_scale: float = 0.5
    orientation_weight: float = 1.0  # 0.0 reproduces position-only tracking
    max_step: float = 0.2  # per-update joint motion bound, rad or m

    def __post_init__(self):
        if self.damping < 0.0:
            raise InputError("damping must be >= 0")
        if self.max_iterations < 1:
            raise InputError("max_iterations must be >= 1")
        if self.position_tol <= 0.0 or self.orientation_tol <= 0.0:
            raise InputError("tolerances must be positive")
        if not (0.0 < self.step_scale <= 1.0):
            raise InputError("step_scale must be in (0, 1]")
        if self.orientation_weight < 0.0:
            raise InputError("orientation_weight must be >= 0")
        if self.max_step <= 0.0:
            raise InputError("max_step must be positive")


@dataclass(frozen=True)
class IKResult:
    q: np.ndarray
    converged: bool
    iterations: int
    position_error: float
    orientation_error: float


def _pose_error(chain: KinematicChain, target: Pose, q: np.ndarray,
                weight: float) -> tuple[np.ndarray, float, float]:
    """Weighted 6-vector error plus raw position/orientation error magnitudes."""
    t = fk_transform(chain, q)
    e_pos = target.position - t[:3, 3]
    e_rot = rotation_error(target.orientation, matrix_to_quat(t[:3, :3]))
    err = np.concatenate([e_pos, weight * e_rot])
    return err, float(np.linalg.norm(e_pos)), float(np.linalg.norm(e_rot))


def _dls_update(chain: KinematicChain, q: np.ndarray, err: np.ndarray,
                damping: float, weight: float) -> np.ndarray:
    jac = jacobian(chain, q)
    jac[3:, :] *= weight
    jjt = jac @ jac.T + (damping ** 2) * np.eye(6)
    return jac.T @ np.linalg.solve(jjt, err)


def _converged(pos_err: float, rot_err: float, params: IKParams) -> bool:
    ok_pos = pos_err <= params.position_tol
    ok_rot = params.orientation_weight == 0.0 or rot_err <= params.orientation_tol
    return ok_pos and ok_rot


def _bounded(dq: np.ndarray, params: IKParams) -> np.ndarray:
    """Scale the whole update down when any joint would exceed max_step,
    preserving the step direction."""
    dq = params.step_scale * dq
    peak = float(np.max(np.abs(dq))) if dq.size else 0.0
    if peak > params.max_step:
        dq *= params.max_step / peak
    return dq


def solve_ik(chain: KinematicChain, target: Pose, q_seed, params: IKParams = IKParams(),
             trace: list | None = None) -> IKResult:
    """Iterate damped least-squares updates until tolerance or max_iterations.

    Steps that increase the weighted error norm are rejected and retried with
    doubled damping (capped at 1.0); damping resets on every accepted step, so
    the accepted-error sequence is non-increasing. The best iterate seen is
    returned even when the target is unreachable.

    Args:
        trace: optional list; the weighted error norm of each accepted iterate
            is appended, starting with the seed's.
    """
    q = chain.clamp(chain.check_q(q_seed)).astype(float)
    err, pos_err, rot_err = _pose_error(chain, target, q, params.orientation_weight)
    err_norm = float(np.linalg.norm(err))
    if trace is not None:
        trace.append(err_norm)

    best = (q.copy(), pos_err, rot_err, err_norm)
    lam = params.damping
    iterations = 0
    while iterations < params.max_iterations:
        if _converged(pos_err, rot_err, params):
            return IKResult(q, True, iterations, pos_err, rot_err)
        iterations += 1
        dq = _dls_update(chain, q, err, lam, params.orientation_weight)
        q_next = chain.clamp(q + _bounded(dq, params))
        err_next, pos_next, rot_next = _pose_error(chain, target, q_next,
                                                   params.orientation_weight)
        norm_next = float(np.linalg.norm(err_next))
        if norm_next > err_norm:
            # reject: keep q, escalate damping for the next attempt
            lam = min(2.0 * lam if lam > 0.0 else 1e-3, _LAMBDA_CAP)
            continue
        q, err, pos_err, rot_err, err_norm = q_next, err_next, pos_next, rot_next, norm_next
        lam = params.damping
        if trace is not None:
            trace.append(err_norm)
        if err_norm < best[3]:
            best = (q.copy(), pos_err, rot_err, err_norm)

    if _converged(pos_err, rot_err, params):
        return IKResult(q, True, iterations, pos_err, rot_err)
    q_best, pos_best, rot_best, _ = best
    return IKResult(q_best, False, iterations, pos_best, rot_best)


def servo_step(chain: KinematicChain, target: Pose, q_current,
               params: IKParams = IKParams()) -> np.ndarray:
    """Exactly one damped least-squares update toward the target.

    Suitable for fixed-rate servoing: per-step joint motion is bounded by
    step_scale, the result is clamped to limits, and a zero error returns
    q_current unchanged.
    """
    q = chain.check_q(q_current).astype(float)
    err, pos_err, rot_err = _pose_error(chain, target, q, params.orientation_weight)
    if _converged(pos_err, rot_err, params):
        return chain.clamp(q)
    dq = _dls_update(chain, q, err, params.damping, params.orientation_weight)
    return chain.clamp(q + _bounded(dq, params))
