"""Kinematic chain structures, forward kinematics, and geometric Jacobians.

A chain is an ordered list of joints from a base link to a tip link, operating
directly on the joint-frame transforms found in the robot description. Fixed
joints stay in the chain (they contribute constant transforms) but do not
count toward the degrees of freedom.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionError, InputError, ValidationError
from .transforms import (
    axis_angle_matrix,
    make_transform,
    matrix_to_quat,
    quat_to_matrix,
    rpy_to_matrix,
)

_AXIS_NORM_TOL = 1e-9
_QUAT_NORM_TOL = 1e-6


class JointKind(str, Enum):
    REVOLUTE = "revolute"
    CONTINUOUS = "continuous"
    PRISMATIC = "prismatic"
    FIXED = "fixed"


@dataclass(frozen=True)
class JointSpec:
    """One joint of a robot description: frame offset, motion axis, and limits."""

    name: str
    kind: JointKind
    origin_translation: np.ndarray  # (3,) m
    origin_rotation: np.ndarray     # (3,) roll-pitch-yaw, rad
    axis: np.ndarray                # (3,) unit vector in the joint frame
    limit_lower: float
    limit_upper: float
    parent_link: str
    child_link: str

    def __post_init__(self):
        trans = np.asarray(self.origin_translation, dtype=float).reshape(3)
        rpy = np.asarray(self.origin_rotation, dtype=float).reshape(3)
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        if self.kind is not JointKind.FIXED:
            norm = np.linalg.norm(axis)
            if abs(norm - 1.0) > _AXIS_NORM_TOL:
                raise ValidationError(
                    f"joint '{self.name}': axis {axis.tolist()} is not unit-norm"
                )
        if self.kind in (JointKind.REVOLUTE, JointKind.PRISMATIC):
            if not (self.limit_lower <= self.limit_upper):
                raise ValidationError(
                    f"joint '{self.name}': limit_lower {self.limit_lower} > limit_upper {self.limit_upper}"
                )
        for arr in (trans, rpy, axis):
            arr.flags.writeable = False
        object.__setattr__(self, "origin_translation", trans)
        object.__setattr__(self, "origin_rotation", rpy)
        object.__setattr__(self, "axis", axis)

    @property
    def actuated(self) -> bool:
        return self.kind is not JointKind.FIXED

    def origin_transform(self) -> np.ndarray:
        """Constant 4x4 transform from the parent link frame to this joint frame."""
        rot = rpy_to_matrix(*self.origin_rotation)
        return make_transform(rot, self.origin_translation)

    def motion_transform(self, value: float) -> np.ndarray:
        """4x4 motion about/along the joint axis: rotation for revolute/continuous,
        translation for prismatic, identity for fixed."""
        if self.kind in (JointKind.REVOLUTE, JointKind.CONTINUOUS):
            return make_transform(axis_angle_matrix(self.axis, value), np.zeros(3))
        if self.kind is JointKind.PRISMATIC:
            return make_transform(np.eye(3), self.axis * value)
        return np.eye(4)


@dataclass(frozen=True)
class KinematicChain:
    """Ordered joints from base_link to tip_link. Immutable and thread-safe."""

    joints: tuple[JointSpec, ...]
    base_link: str
    tip_link: str

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        for prev, nxt in zip(self.joints, self.joints[1:]):
            if prev.child_link != nxt.parent_link:
                raise ValidationError(
                    f"joints '{prev.name}' and '{nxt.name}' are not parent/child-linked"
                )
        if self.joints:
            if self.joints[0].parent_link != self.base_link:
                raise ValidationError("first joint does not start at base_link")
            if self.joints[-1].child_link != self.tip_link:
                raise ValidationError("last joint does not end at tip_link")

    @property
    def dof(self) -> int:
        return sum(1 for j in self.joints if j.actuated)

    @property
    def actuated_joints(self) -> tuple[JointSpec, ...]:
        return tuple(j for j in self.joints if j.actuated)

    @property
    def joint_names(self) -> tuple[str, ...]:
        return tuple(j.name for j in self.actuated_joints)

    @property
    def lower_limits(self) -> np.ndarray:
        return np.array([j.limit_lower for j in self.actuated_joints])

    @property
    def upper_limits(self) -> np.ndarray:
        return np.array([j.limit_upper for j in self.actuated_joints])

    def clamp(self, q: np.ndarray) -> np.ndarray:
        """Clamp a joint vector to the limits, element-wise."""
        return np.clip(q, self.lower_limits, self.upper_limits)

    def check_q(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float).reshape(-1)
        if q.shape[0] != self.dof:
            raise DimensionError(f"expected {self.dof} joint values, got {q.shape[0]}")
        return q


@dataclass(frozen=True)
class Pose:
    """Position plus unit quaternion (w, x, y, z)."""

    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        quat = np.asarray(self.orientation, dtype=float).reshape(4)
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(quat))):
            raise InputError("pose contains non-finite values")
        norm = np.linalg.norm(quat)
        if abs(norm - 1.0) > _QUAT_NORM_TOL:
            raise InputError(f"quaternion norm {norm} too far from 1")
        quat = quat / norm
        pos.flags.writeable = False
        quat.flags.writeable = False
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", quat)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3))

    @classmethod
    def from_matrix(cls, t: np.ndarray) -> "Pose":
        return cls(t[:3, 3].copy(), matrix_to_quat(t[:3, :3]))

    def matrix(self) -> np.ndarray:
        return make_transform(quat_to_matrix(self.orientation), self.position)


def fk_transform(chain: KinematicChain, q) -> np.ndarray:
    """Tip frame in the base frame as a 4x4 homogeneous transform."""
    q = chain.check_q(q)
    t = np.eye(4)
    i = 0
    for joint in chain.joints:
        t = t @ joint.origin_transform()
        if joint.actuated:
            t = t @ joint.motion_transform(q[i])
            i += 1
    return t


def forward_kinematics(chain: KinematicChain, q) -> Pose:
    """Pose of the tip frame in the base frame for joint vector q."""
    return Pose.from_matrix(fk_transform(chain, q))


def fk_frames(chain: KinematicChain, q) -> list[np.ndarray]:
    """Origins of every joint frame plus the tip, in order, for rendering."""
    q = chain.check_q(q)
    t = np.eye(4)
    points = [t[:3, 3].copy()]
    i = 0
    for joint in chain.joints:
        t = t @ joint.origin_transform()
        if joint.actuated:
            t = t @ joint.motion_transform(q[i])
            i += 1
        points.append(t[:3, 3].copy())
    return points


def jacobian(chain: KinematicChain, q) -> np.ndarray:
    """Geometric Jacobian of the tip, 6 x dof, expressed in the base frame.

    Rows 0..2 are linear velocity per unit joint rate, rows 3..5 angular.
    """
    q = chain.check_q(q)
    # one forward pass collecting each actuated joint's axis and origin in base frame
    t = np.eye(4)
    axes, origins = [], []
    i = 0
    for joint in chain.joints:
        t = t @ joint.origin_transform()
        if joint.actuated:
            axes.append((joint.kind, t[:3, :3] @ joint.axis))
            origins.append(t[:3, 3].copy())
            t = t @ joint.motion_transform(q[i])
            i += 1
    tip = t[:3, 3]

    jac = np.zeros((6, chain.dof))
    for col, ((kind, axis_b), origin_b) in enumerate(zip(axes, origins)):
        if kind is JointKind.PRISMATIC:
            jac[:3, col] = axis_b
        else:
            jac[:3, col] = np.cross(axis_b, tip - origin_b)
            jac[3:, col] = axis_b
    return jac
