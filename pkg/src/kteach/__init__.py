"""kteach: desk-scale kinesthetic teaching engine.

Load a URDF robot, track a draggable wrist target with damped least-squares
IK at 30 Hz, record demonstrations at 20 Hz through a topic broker, persist
and replay them at the recorded rate, and score taught pick-and-place skills
on a simulated cube-stacking task.
"""

__version__ = "0.1.0"

from .kinematics import JointKind, JointSpec, KinematicChain, Pose, forward_kinematics, jacobian
from .urdf import RobotModel, extract_chain, load_urdf, parse_urdf, serialize_urdf
from .ik import IKParams, IKResult, servo_step, solve_ik

__all__ = [
    "JointKind",
    "JointSpec",
    "KinematicChain",
    "Pose",
    "forward_kinematics",
    "jacobian",
    "RobotModel",
    "parse_urdf",
    "serialize_urdf",
    "load_urdf",
    "extract_chain",
    "IKParams",
    "IKResult",
    "solve_ik",
    "servo_step",
    "__version__",
]
