"""URDF parsing: robot descriptions in, kinematic chains out.

Only the structural subset matters here (link, joint, origin, axis, limit).
Visual, collision, and inertial elements are skipped; mimic/dynamics/safety
tags are accepted but ignored with a warning.
"""

import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass

import numpy as np

from .errors import ChainError, ParseError, ValidationError
from .kinematics import JointKind, JointSpec, KinematicChain

logger = logging.getLogger(__name__)

_IGNORED_JOINT_TAGS = ("mimic", "dynamics", "safety_controller", "calibration")
_DEFAULT_AXIS = (1.0, 0.0, 0.0)  # URDF default when <axis> is absent


@dataclass(frozen=True)
class RobotModel:
    """Parsed robot description: link names plus joint specs, possibly a branching tree."""

    name: str
    links: tuple[str, ...]
    joints: tuple[JointSpec, ...]

    def joint(self, name: str) -> JointSpec:
        for j in self.joints:
            if j.name == name:
                return j
        raise KeyError(name)

    @property
    def dof(self) -> int:
        return sum(1 for j in self.joints if j.actuated)


def _parse_vector(text: str, name: str, joint: str) -> np.ndarray:
    try:
        vec = np.array([float(v) for v in text.split()], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"joint '{joint}': bad {name} value {text!r}") from exc
    if vec.shape != (3,):
        raise ValidationError(f"joint '{joint}': {name} must have 3 components")
    return vec


def _parse_joint(elem: ET.Element) -> JointSpec:
    name = elem.get("name")
    if not name:
        raise ValidationError("joint element without a name")
    kind_text = elem.get("type")
    try:
        kind = JointKind(kind_text)
    except ValueError:
        raise ValidationError(f"joint '{name}': unsupported type {kind_text!r}") from None

    parent = elem.find("parent")
    child = elem.find("child")
    if parent is None or child is None or "link" not in parent.attrib or "link" not in child.attrib:
        raise ValidationError(f"joint '{name}': missing parent/child link reference")

    origin = elem.find("origin")
    xyz = np.zeros(3)
    rpy = np.zeros(3)
    if origin is not None:
        if "xyz" in origin.attrib:
            xyz = _parse_vector(origin.attrib["xyz"], "origin xyz", name)
        if "rpy" in origin.attrib:
            rpy = _parse_vector(origin.attrib["rpy"], "origin rpy", name)

    axis_elem = elem.find("axis")
    axis = np.array(_DEFAULT_AXIS)
    if axis_elem is not None:
        axis = _parse_vector(axis_elem.attrib.get("xyz", "1 0 0"), "axis xyz", name)
    if kind is not JointKind.FIXED:
        norm = np.linalg.norm(axis)
        if norm < 1e-12:
            raise ValidationError(f"joint '{name}': zero-length axis")
        axis = axis / norm

    limit_elem = elem.find("limit")
    if kind in (JointKind.REVOLUTE, JointKind.PRISMATIC):
        if limit_elem is None:
            raise ValidationError(f"joint '{name}': {kind.value} joint lacks a <limit> element")
        lower = float(limit_elem.attrib.get("lower", 0.0))
        upper = float(limit_elem.attrib.get("upper", 0.0))
    else:
        lower, upper = -np.inf, np.inf

    for tag in _IGNORED_JOINT_TAGS:
        if elem.find(tag) is not None:
            logger.warning("joint '%s': ignoring <%s> element", name, tag)

    return JointSpec(
        name=name,
        kind=kind,
        origin_translation=xyz,
        origin_rotation=rpy,
        axis=axis,
        limit_lower=lower,
        limit_upper=upper,
        parent_link=parent.attrib["link"],
        child_link=child.attrib["link"],
    )


def parse_urdf(document: str) -> RobotModel:
    """Parse a URDF document string into a RobotModel.

    Raises:
        ParseError: document is not well-formed XML (includes line info).
        ValidationError: structural rule violations (missing limits,
            dangling link references, duplicate joint names).
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        line, column = exc.position if exc.position else (None, None)
        raise ParseError(f"malformed XML: {exc.msg if hasattr(exc, 'msg') else exc}",
                         line=line, column=column) from exc

    if root.tag != "robot":
        raise ValidationError(f"root element is <{root.tag}>, expected <robot>")
    name = root.get("name", "robot")

    links = tuple(link.attrib["name"] for link in root.findall("link") if "name" in link.attrib)
    link_set = set(links)
    if len(link_set) != len(links):
        raise ValidationError("duplicate link names")

    joints = []
    seen = set()
    for elem in root.findall("joint"):
        spec = _parse_joint(elem)
        if spec.name in seen:
            raise ValidationError(f"duplicate joint name '{spec.name}'")
        seen.add(spec.name)
        for ref, role in ((spec.parent_link, "parent"), (spec.child_link, "child")):
            if ref not in link_set:
                raise ValidationError(
                    f"joint '{spec.name}': {role} link '{ref}' is not defined"
                )
        joints.append(spec)

    return RobotModel(name=name, links=links, joints=tuple(joints))


def load_urdf(path) -> RobotModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_urdf(fh.read())


def serialize_urdf(model: RobotModel) -> str:
    """Emit the structural subset back as URDF XML (round-trips through parse_urdf)."""
    root = ET.Element("robot", {"name": model.name})
    for link in model.links:
        ET.SubElement(root, "link", {"name": link})
    for j in model.joints:
        joint = ET.SubElement(root, "joint", {"name": j.name, "type": j.kind.value})
        ET.SubElement(joint, "parent", {"link": j.parent_link})
        ET.SubElement(joint, "child", {"link": j.child_link})
        ET.SubElement(joint, "origin", {
            "xyz": " ".join(repr(float(v)) for v in j.origin_translation),
            "rpy": " ".join(repr(float(v)) for v in j.origin_rotation),
        })
        if j.kind is not JointKind.FIXED:
            ET.SubElement(joint, "axis", {"xyz": " ".join(repr(float(v)) for v in j.axis)})
        if j.kind in (JointKind.REVOLUTE, JointKind.PRISMATIC):
            ET.SubElement(joint, "limit", {"lower": repr(float(j.limit_lower)),
                                           "upper": repr(float(j.limit_upper))})
    ET.indent(root)
    return ET.tostring(root, encoding="unicode")


def extract_chain(model: RobotModel, base_link: str, tip_link: str) -> KinematicChain:
    """Unique serial path of joints from base_link down to tip_link.

    Fixed joints along the path are retained. base_link == tip_link yields an
    empty chain (dof 0, identity kinematics).
    """
    link_set = set(model.links)
    if base_link not in link_set:
        raise ChainError(f"base link '{base_link}' not in model")
    if tip_link not in link_set:
        raise ChainError(f"tip link '{tip_link}' not in model")
    if base_link == tip_link:
        return KinematicChain(joints=(), base_link=base_link, tip_link=tip_link)

    parent_joint = {}  # child link -> joint
    for j in model.joints:
        if j.child_link in parent_joint:
            raise ValidationError(f"link '{j.child_link}' has multiple parent joints")
        parent_joint[j.child_link] = j

    path = []
    link = tip_link
    while link != base_link:
        j = parent_joint.get(link)
        if j is None:
            raise ChainError(
                f"tip link '{tip_link}' is not a descendant of base link '{base_link}'"
            )
        path.append(j)
        link = j.parent_link
    path.reverse()
    return KinematicChain(joints=tuple(path), base_link=base_link, tip_link=tip_link)
