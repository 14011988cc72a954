"""Stacking-task workspace: table, cubes, and a kinematic grasp model.

Full rigid-body physics is deliberately replaced by attach/settle rules: a
closing gripper grabs the nearest free cube within reach, an opening gripper
drops its cube straight down onto the highest sufficiently-overlapped
support. Cubes stay axis-aligned. This keeps the task score deterministic
and the step function pure.
"""

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, EvalError
from .kinematics import Pose
from .transforms import quat_to_matrix

logger = logging.getLogger(__name__)

SUPPORT_TABLE = "table"
SUPPORT_GRIPPER = "gripper"

_CONTACT_TOL = 1e-6
_OVERLAP_MIN = 0.5  # fraction of a cube footprint needed to land on another cube


def support_cube(cube_id: str) -> str:
    return f"cube:{cube_id}"


@dataclass(frozen=True)
class Cube:
    id: str
    side: float
    pose: Pose
    support: str = SUPPORT_TABLE

    @property
    def top_z(self) -> float:
        return float(self.pose.position[2] + self.side / 2.0)

    @property
    def bottom_z(self) -> float:
        return float(self.pose.position[2] - self.side / 2.0)


@dataclass(frozen=True)
class Scene:
    cubes: tuple[Cube, ...]
    table_height: float
    target_order: tuple[str, ...]
    target_base_xy: np.ndarray
    grasp_radius: float
    place_tolerance_xy: float
    gripper_closed: bool = False
    attached_id: str | None = None
    # grasp offset of the attached cube's center, expressed in the wrist frame
    attach_offset: tuple[float, float, float] | None = None

    def __post_init__(self):
        xy = np.asarray(self.target_base_xy, dtype=float).reshape(2)
        xy.flags.writeable = False
        object.__setattr__(self, "target_base_xy", xy)
        object.__setattr__(self, "cubes", tuple(self.cubes))
        attached = [c for c in self.cubes if c.support == SUPPORT_GRIPPER]
        if len(attached) > 1:
            raise ConfigError("at most one cube may be attached to the gripper")

    def cube(self, cube_id: str) -> Cube:
        for c in self.cubes:
            if c.id == cube_id:
                return c
        raise KeyError(cube_id)


def _footprint_overlap(a_xy: np.ndarray, b_xy: np.ndarray, side: float) -> float:
    ox = max(0.0, side - abs(a_xy[0] - b_xy[0]))
    oy = max(0.0, side - abs(a_xy[1] - b_xy[1]))
    return (ox * oy) / (side * side)


def random_layout(seed: int, n: int = 4, *, side: float = 0.05,
                  x_range=(0.35, 0.55), y_range=(-0.25, 0.25),
                  min_gap: float = 0.02, max_tries: int = 1000) -> list[dict]:
    """Seeded non-overlapping cube layout; same seed, same layout."""
    rng = np.random.default_rng(seed)
    placed: list[np.ndarray] = []
    for _ in range(max_tries):
        if len(placed) == n:
            break
        cand = np.array([rng.uniform(*x_range), rng.uniform(*y_range)])
        if all(max(abs(cand[0] - p[0]), abs(cand[1] - p[1])) >= side + min_gap for p in placed):
            placed.append(cand)
    if len(placed) < n:
        raise ConfigError(f"could not place {n} non-overlapping cubes in {max_tries} tries")
    return [{"id": f"cube{i + 1}", "xy": [float(p[0]), float(p[1])]}
            for i, p in enumerate(placed)]


def spawn_scene(config: dict) -> Scene:
    """Build the initial scene from a config dict (see load_scene_config).

    Raises ConfigError when initial cube footprints overlap.
    """
    side = float(config.get("side", 0.05))
    table_height = float(config.get("table_height", 0.0))
    cube_cfgs = config.get("cubes")
    if not cube_cfgs:
        raise ConfigError("scene config must list cubes")
    cubes = []
    for c in cube_cfgs:
        xy = c.get("xy")
        if xy is None or len(xy) != 2:
            raise ConfigError(f"cube {c.get('id')!r} needs an xy pair")
        pos = np.array([float(xy[0]), float(xy[1]), table_height + side / 2.0])
        cubes.append(Cube(id=str(c["id"]), side=side, pose=Pose(pos)))
    ids = [c.id for c in cubes]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate cube ids")
    for i, a in enumerate(cubes):
        for b in cubes[i + 1:]:
            if _footprint_overlap(a.pose.position[:2], b.pose.position[:2], side) > 0.0:
                raise ConfigError(f"initial cubes {a.id!r} and {b.id!r} overlap")
    target_order = tuple(config.get("target_order", ids))
    for cid in target_order:
        if cid not in ids:
            raise ConfigError(f"target_order references unknown cube {cid!r}")
    return Scene(
        cubes=tuple(cubes),
        table_height=table_height,
        target_order=target_order,
        target_base_xy=np.asarray(config.get("target_base_xy", cubes[0].pose.position[:2]),
                                  dtype=float),
        grasp_radius=float(config.get("grasp_radius", 0.04)),
        place_tolerance_xy=float(config.get("place_tolerance_xy", 0.025)),
    )


def load_scene_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid scene config JSON: {exc}") from exc


def _is_free(scene: Scene, cube: Cube) -> bool:
    """A cube is grabbable when nothing rests on it and it is not held."""
    if cube.support == SUPPORT_GRIPPER:
        return False
    return all(c.support != support_cube(cube.id) for c in scene.cubes)


def step(scene: Scene, wrist_pose: Pose, gripper) -> Scene:
    """Advance the scene one tick: pure function of (scene, wrist, gripper).

    Open->closed grabs the nearest free cube within grasp_radius (closing on
    empty space does nothing). Closed->open drops the held cube straight down
    onto the highest support overlapping at least half its footprint. A held
    cube tracks the wrist rigidly, clamped above the table.
    """
    closing = (getattr(gripper, "value", gripper) == "closed")
    wrist_p = wrist_pose.position
    wrist_r = quat_to_matrix(wrist_pose.orientation)
    cubes = list(scene.cubes)
    attached_id = scene.attached_id
    attach_offset = scene.attach_offset

    # held cube follows the wrist
    if attached_id is not None:
        idx = next(i for i, c in enumerate(cubes) if c.id == attached_id)
        held = cubes[idx]
        pos = wrist_p + wrist_r @ np.asarray(attach_offset)
        z_min = scene.table_height + held.side / 2.0
        pos = np.array([pos[0], pos[1], max(pos[2], z_min)])
        cubes[idx] = replace(held, pose=Pose(pos), support=SUPPORT_GRIPPER)

    if closing and not scene.gripper_closed and attached_id is None:
        # grasp attempt
        best, best_dist = None, None
        for i, cube in enumerate(cubes):
            if not _is_free(scene, cube):
                continue
            dist = float(np.linalg.norm(cube.pose.position - wrist_p))
            if dist <= scene.grasp_radius and (best_dist is None or dist < best_dist):
                best, best_dist = i, dist
        if best is not None:
            cube = cubes[best]
            offset = wrist_r.T @ (cube.pose.position - wrist_p)
            cubes[best] = replace(cube, support=SUPPORT_GRIPPER)
            attached_id = cube.id
            attach_offset = (float(offset[0]), float(offset[1]), float(offset[2]))

    elif not closing and scene.gripper_closed and attached_id is not None:
        # release: settle straight down onto the best support
        idx = next(i for i, c in enumerate(cubes) if c.id == attached_id)
        dropped = cubes[idx]
        xy = dropped.pose.position[:2]
        support = SUPPORT_TABLE
        surface_z = scene.table_height
        for other in cubes:
            if other.id == dropped.id:
                continue
            overlap = _footprint_overlap(xy, other.pose.position[:2], dropped.side)
            if overlap >= _OVERLAP_MIN and other.top_z > surface_z:
                support = support_cube(other.id)
                surface_z = other.top_z
        pos = np.array([xy[0], xy[1], surface_z + dropped.side / 2.0])
        cubes[idx] = replace(dropped, pose=Pose(pos), support=support)
        attached_id = None
        attach_offset = None

    return replace(scene, cubes=tuple(cubes), gripper_closed=closing,
                   attached_id=attached_id, attach_offset=attach_offset)


def count_stacked(scene: Scene) -> int:
    """Longest correct prefix of the target order at the target base spot.

    Cube k must sit within place_tolerance_xy of target_base_xy and rest on
    the table (k = 0) or on cube k-1. Raises EvalError while a cube is still
    held (score after playback ends).
    """
    if scene.attached_id is not None:
        raise EvalError("cannot score while a cube is attached to the gripper")
    count = 0
    for k, cube_id in enumerate(scene.target_order):
        cube = scene.cube(cube_id)
        offset = float(np.linalg.norm(cube.pose.position[:2] - scene.target_base_xy))
        if offset > scene.place_tolerance_xy:
            break
        expected = SUPPORT_TABLE if k == 0 else support_cube(scene.target_order[k - 1])
        if cube.support != expected:
            break
        count += 1
    return count


def scene_payload(scene: Scene) -> dict:
    """JSON-serializable snapshot for scene telemetry."""
    return {
        "cubes": [{
            "id": c.id,
            "side": c.side,
            "position": [float(v) for v in c.pose.position],
            "support": c.support,
        } for c in scene.cubes],
        "attached": scene.attached_id,
        "target_order": list(scene.target_order),
        "target_base_xy": [float(v) for v in scene.target_base_xy],
    }
