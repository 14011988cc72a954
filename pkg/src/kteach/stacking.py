"""Generator for scripted pick-and-place demonstrations on the cube scene.

Produces the timestamped sphere/command event stream a human teacher would
otherwise create by dragging the wrist target: approach each cube from above,
descend, close, lift, carry to the stack, descend, open, retreat. Purely
geometric and deterministic, so the bundled "perfect stacking" script can be
regenerated bit-for-bit.
"""

import numpy as np

from .engine import ScriptEvent
from .kinematics import KinematicChain, forward_kinematics
from .scene import spawn_scene


def _segment(events: list[ScriptEvent], t_ms: int, start: np.ndarray, end: np.ndarray,
             speed: float, step_ms: int) -> tuple[int, np.ndarray]:
    """Linear sphere motion from start to end at constant speed; returns the
    time after arrival."""
    dist = float(np.linalg.norm(end - start))
    if dist < 1e-12:
        return t_ms, end
    duration = max(int(1000.0 * dist / speed), step_ms)
    steps = max(duration // step_ms, 1)
    for k in range(1, steps + 1):
        frac = k / steps
        pos = start + frac * (end - start)
        events.append(ScriptEvent(t_ms=t_ms + k * step_ms, type="sphere",
                                  position=tuple(round(float(v), 6) for v in pos)))
    return t_ms + steps * step_ms, end


def generate_stacking_script(chain: KinematicChain, scene_config: dict, *,
                             initial_q=None, speed: float = 0.30,
                             approach_height: float = 0.10,
                             settle_ms: int = 800, dwell_ms: int = 400,
                             step_ms: int = 33) -> list[ScriptEvent]:
    """Event list that picks every cube in target order and stacks it at the
    target base position.

    speed is the sphere travel speed (m/s); settle_ms is the hold time before
    each grasp/release so the servoed wrist can catch up; dwell_ms the hold
    after. The script assumes the whole scene is inside the arm's workspace.
    """
    scene = spawn_scene(scene_config)
    side = scene.cubes[0].side
    base_xy = scene.target_base_xy
    q0 = np.zeros(chain.dof) if initial_q is None else np.asarray(initial_q, dtype=float)
    home = forward_kinematics(chain, q0).position.copy()

    events: list[ScriptEvent] = []
    t = 0
    pos = home
    events.append(ScriptEvent(t_ms=0, type="sphere", position=tuple(float(v) for v in home)))

    t += settle_ms
    events.append(ScriptEvent(t_ms=t, type="command", kind="start"))
    t += dwell_ms

    for k, cube_id in enumerate(scene.target_order):
        cube = scene.cube(cube_id)
        cx, cy = float(cube.pose.position[0]), float(cube.pose.position[1])
        grasp_z = float(cube.pose.position[2])
        above_pick = np.array([cx, cy, grasp_z + approach_height])
        pick = np.array([cx, cy, grasp_z])
        stack_z = scene.table_height + side / 2.0 + k * side
        above_place = np.array([base_xy[0], base_xy[1], stack_z + approach_height])
        place = np.array([base_xy[0], base_xy[1], stack_z])

        t, pos = _segment(events, t, pos, above_pick, speed, step_ms)
        t, pos = _segment(events, t, pos, pick, speed * 0.5, step_ms)
        t += settle_ms
        events.append(ScriptEvent(t_ms=t, type="command", kind="close"))
        t += dwell_ms
        t, pos = _segment(events, t, pos, above_pick, speed * 0.5, step_ms)
        t, pos = _segment(events, t, pos, above_place, speed, step_ms)
        t, pos = _segment(events, t, pos, place, speed * 0.5, step_ms)
        t += settle_ms
        events.append(ScriptEvent(t_ms=t, type="command", kind="open"))
        t += dwell_ms
        t, pos = _segment(events, t, pos, above_place, speed * 0.5, step_ms)

    t += dwell_ms
    events.append(ScriptEvent(t_ms=t, type="command", kind="stop"))
    return events
