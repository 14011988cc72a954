// Fixed orthographic three-quarter view of the workspace, plus the inverse
// mapping that turns pointer deltas into world motion on a chosen work plane.

export type WorkPlane = "xy" | "xz";

export interface Camera {
  azimuth: number;   // rad, rotation of the viewpoint about world z
  elevation: number; // rad, angle above the horizon
  scale: number;     // px per meter
  cx: number;        // screen center px
  cy: number;
  focus: [number, number, number]; // world point at the screen center
}

export function defaultCamera(width: number, height: number): Camera {
  return {
    azimuth: Math.PI / 5,
    elevation: Math.PI / 5.5,
    scale: Math.min(width, height) * 0.85,
    cx: width / 2,
    cy: height * 0.62,
    focus: [0.42, 0.0, 0.12],
  };
}

export function worldToScreen(cam: Camera, p: [number, number, number]): [number, number] {
  const x = p[0] - cam.focus[0];
  const y = p[1] - cam.focus[1];
  const z = p[2] - cam.focus[2];
  const ca = Math.cos(cam.azimuth), sa = Math.sin(cam.azimuth);
  const u = -sa * x + ca * y;
  const v = -Math.sin(cam.elevation) * (ca * x + sa * y) + Math.cos(cam.elevation) * z;
  return [cam.cx + cam.scale * u, cam.cy - cam.scale * v];
}

export function depthOf(cam: Camera, p: [number, number, number]): number {
  // larger = closer to the viewer; used for painter's-algorithm ordering
  const ca = Math.cos(cam.azimuth), sa = Math.sin(cam.azimuth);
  return ca * p[0] + sa * p[1] + Math.tan(cam.elevation) * p[2];
}

// Invert a screen-space delta into world motion constrained to a work plane.
export function screenDeltaToWorld(cam: Camera, duPx: number, dvPx: number,
                                   plane: WorkPlane): [number, number, number] {
  const du = duPx / cam.scale;
  const dv = -dvPx / cam.scale; // screen y grows downward
  const ca = Math.cos(cam.azimuth), sa = Math.sin(cam.azimuth);
  const se = Math.sin(cam.elevation), ce = Math.cos(cam.elevation);
  if (plane === "xy") {
    // [ -sa     ca    ] [dx]   [du]
    // [ -se*ca  -se*sa ] [dy] = [dv]
    const a = -sa, b = ca, c = -se * ca, d = -se * sa;
    const det = a * d - b * c; // = se, nonzero for any raised viewpoint
    return [(du * d - b * dv) / det, (a * dv - du * c) / det, 0];
  }
  // xz plane (dy = 0): du = -sa*dx ; dv = -se*ca*dx + ce*dz
  if (Math.abs(sa) < 1e-6) {
    // looking straight along y: horizontal pointer motion maps to world y
    return [0, du / ca, dv / ce];
  }
  const dx = du / -sa;
  const dz = (dv + se * ca * dx) / ce;
  return [dx, 0, dz];
}
