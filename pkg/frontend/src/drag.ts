// Pointer-driven sphere control. Drags translate the sphere on a work plane
// (hold Shift for the vertical xz plane); the wheel rotates it about z, or
// about the horizontal axis with Shift. Poses are published on a fixed timer
// only while a drag is active, so an idle UI generates no sphere traffic.

import { Camera, screenDeltaToWorld, WorkPlane } from "./camera.js";
import { SpherePose } from "./protocol.js";

export type Quat = [number, number, number, number];

export function quatMul(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

export function axisAngleQuat(axis: [number, number, number], angle: number): Quat {
  const h = angle / 2;
  const s = Math.sin(h);
  return [Math.cos(h), axis[0] * s, axis[1] * s, axis[2] * s];
}

export interface SpherePublisher {
  (pose: SpherePose): void;
}

export class SphereControl {
  position: [number, number, number];
  orientation: Quat = [1, 0, 0, 0];
  dragging = false;
  plane: WorkPlane = "xy";

  private publish: SpherePublisher;
  private intervalMs: number;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(publish: SpherePublisher, start: [number, number, number],
              publishHz = 30) {
    this.publish = publish;
    this.position = [...start] as [number, number, number];
    this.intervalMs = Math.floor(1000 / publishHz);
  }

  pose(): SpherePose {
    return { position: [...this.position] as [number, number, number],
             orientation: [...this.orientation] as Quat };
  }

  /** Adopt the engine's sphere position while the user is not interacting. */
  sync(position: [number, number, number]): void {
    if (!this.dragging) this.position = [...position] as [number, number, number];
  }

  beginDrag(shiftKey: boolean): void {
    this.plane = shiftKey ? "xz" : "xy";
    this.dragging = true;
    if (this.timer === null) {
      this.timer = setInterval(() => this.publish(this.pose()), this.intervalMs);
    }
    this.publish(this.pose());
  }

  moveBy(cam: Camera, duPx: number, dvPx: number, shiftKey: boolean): void {
    if (!this.dragging) return;
    this.plane = shiftKey ? "xz" : "xy";
    const [dx, dy, dz] = screenDeltaToWorld(cam, duPx, dvPx, this.plane);
    this.position = [this.position[0] + dx, this.position[1] + dy, this.position[2] + dz];
  }

  endDrag(): void {
    if (!this.dragging) return;
    this.dragging = false;
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
    this.publish(this.pose()); // final settle pose
  }

  /** Wheel rotation gizmo: yaw about z, pitch about y with Shift. */
  rotate(deltaY: number, shiftKey: boolean): void {
    const angle = -deltaY * 0.002;
    const axis: [number, number, number] = shiftKey ? [0, 1, 0] : [0, 0, 1];
    this.orientation = quatMul(axisAngleQuat(axis, angle), this.orientation);
    const n = Math.hypot(...this.orientation);
    this.orientation = this.orientation.map((v) => v / n) as Quat;
    this.publish(this.pose());
  }
}
