import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { defaultCamera } from "../src/camera.js";
import { axisAngleQuat, quatMul, SphereControl } from "../src/drag.js";
import { SpherePose } from "../src/protocol.js";

const cam = defaultCamera(800, 600);

describe("sphere publishing cadence", () => {
  let published: SpherePose[];
  let sphere: SphereControl;

  beforeEach(() => {
    vi.useFakeTimers();
    published = [];
    sphere = new SphereControl((pose) => published.push(pose), [0.4, 0, 0.3]);
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("no drag, no traffic", () => {
    vi.advanceTimersByTime(2000);
    expect(published.length).toBe(0);
  });

  it("publishes at 30 Hz or better while dragging", () => {
    sphere.beginDrag(false);
    vi.advanceTimersByTime(1000);
    sphere.endDrag();
    expect(published.length).toBeGreaterThanOrEqual(30);
  });

  it("traffic stops after the drag ends", () => {
    sphere.beginDrag(false);
    vi.advanceTimersByTime(100);
    sphere.endDrag();
    const count = published.length;
    vi.advanceTimersByTime(2000);
    expect(published.length).toBe(count);
  });

  it("published poses track pointer motion", () => {
    sphere.beginDrag(false);
    sphere.moveBy(cam, 60, 0, false);
    vi.advanceTimersByTime(40);
    sphere.endDrag();
    const last = published[published.length - 1];
    expect(last.position).not.toEqual([0.4, 0, 0.3]);
    expect(last.position[2]).toBeCloseTo(0.3, 9); // xy plane keeps height
  });

  it("shift drags move in the vertical plane", () => {
    sphere.beginDrag(true);
    sphere.moveBy(cam, 0, -80, true);
    sphere.endDrag();
    const last = published[published.length - 1];
    expect(last.position[1]).toBeCloseTo(0, 9);
    expect(last.position[2]).toBeGreaterThan(0.3);
  });

  it("engine sync is ignored mid-drag", () => {
    sphere.beginDrag(false);
    sphere.sync([9, 9, 9]);
    expect(sphere.position[0]).not.toBe(9);
    sphere.endDrag();
    sphere.sync([0.1, 0.2, 0.3]);
    expect(sphere.position).toEqual([0.1, 0.2, 0.3]);
  });

  it("wheel rotation publishes one pose per event", () => {
    sphere.rotate(120, false);
    expect(published.length).toBe(1);
    const [w, , , z] = published[0].orientation;
    expect(Math.abs(z)).toBeGreaterThan(0); // yawed about world z
    expect(Math.hypot(...published[0].orientation)).toBeCloseTo(1, 9);
    expect(w).toBeLessThanOrEqual(1);
  });
});

describe("quaternion helpers", () => {
  it("axis-angle times inverse is identity", () => {
    const q = axisAngleQuat([0, 0, 1], 0.7);
    const qInv = axisAngleQuat([0, 0, 1], -0.7);
    const [w, x, y, z] = quatMul(q, qInv);
    expect(w).toBeCloseTo(1, 9);
    expect(Math.abs(x) + Math.abs(y) + Math.abs(z)).toBeCloseTo(0, 9);
  });

  it("composition accumulates yaw", () => {
    const q1 = axisAngleQuat([0, 0, 1], 0.3);
    const q2 = axisAngleQuat([0, 0, 1], 0.4);
    const composed = quatMul(q2, q1);
    const direct = axisAngleQuat([0, 0, 1], 0.7);
    composed.forEach((v, i) => expect(v).toBeCloseTo(direct[i], 9));
  });
});
