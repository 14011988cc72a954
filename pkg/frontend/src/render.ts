// Canvas renderer: table grid, cubes, robot link skeleton, and the
// interaction sphere, drawn from the latest immutable snapshots.

import { Camera, depthOf, worldToScreen } from "./camera.js";
import { SceneMsg, TelemetryMsg } from "./protocol.js";
import { SphereControl } from "./drag.js";

const CUBE_COLORS: Record<string, string> = {
  red: "#d9534f", green: "#5cb85c", blue: "#428bca", yellow: "#f0ad4e",
};

function cubeColor(id: string): string {
  return CUBE_COLORS[id] ?? "#b38bd4";
}

export function drawFrame(ctx: CanvasRenderingContext2D, cam: Camera,
                          telemetry: TelemetryMsg | null, scene: SceneMsg | null,
                          sphere: SphereControl): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, width, height);

  drawTable(ctx, cam);
  if (scene) drawTargetMarker(ctx, cam, scene);
  if (scene) drawCubes(ctx, cam, scene);
  if (telemetry?.link_positions) drawSkeleton(ctx, cam, telemetry.link_positions);
  drawSphere(ctx, cam, sphere);
}

function drawTable(ctx: CanvasRenderingContext2D, cam: Camera): void {
  ctx.strokeStyle = "#2a3242";
  ctx.lineWidth = 1;
  for (let gx = 0; gx <= 8; gx++) {
    line(ctx, cam, [0.15 + gx * 0.06, -0.3, 0], [0.15 + gx * 0.06, 0.3, 0]);
  }
  for (let gy = 0; gy <= 10; gy++) {
    line(ctx, cam, [0.15, -0.3 + gy * 0.06, 0], [0.63, -0.3 + gy * 0.06, 0]);
  }
}

function line(ctx: CanvasRenderingContext2D, cam: Camera,
              a: [number, number, number], b: [number, number, number]): void {
  const [ax, ay] = worldToScreen(cam, a);
  const [bx, by] = worldToScreen(cam, b);
  ctx.beginPath();
  ctx.moveTo(ax, ay);
  ctx.lineTo(bx, by);
  ctx.stroke();
}

function drawTargetMarker(ctx: CanvasRenderingContext2D, cam: Camera,
                          scene: SceneMsg): void {
  const [tx, ty] = scene.target_base_xy;
  const [sx, sy] = worldToScreen(cam, [tx, ty, 0.001]);
  ctx.strokeStyle = "#8899bb";
  ctx.setLineDash([4, 3]);
  ctx.beginPath();
  ctx.arc(sx, sy, 14, 0, Math.PI * 2);
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.fillStyle = "#8899bb";
  ctx.font = "11px sans-serif";
  ctx.fillText("stack here", sx + 16, sy + 4);
}

function drawCubes(ctx: CanvasRenderingContext2D, cam: Camera, scene: SceneMsg): void {
  const ordered = [...scene.cubes].sort(
    (a, b) => depthOf(cam, a.position) - depthOf(cam, b.position));
  for (const cube of ordered) {
    const h = cube.side / 2;
    const [x, y, z] = cube.position;
    // top face + two visible sides of an axis-aligned cube
    const top: [number, number, number][] = [
      [x - h, y - h, z + h], [x + h, y - h, z + h],
      [x + h, y + h, z + h], [x - h, y + h, z + h]];
    const front: [number, number, number][] = [
      [x + h, y - h, z - h], [x + h, y + h, z - h],
      [x + h, y + h, z + h], [x + h, y - h, z + h]];
    const side: [number, number, number][] = [
      [x - h, y + h, z - h], [x + h, y + h, z - h],
      [x + h, y + h, z + h], [x - h, y + h, z + h]];
    const base = cubeColor(cube.id);
    poly(ctx, cam, front, shade(base, 0.65));
    poly(ctx, cam, side, shade(base, 0.8));
    poly(ctx, cam, top, base);
    if (cube.id === scene.attached) {
      poly(ctx, cam, top, "rgba(255,255,255,0.35)");
    }
  }
}

function poly(ctx: CanvasRenderingContext2D, cam: Camera,
              pts: [number, number, number][], fill: string): void {
  ctx.beginPath();
  pts.forEach((p, i) => {
    const [sx, sy] = worldToScreen(cam, p);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  });
  ctx.closePath();
  ctx.fillStyle = fill;
  ctx.fill();
  ctx.strokeStyle = "rgba(0,0,0,0.4)";
  ctx.stroke();
}

function shade(hex: string, factor: number): string {
  const n = parseInt(hex.slice(1), 16);
  const r = Math.round(((n >> 16) & 255) * factor);
  const g = Math.round(((n >> 8) & 255) * factor);
  const b = Math.round((n & 255) * factor);
  return `rgb(${r},${g},${b})`;
}

function drawSkeleton(ctx: CanvasRenderingContext2D, cam: Camera,
                      links: [number, number, number][]): void {
  ctx.strokeStyle = "#e8e8f0";
  ctx.lineWidth = 4;
  ctx.lineJoin = "round";
  ctx.beginPath();
  links.forEach((p, i) => {
    const [sx, sy] = worldToScreen(cam, p);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  });
  ctx.stroke();
  ctx.lineWidth = 1;
  for (const p of links) {
    const [sx, sy] = worldToScreen(cam, p);
    ctx.beginPath();
    ctx.arc(sx, sy, 5, 0, Math.PI * 2);
    ctx.fillStyle = "#6fb3ff";
    ctx.fill();
  }
}

function drawSphere(ctx: CanvasRenderingContext2D, cam: Camera,
                    sphere: SphereControl): void {
  const [sx, sy] = worldToScreen(cam, sphere.position);
  ctx.beginPath();
  ctx.arc(sx, sy, sphereRadiusPx(), 0, Math.PI * 2);
  ctx.fillStyle = sphere.dragging ? "rgba(220,220,230,0.85)" : "rgba(170,170,185,0.6)";
  ctx.fill();
  ctx.strokeStyle = "#ffffff";
  ctx.stroke();
  // orientation tick so wheel rotation is visible
  const [w, qx, qy, qz] = sphere.orientation;
  const dirWorld: [number, number, number] = [
    1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy + w * qz), 2 * (qx * qz - w * qy)];
  const tip: [number, number, number] = [
    sphere.position[0] + dirWorld[0] * 0.05,
    sphere.position[1] + dirWorld[1] * 0.05,
    sphere.position[2] + dirWorld[2] * 0.05];
  ctx.strokeStyle = "#ffd166";
  ctx.lineWidth = 2;
  line(ctx, cam, sphere.position, tip);
  ctx.lineWidth = 1;
}

export function sphereRadiusPx(): number {
  return 12;
}

export function hitTestSphere(cam: Camera, sphere: SphereControl,
                              px: number, py: number): boolean {
  const [sx, sy] = worldToScreen(cam, sphere.position);
  return Math.hypot(px - sx, py - sy) <= sphereRadiusPx() + 6;
}
