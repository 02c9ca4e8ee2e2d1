/**
 * Immediate-mode canvas drawing of the latest snapshot.
 *
 * Nothing here is stateful: every frame redraws from the view model, so the
 * screen can never disagree with what the server last reported. All shapes
 * are traced in world space and pushed through the camera, which keeps the
 * y-axis flip in exactly one place.
 */

import type { Camera, Viewport } from "./camera.js";
import { worldToScreen } from "./camera.js";
import type { RobotView, ShowerView, Snapshot } from "./protocol.js";
import type { ViewModel } from "./state.js";
import { isStalled } from "./state.js";

const FACE_COUNT = 4;
const ARC_STEPS = 10;

function moveToWorld(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  view: Viewport,
  x: number,
  y: number,
): void {
  const p = worldToScreen(cam, view, x, y);
  ctx.moveTo(p.x, p.y);
}

function lineToWorld(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  view: Viewport,
  x: number,
  y: number,
): void {
  const p = worldToScreen(cam, view, x, y);
  ctx.lineTo(p.x, p.y);
}

function arcToWorld(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  view: Viewport,
  cx: number,
  cy: number,
  radius: number,
  a0: number,
  a1: number,
  steps = ARC_STEPS,
): void {
  for (let i = 0; i <= steps; i++) {
    const a = a0 + ((a1 - a0) * i) / steps;
    lineToWorld(ctx, cam, view, cx + radius * Math.cos(a), cy + radius * Math.sin(a));
  }
}

function circleWorld(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  view: Viewport,
  cx: number,
  cy: number,
  radius: number,
): void {
  const c = worldToScreen(cam, view, cx, cy);
  ctx.beginPath();
  ctx.arc(c.x, c.y, radius * cam.scale, 0, 2 * Math.PI);
}

function cssColor(rgb: number[] | undefined): string | null {
  if (!rgb || rgb.length < 3) {
    return null;
  }
  const [r, g, b] = rgb;
  if (r === 0 && g === 0 && b === 0) {
    return null; // unlit LED: let the body color show through
  }
  return `rgb(${r},${g},${b})`;
}

function drawArena(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  view: Viewport,
  arena: number[][],
): void {
  if (arena.length < 3) {
    return;
  }
  ctx.beginPath();
  moveToWorld(ctx, cam, view, arena[0][0], arena[0][1]);
  for (let i = 1; i < arena.length; i++) {
    lineToWorld(ctx, cam, view, arena[i][0], arena[i][1]);
  }
  ctx.closePath();
  ctx.fillStyle = "#161b22";
  ctx.fill();
  ctx.strokeStyle = "#3d4754";
  ctx.lineWidth = 2;
  ctx.stroke();
}

function drawLights(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  view: Viewport,
  snap: Snapshot,
): void {
  for (const light of snap.lights) {
    const c = worldToScreen(cam, view, light.x, light.y);
    const glow = Math.max(0.12, Math.min(0.5, Math.sqrt(light.power))) * cam.scale;
    const grad = ctx.createRadialGradient(c.x, c.y, 0, c.x, c.y, Math.max(glow, 1));
    grad.addColorStop(0, "rgba(255, 224, 130, 0.85)");
    grad.addColorStop(1, "rgba(255, 224, 130, 0)");
    ctx.fillStyle = grad;
    ctx.beginPath();
    ctx.arc(c.x, c.y, Math.max(glow, 1), 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = "#ffe082";
    ctx.beginPath();
    ctx.arc(c.x, c.y, 3, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawWalls(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  view: Viewport,
  snap: Snapshot,
): void {
  ctx.lineCap = "round";
  for (const wall of snap.walls) {
    const p1 = worldToScreen(cam, view, wall.p1[0], wall.p1[1]);
    const p2 = worldToScreen(cam, view, wall.p2[0], wall.p2[1]);
    ctx.strokeStyle = "#c9a227";
    ctx.lineWidth = 5;
    ctx.beginPath();
    ctx.moveTo(p1.x, p1.y);
    ctx.lineTo(p2.x, p2.y);
    ctx.stroke();
    ctx.fillStyle = "#c9a227";
    ctx.font = "11px system-ui, sans-serif";
    ctx.fillText(`wall ${wall.wall_id}`, (p1.x + p2.x) / 2 + 6, (p1.y + p2.y) / 2 - 6);
  }
  ctx.lineCap = "butt";
}

function drawObjects(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  view: Viewport,
  snap: Snapshot,
): void {
  for (const obj of snap.objects) {
    circleWorld(ctx, cam, view, obj.x, obj.y, obj.radius);
    ctx.fillStyle = obj.movable ? "#7a5c3e" : "#4b5563";
    ctx.fill();
    ctx.strokeStyle = "#9ca3af";
    ctx.lineWidth = 1.5;
    ctx.stroke();
    const c = worldToScreen(cam, view, obj.x, obj.y);
    ctx.fillStyle = "#d1d5db";
    ctx.font = "11px system-ui, sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(`obj ${obj.object_id}`, c.x, c.y + 4);
    ctx.textAlign = "left";
  }
}

function drawShower(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  view: Viewport,
  shower: ShowerView,
): void {
  const a0 = shower.theta - shower.cone_half_angle;
  const a1 = shower.theta + shower.cone_half_angle;
  ctx.beginPath();
  moveToWorld(ctx, cam, view, shower.x, shower.y);
  arcToWorld(ctx, cam, view, shower.x, shower.y, shower.range, a0, a1, 24);
  ctx.closePath();
  ctx.fillStyle = "rgba(124, 92, 255, 0.16)";
  ctx.fill();
  ctx.strokeStyle = "rgba(124, 92, 255, 0.65)";
  ctx.lineWidth = 1.5;
  ctx.stroke();

  circleWorld(ctx, cam, view, shower.x, shower.y, 0.05);
  ctx.fillStyle = "#7c5cff";
  ctx.fill();
  ctx.strokeStyle = "#cfc3ff";
  ctx.lineWidth = 2;
  ctx.stroke();

  // aim handle on the cone axis at full range; main.ts hit-tests the same spot
  const hx = shower.x + shower.range * Math.cos(shower.theta);
  const hy = shower.y + shower.range * Math.sin(shower.theta);
  circleWorld(ctx, cam, view, hx, hy, 0.02);
  ctx.fillStyle = "#cfc3ff";
  ctx.fill();
}

function drawRobot(
  ctx: CanvasRenderingContext2D,
  cam: Camera,
  view: Viewport,
  robot: RobotView,
  selected: boolean,
): void {
  const { x, y, theta, radius } = robot;

  circleWorld(ctx, cam, view, x, y, radius);
  ctx.fillStyle = robot.halted ? "#3a222a" : "#232c38";
  ctx.fill();

  // belly LEDs as 90-degree petals, one per face, front petal on the heading
  for (let face = 0; face < FACE_COUNT; face++) {
    const color = cssColor(robot.belly[face]);
    if (color === null) {
      continue;
    }
    const mid = theta + (face * Math.PI) / 2;
    ctx.beginPath();
    moveToWorld(ctx, cam, view, x, y);
    arcToWorld(ctx, cam, view, x, y, radius * 0.85, mid - Math.PI / 4, mid + Math.PI / 4, 6);
    ctx.closePath();
    ctx.fillStyle = color;
    ctx.fill();
  }

  circleWorld(ctx, cam, view, x, y, radius);
  ctx.strokeStyle = robot.halted ? "#e0526f" : "#aab4c0";
  ctx.lineWidth = selected ? 1 : 1.5;
  ctx.stroke();

  ctx.beginPath();
  moveToWorld(ctx, cam, view, x, y);
  lineToWorld(ctx, cam, view, x + radius * 1.25 * Math.cos(theta), y + radius * 1.25 * Math.sin(theta));
  ctx.strokeStyle = "#e5e7eb";
  ctx.lineWidth = 1.5;
  ctx.stroke();

  const head = cssColor(robot.head_led);
  if (head !== null) {
    circleWorld(ctx, cam, view, x, y, Math.max(radius * 0.28, 0.004));
    ctx.fillStyle = head;
    ctx.fill();
  }

  if (selected) {
    circleWorld(ctx, cam, view, x, y, radius + 0.012);
    ctx.strokeStyle = "#4cc2ff";
    ctx.lineWidth = 2;
    ctx.stroke();
  }
}

export interface AimPreview {
  x: number;
  y: number;
  theta: number;
  range: number;
}

/** Redraw the whole scene for the current frame. */
export function drawScene(
  ctx: CanvasRenderingContext2D,
  view: Viewport,
  model: ViewModel,
  cam: Camera,
  now: number,
  aimPreview: AimPreview | null = null,
): void {
  ctx.fillStyle = "#0d1117";
  ctx.fillRect(0, 0, view.width, view.height);

  const snap = model.snapshot;
  if (snap === null) {
    ctx.fillStyle = "#8b949e";
    ctx.font = "14px system-ui, sans-serif";
    ctx.fillText("waiting for snapshot…", 16, 28);
    return;
  }

  drawArena(ctx, cam, view, snap.arena);
  drawLights(ctx, cam, view, snap);
  drawWalls(ctx, cam, view, snap);
  drawObjects(ctx, cam, view, snap);
  if (snap.shower !== null) {
    drawShower(ctx, cam, view, snap.shower);
  }
  for (const robot of snap.robots) {
    drawRobot(ctx, cam, view, robot, robot.id === model.selected);
  }

  if (aimPreview !== null) {
    // drag affordance only: shows where the gesture will put the cone axis
    ctx.setLineDash([6, 4]);
    ctx.beginPath();
    moveToWorld(ctx, cam, view, aimPreview.x, aimPreview.y);
    lineToWorld(
      ctx,
      cam,
      view,
      aimPreview.x + aimPreview.range * Math.cos(aimPreview.theta),
      aimPreview.y + aimPreview.range * Math.sin(aimPreview.theta),
    );
    ctx.strokeStyle = "#cfc3ff";
    ctx.lineWidth = 1.5;
    ctx.stroke();
    ctx.setLineDash([]);
  }

  if (isStalled(model, now)) {
    ctx.fillStyle = "#da3633";
    ctx.fillRect(12, 12, 84, 26);
    ctx.fillStyle = "#ffffff";
    ctx.font = "bold 13px system-ui, sans-serif";
    ctx.fillText("STALLED", 22, 30);
  }
}
