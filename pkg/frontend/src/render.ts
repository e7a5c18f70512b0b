// Canvas drawing for the top-down map and the altitude strip. Only the
// small 2D-context surface below is used, so tests can substitute a
// recording stub where jsdom has no real canvas.

import { ArenaMessage, FrameMessage } from "./protocol";

export interface Canvas2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  fill(): void;
  stroke(): void;
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
}

export function drawMap(
  ctx: Canvas2D,
  width: number,
  height: number,
  arena: ArenaMessage,
  frame: FrameMessage | null,
): void {
  const sx = width / arena.width;
  const sy = height / arena.depth;
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, width, height);

  ctx.fillStyle = "#2f6f4f";
  for (const target of arena.targets) {
    ctx.beginPath();
    ctx.arc(target.center[0] * sx, height - target.center[1] * sy, target.radius * sx, 0, Math.PI * 2);
    ctx.fill();
  }

  ctx.fillStyle = "#5a5f6d";
  for (const ob of arena.obstacles) {
    const w = 2 * ob.half_extents[0] * sx;
    const h = 2 * ob.half_extents[1] * sy;
    ctx.fillRect(ob.center[0] * sx - w / 2, height - ob.center[1] * sy - h / 2, w, h);
  }

  if (!frame) return;
  ctx.fillStyle = "#ffd24d";
  for (const robot of frame.robots) {
    ctx.beginPath();
    ctx.arc(robot.p[0] * sx, height - robot.p[1] * sy, 3.5, 0, Math.PI * 2);
    ctx.fill();
    // short velocity tick
    ctx.strokeStyle = "#ffd24d";
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(robot.p[0] * sx, height - robot.p[1] * sy);
    ctx.lineTo((robot.p[0] + robot.v[0]) * sx, height - (robot.p[1] + robot.v[1]) * sy);
    ctx.stroke();
  }
}

export function drawAltitudeStrip(
  ctx: Canvas2D,
  width: number,
  height: number,
  maxAltitude: number,
  frame: FrameMessage | null,
): void {
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, width, height);
  ctx.strokeStyle = "#39404f";
  ctx.lineWidth = 1;
  ctx.strokeRect(0.5, 0.5, width - 1, height - 1);
  if (!frame) return;
  ctx.fillStyle = "#7cc4ff";
  for (const robot of frame.robots) {
    const y = height - (robot.p[2] / maxAltitude) * height;
    ctx.beginPath();
    ctx.arc(width / 2, y, 3, 0, Math.PI * 2);
    ctx.fill();
  }
}
