// World rendering on a plain 2D canvas context. Everything drawn comes from the
// latest broadcast; the view transform keeps bodies at true scale.

import type { BodyView, StateBroadcast } from "./protocol.js";
import { ViewTransform, tableToPixel } from "./transform.js";

/** The subset of CanvasRenderingContext2D the renderer touches (stubbed in tests). */
export interface Draw2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  fill(): void;
  stroke(): void;
  setLineDash(segments: number[]): void;
  fillText(text: string, x: number, y: number): void;
}

export interface TableGeometry {
  halfWidth: number;
  halfLength: number;
  paddleRegionYMax: number;
}

const COLORS = {
  table: "#0d2137",
  wall: "#4d6a8a",
  divider: "#31506e",
  paddle: "#e8554d",
  puck: "#f5d547",
  block: "#7bc47f",
  goal: "#49a8de",
  text: "#dce6f0",
  record: "#ff3333",
  velocity: "#9ad1ff",
};

function drawDisk(ctx: Draw2D, body: BodyView, color: string, view: ViewTransform): void {
  const [px, py] = tableToPixel(body.pos[0], body.pos[1], view);
  ctx.beginPath();
  ctx.arc(px, py, body.radius * view.scale, 0, 2 * Math.PI);
  ctx.fillStyle = color;
  ctx.fill();
}

function drawVelocity(ctx: Draw2D, body: BodyView, view: ViewTransform): void {
  const speed = Math.hypot(body.vel[0], body.vel[1]);
  if (speed < 1e-3) return;
  const [px, py] = tableToPixel(body.pos[0], body.pos[1], view);
  const [qx, qy] = tableToPixel(body.pos[0] + body.vel[0] * 0.25,
                                body.pos[1] + body.vel[1] * 0.25, view);
  ctx.beginPath();
  ctx.moveTo(px, py);
  ctx.lineTo(qx, qy);
  ctx.strokeStyle = COLORS.velocity;
  ctx.lineWidth = 1.5;
  ctx.stroke();
}

export function renderState(
  msg: StateBroadcast,
  view: ViewTransform,
  ctx: Draw2D,
  geometry: TableGeometry,
  showVelocities = false,
): void {
  ctx.fillStyle = "#060b12";
  ctx.fillRect(0, 0, view.canvasWidth, view.canvasHeight);

  const [left, top] = tableToPixel(-geometry.halfWidth, geometry.halfLength, view);
  const [right, bottom] = tableToPixel(geometry.halfWidth, -geometry.halfLength, view);
  ctx.fillStyle = COLORS.table;
  ctx.fillRect(left, top, right - left, bottom - top);
  ctx.strokeStyle = COLORS.wall;
  ctx.lineWidth = 2;
  ctx.strokeRect(left, top, right - left, bottom - top);

  // paddle-region divider
  const [dx0, dy] = tableToPixel(-geometry.halfWidth, geometry.paddleRegionYMax, view);
  const [dx1] = tableToPixel(geometry.halfWidth, geometry.paddleRegionYMax, view);
  ctx.beginPath();
  ctx.setLineDash([6, 6]);
  ctx.moveTo(dx0, dy);
  ctx.lineTo(dx1, dy);
  ctx.strokeStyle = COLORS.divider;
  ctx.lineWidth = 1;
  ctx.stroke();
  ctx.setLineDash([]);

  if (msg.goal) {
    const [gx, gy] = tableToPixel(msg.goal.pos[0], msg.goal.pos[1], view);
    ctx.beginPath();
    ctx.arc(gx, gy, msg.goal.radius * view.scale, 0, 2 * Math.PI);
    ctx.strokeStyle = COLORS.goal;
    ctx.lineWidth = 2;
    ctx.stroke();
    if (msg.goal.vel) {
      drawVelocity(ctx, { pos: msg.goal.pos, vel: msg.goal.vel, radius: 0 }, view);
    }
  }

  for (const block of msg.objects) drawDisk(ctx, block, COLORS.block, view);
  drawDisk(ctx, msg.puck, COLORS.puck, view);
  drawDisk(ctx, msg.paddle, COLORS.paddle, view);
  if (showVelocities) {
    drawVelocity(ctx, msg.puck, view);
    drawVelocity(ctx, msg.paddle, view);
  }

  // HUD
  ctx.fillStyle = COLORS.text;
  ctx.font = "13px monospace";
  ctx.fillText(
    `${msg.task_id}  ep ${msg.episode_id}  tick ${msg.tick}`
    + `  r ${msg.reward.toFixed(3)}  return ${msg.episode_return.toFixed(2)}`
    + (msg.success ? "  SUCCESS" : ""),
    10, 18,
  );
  if (msg.recording) {
    ctx.beginPath();
    ctx.arc(view.canvasWidth - 20, 16, 6, 0, 2 * Math.PI);
    ctx.fillStyle = COLORS.record;
    ctx.fill();
    ctx.fillText("REC", view.canvasWidth - 54, 20);
  }
}

export function renderDisconnected(ctx: Draw2D, view: ViewTransform): void {
  ctx.fillStyle = "rgba(6, 11, 18, 0.8)";
  ctx.fillRect(0, 0, view.canvasWidth, view.canvasHeight);
  ctx.fillStyle = COLORS.text;
  ctx.font = "16px monospace";
  ctx.fillText("disconnected — waiting for server", view.canvasWidth / 2 - 140,
               view.canvasHeight / 2);
}
