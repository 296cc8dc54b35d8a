// Top-down scene rendering. The scene is first assembled into a plain draw
// list (pure, unit-testable), then painted onto a 2D canvas. The view tracks
// the robot with a fixed metres-to-pixels scale.

import type { MapFrame, StateFrame } from "./protocol";
import { StripSeries, UiState } from "./state";

export const SCALE = 80; // px per metre
const TRAIL = ["#2e7d32", "#c62828"]; // commanded green, optimized red

export interface Camera {
  cx: number; // world x at canvas centre
  cy: number;
  width: number;
  height: number;
}

export function worldToScreen(cam: Camera, x: number, y: number): [number, number] {
  // world +x right, +y up
  return [cam.width / 2 + (x - cam.cx) * SCALE,
          cam.height / 2 - (y - cam.cy) * SCALE];
}

export type DrawOp =
  | { kind: "circle"; x: number; y: number; r: number; stroke?: string;
      fill?: string; width?: number }
  | { kind: "polyline"; points: [number, number][]; stroke: string;
      width: number; layer: "commanded" | "planned" | "other" }
  | { kind: "arrow"; x0: number; y0: number; x1: number; y1: number;
      stroke: string }
  | { kind: "text"; x: number; y: number; text: string; fill: string };

// Assemble everything except the heatmap (painted separately from a cached
// offscreen canvas) into screen-space primitives.
export function buildSceneOps(state: StateFrame, cam: Camera): DrawOp[] {
  const ops: DrawOp[] = [];

  // commanded trajectory: green; collapses to a point marker under zero cmd
  const cmdPts = state.commanded.map(([x, y]) => worldToScreen(cam, x, y));
  ops.push({ kind: "polyline", points: cmdPts, stroke: TRAIL[0], width: 2,
             layer: "commanded" });

  // optimized trajectory: red
  const planPts = state.planned.map(([x, y]) => worldToScreen(cam, x, y));
  ops.push({ kind: "polyline", points: planPts, stroke: TRAIL[1], width: 2,
             layer: "planned" });

  // sphere decomposition footprint
  for (const s of state.spheres) {
    const [sx, sy] = worldToScreen(cam, s.x, s.y);
    ops.push({ kind: "circle", x: sx, y: sy, r: s.r * SCALE,
               stroke: "#1565c0", width: 1.5 });
  }

  // obstacles with velocity arrows (arrow length = 1 s of motion)
  for (const ob of state.obstacles) {
    const [ox, oy] = worldToScreen(cam, ob.x, ob.y);
    ops.push({ kind: "circle", x: ox, y: oy, r: ob.r * SCALE,
               stroke: "#6a1b9a", fill: "rgba(106,27,154,0.25)", width: 2 });
    const speed = Math.hypot(ob.vx, ob.vy);
    if (speed > 1e-3) {
      const [tx, ty] = worldToScreen(cam, ob.x + ob.vx, ob.y + ob.vy);
      ops.push({ kind: "arrow", x0: ox, y0: oy, x1: tx, y1: ty,
                 stroke: "#6a1b9a" });
    }
  }

  // heading tick on the base
  const [bx, by] = worldToScreen(cam, state.base.x, state.base.y);
  const hx = state.base.x + 0.35 * Math.cos(state.base.yaw);
  const hy = state.base.y + 0.35 * Math.sin(state.base.yaw);
  const [hxs, hys] = worldToScreen(cam, hx, hy);
  ops.push({ kind: "circle", x: bx, y: by, r: 4, fill: "#000" });
  ops.push({ kind: "arrow", x0: bx, y0: by, x1: hxs, y1: hys, stroke: "#000" });
  return ops;
}

// Distance-field heatmap: blue far, white at the safety margin, red inside.
export function heatmapColor(d: number): [number, number, number] {
  if (d <= 0) return [198, 40, 40];
  if (d >= 2.0) return [227, 242, 253];
  const t = d / 2.0;
  return [Math.round(198 + (227 - 198) * t),
          Math.round(40 + (242 - 40) * t),
          Math.round(40 + (253 - 40) * t)];
}

export function renderHeatmap(map: MapFrame,
                              makeCanvas: (w: number, h: number) => any): any {
  const [nx, ny] = map.dims_xy;
  const canvas = makeCanvas(nx, ny);
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(nx, ny);
  for (let j = 0; j < ny; j++) {
    for (let i = 0; i < nx; i++) {
      const d = map.distances[j * nx + i];
      const [r, g, b] = heatmapColor(d);
      // canvas rows grow downward; world y grows upward
      const px = ((ny - 1 - j) * nx + i) * 4;
      img.data[px] = r;
      img.data[px + 1] = g;
      img.data[px + 2] = b;
      img.data[px + 3] = 255;
    }
  }
  ctx.putImageData(img, 0, 0);
  return canvas;
}

export function executeOps(ctx: CanvasRenderingContext2D, ops: DrawOp[]): void {
  for (const op of ops) {
    switch (op.kind) {
      case "circle":
        ctx.beginPath();
        ctx.arc(op.x, op.y, op.r, 0, 2 * Math.PI);
        if (op.fill) {
          ctx.fillStyle = op.fill;
          ctx.fill();
        }
        if (op.stroke) {
          ctx.strokeStyle = op.stroke;
          ctx.lineWidth = op.width ?? 1;
          ctx.stroke();
        }
        break;
      case "polyline":
        if (op.points.length === 0) break;
        ctx.beginPath();
        ctx.moveTo(op.points[0][0], op.points[0][1]);
        for (const [x, y] of op.points.slice(1)) ctx.lineTo(x, y);
        ctx.strokeStyle = op.stroke;
        ctx.lineWidth = op.width;
        ctx.stroke();
        break;
      case "arrow": {
        ctx.beginPath();
        ctx.moveTo(op.x0, op.y0);
        ctx.lineTo(op.x1, op.y1);
        ctx.strokeStyle = op.stroke;
        ctx.lineWidth = 2;
        ctx.stroke();
        const ang = Math.atan2(op.y1 - op.y0, op.x1 - op.x0);
        for (const side of [-1, 1]) {
          ctx.beginPath();
          ctx.moveTo(op.x1, op.y1);
          ctx.lineTo(op.x1 - 8 * Math.cos(ang - side * 0.4),
                     op.y1 - 8 * Math.sin(ang - side * 0.4));
          ctx.stroke();
        }
        break;
      }
      case "text":
        ctx.fillStyle = op.fill;
        ctx.fillText(op.text, op.x, op.y);
        break;
    }
  }
}

export function drawStrip(ctx: CanvasRenderingContext2D, series: StripSeries,
                          x: number, y: number, w: number, h: number,
                          label: string, color: string,
                          reference?: number): void {
  ctx.strokeStyle = "#999";
  ctx.strokeRect(x, y, w, h);
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  const latest = series.latest();
  ctx.fillText(`${label}${latest !== null ? ": " + latest.toFixed(3) : ""}`,
               x + 4, y + 12);
  const pts = series.samples;
  if (pts.length < 2) return;
  const t1 = pts[pts.length - 1].t;
  const t0 = t1 - 30.0;
  let lo = Math.min(...pts.map((p) => p.value));
  let hi = Math.max(...pts.map((p) => p.value));
  if (reference !== undefined) {
    lo = Math.min(lo, reference);
    hi = Math.max(hi, reference);
  }
  if (hi - lo < 1e-6) hi = lo + 1e-6;
  const toX = (t: number) => x + ((t - t0) / 30.0) * w;
  const toY = (v: number) => y + h - ((v - lo) / (hi - lo)) * (h - 14) - 2;
  if (reference !== undefined) {
    ctx.strokeStyle = "#bbb";
    ctx.beginPath();
    ctx.moveTo(x, toY(reference));
    ctx.lineTo(x + w, toY(reference));
    ctx.stroke();
  }
  ctx.strokeStyle = color;
  ctx.beginPath();
  ctx.moveTo(toX(pts[0].t), toY(pts[0].value));
  for (const p of pts.slice(1)) ctx.lineTo(toX(p.t), toY(p.value));
  ctx.stroke();
}

export function renderFrame(ctx: CanvasRenderingContext2D, ui: UiState,
                            heatmap: any | null, wallNow: number): void {
  const W = ctx.canvas.width;
  const H = ctx.canvas.height;
  ctx.fillStyle = "#fafafa";
  ctx.fillRect(0, 0, W, H);

  if (!ui.state) {
    ctx.fillStyle = "#666";
    ctx.font = "14px sans-serif";
    ctx.fillText(ui.connected ? "waiting for state frames..."
                              : "connecting...", 20, 30);
    return;
  }
  const cam: Camera = { cx: ui.state.base.x, cy: ui.state.base.y,
                        width: W, height: H };

  if (heatmap && ui.map) {
    // blit the cached heatmap aligned to world coordinates
    const m = ui.map;
    const [x0, y0] = worldToScreen(
      cam, m.origin[0] - m.voxel_size / 2,
      m.origin[1] - m.voxel_size / 2 + m.dims_xy[1] * m.voxel_size);
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(heatmap, x0, y0, m.dims_xy[0] * m.voxel_size * SCALE,
                  m.dims_xy[1] * m.voxel_size * SCALE);
  } else {
    // no map yet: light placeholder grid
    ctx.strokeStyle = "#e0e0e0";
    for (let gx = 0; gx < W; gx += SCALE) {
      ctx.beginPath(); ctx.moveTo(gx, 0); ctx.lineTo(gx, H); ctx.stroke();
    }
    for (let gy = 0; gy < H; gy += SCALE) {
      ctx.beginPath(); ctx.moveTo(0, gy); ctx.lineTo(W, gy); ctx.stroke();
    }
  }

  executeOps(ctx, buildSceneOps(ui.state, cam));

  drawStrip(ctx, ui.minDistance, 10, H - 70, 220, 60, "min distance [m]",
            "#1565c0", 0.0);
  drawStrip(ctx, ui.solveMs, 240, H - 70, 220, 60, "solve [ms]", "#ef6c00");
  drawStrip(ctx, ui.baseHeight, 470, H - 70, 220, 60, "base z [m]", "#2e7d32",
            ui.state.base_height_nominal);

  ctx.fillStyle = "#333";
  ctx.font = "12px sans-serif";
  ctx.fillText(`t=${ui.state.t.toFixed(2)}s  cmd vx=${ui.activeCmd.vx.toFixed(2)} ` +
    `vy=${ui.activeCmd.vy.toFixed(2)} wz=${ui.activeCmd.yaw_rate.toFixed(2)}  ` +
    `min d=${ui.state.min_distance.toFixed(2)}m`, 10, 18);

  if (ui.isStale(wallNow)) {
    ctx.fillStyle = "rgba(198,40,40,0.9)";
    ctx.fillRect(W - 90, 8, 82, 22);
    ctx.fillStyle = "#fff";
    ctx.fillText("STALE", W - 70, 23);
  }
}
