// Render-rate budget: a full frame against a stub 2D context must fit well
// inside the 100 ms budget of a 10 Hz loop while 20 Hz state frames stream in.
import { describe, expect, it } from "vitest";
import type { StateFrame } from "../src/protocol";
import { renderFrame } from "../src/render";
import { UiState } from "../src/state";

function stubCtx(width: number, height: number): any {
  const noop = () => undefined;
  return {
    canvas: { width, height },
    fillStyle: "", strokeStyle: "", lineWidth: 1, font: "",
    imageSmoothingEnabled: true,
    fillRect: noop, strokeRect: noop, beginPath: noop, arc: noop,
    moveTo: noop, lineTo: noop, stroke: noop, fill: noop, fillText: noop,
    drawImage: noop,
  };
}

function bigStateFrame(t: number): StateFrame {
  return {
    type: "state", t,
    base: { x: 1, y: 0.5, z: 0.5, roll: 0, pitch: 0, yaw: 0.3 },
    joints: new Array(12).fill(0.2),
    spheres: new Array(8).fill(0).map((_, i) =>
      ({ x: i * 0.1, y: 0, z: 0.5, r: 0.22 })),
    planned: new Array(21).fill(0).map((_, i) => [i * 0.02, 0]),
    commanded: new Array(21).fill(0).map((_, i) => [i * 0.02, 0.01]),
    obstacles: [
      { id: 1, x: 2, y: 1, r: 0.3, vx: 0.5, vy: 0 },
      { id: 2, x: 2, y: -1, r: 0.3, vx: -0.5, vy: 0 },
    ],
    min_distance: 0.8, penalty: 0, base_height_nominal: 0.5,
    cmd: { vx: 0.3, vy: 0, yaw_rate: 0 }, solve_ms: 45,
    limits: { vx: 1, vy: 1, yaw_rate: 1 },
  };
}

describe("render loop budget", () => {
  it("sustains >= 10 Hz with 20 Hz incoming state frames", () => {
    const ui = new UiState();
    ui.connected = true;
    const ctx = stubCtx(900, 700);
    // stream 20 Hz frames for 3 simulated seconds, rendering each tick
    const t0 = performance.now();
    let frames = 0;
    for (let k = 0; k < 60; k++) {
      ui.onStateFrame(bigStateFrame(k * 0.05), k * 0.05);
      renderFrame(ctx, ui, null, k * 0.05);
      frames += 1;
    }
    const elapsedMs = performance.now() - t0;
    const perFrame = elapsedMs / frames;
    expect(perFrame).toBeLessThan(100); // 10 Hz budget per frame
  });

  it("shows the staleness badge after a disconnect", () => {
    const ui = new UiState();
    ui.connected = true;
    ui.onStateFrame(bigStateFrame(1.0), 10.0);
    ui.connected = false;
    const texts: string[] = [];
    const ctx = stubCtx(900, 700);
    ctx.fillText = (s: string) => texts.push(s);
    renderFrame(ctx, ui, null, 10.1);
    expect(texts.some((s) => s.includes("STALE"))).toBe(true);
  });
});
