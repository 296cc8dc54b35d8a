import { describe, expect, it } from "vitest";
import type { StateFrame } from "../src/protocol";
import { STALE_AFTER, StripSeries, UiState } from "../src/state";

function stateFrame(t: number, overrides: Partial<StateFrame> = {}): StateFrame {
  return {
    type: "state", t,
    base: { x: 0, y: 0, z: 0.5, roll: 0, pitch: 0, yaw: 0 },
    joints: new Array(12).fill(0),
    spheres: [], planned: [[0, 0]], commanded: [[0, 0]], obstacles: [],
    min_distance: 1.2, penalty: 0, base_height_nominal: 0.5,
    cmd: { vx: 0, vy: 0, yaw_rate: 0 }, solve_ms: 42,
    limits: { vx: 1, vy: 1, yaw_rate: 1 },
    ...overrides,
  };
}

describe("StripSeries", () => {
  it("keeps a sliding 30 s window", () => {
    const s = new StripSeries();
    for (let t = 0; t <= 100; t += 1) s.push(t, t);
    expect(s.samples[0].t).toBeGreaterThanOrEqual(70);
    expect(s.latest()).toBe(100);
  });

  it("ignores replayed (non-advancing) samples", () => {
    const s = new StripSeries();
    s.push(1.0, 5);
    s.push(1.0, 7);
    expect(s.samples.length).toBe(1);
    expect(s.latest()).toBe(5);
  });
});

describe("UiState staleness", () => {
  it("is fresh right after a state frame and stale after the budget", () => {
    const ui = new UiState();
    ui.connected = true;
    expect(ui.isStale(0)).toBe(false); // nothing on screen yet
    ui.onStateFrame(stateFrame(1.0), 10.0);
    expect(ui.isStale(10.2)).toBe(false);
    expect(ui.isStale(10.0 + STALE_AFTER + 0.05)).toBe(true);
  });

  it("flags a disconnect immediately", () => {
    const ui = new UiState();
    ui.connected = true;
    ui.onStateFrame(stateFrame(1.0), 10.0);
    ui.connected = false;
    expect(ui.isStale(10.1)).toBe(true);
  });

  it("feeds the strip charts from state frames", () => {
    const ui = new UiState();
    ui.onStateFrame(stateFrame(1.0), 0);
    ui.onStateFrame(stateFrame(1.05, { min_distance: 0.8, solve_ms: 50 }), 0.05);
    expect(ui.minDistance.latest()).toBeCloseTo(0.8);
    expect(ui.solveMs.latest()).toBe(50);
    expect(ui.baseHeight.latest()).toBeCloseTo(0.5);
  });
});
