import { describe, expect, it } from "vitest";
import {
  makeCmdFrame,
  makeCtrlFrame,
  parseServerFrame,
  validateOutgoing,
} from "../src/protocol";

const limits = { vx: 1.0, vy: 0.5, yaw_rate: 1.0 };

describe("parseServerFrame", () => {
  it("accepts a well-formed state frame", () => {
    const frame = {
      type: "state", t: 1.0,
      base: { x: 0, y: 0, z: 0.5, roll: 0, pitch: 0, yaw: 0 },
      joints: new Array(12).fill(0),
      spheres: [], planned: [[0, 0]], commanded: [[0, 0]], obstacles: [],
      min_distance: 1.0, penalty: 0, base_height_nominal: 0.5,
      cmd: { vx: 0, vy: 0, yaw_rate: 0 }, solve_ms: 10, limits,
    };
    expect(parseServerFrame(JSON.stringify(frame))?.type).toBe("state");
  });

  it("rejects garbage and unknown types", () => {
    expect(parseServerFrame("not json")).toBeNull();
    expect(parseServerFrame("{}")).toBeNull();
    expect(parseServerFrame(JSON.stringify({ type: "nope" }))).toBeNull();
  });

  it("rejects a map frame whose payload size disagrees with dims", () => {
    const bad = { type: "map", t: 0, origin: [0, 0], voxel_size: 0.1,
                  dims_xy: [3, 2], z_slice: 0.5, distances: [1, 2, 3] };
    expect(parseServerFrame(JSON.stringify(bad))).toBeNull();
    const good = { ...bad, distances: [1, 2, 3, 4, 5, 6] };
    expect(parseServerFrame(JSON.stringify(good))?.type).toBe("map");
  });
});

describe("makeCmdFrame", () => {
  it("clamps to the advertised limits", () => {
    const f = makeCmdFrame(5, -3, 0.2, limits)!;
    expect(f.vx).toBe(limits.vx);
    expect(f.vy).toBe(-limits.vy);
    expect(f.yaw_rate).toBeCloseTo(0.2);
  });

  it("refuses non-finite components", () => {
    expect(makeCmdFrame(NaN, 0, 0, limits)).toBeNull();
    expect(makeCmdFrame(0, Infinity, 0, limits)).toBeNull();
  });
});

describe("validateOutgoing", () => {
  it("accepts valid cmd and ctrl frames", () => {
    expect(validateOutgoing(makeCmdFrame(0.2, 0, 0, limits)!)).toBe(true);
    expect(validateOutgoing(makeCtrlFrame("pause"))).toBe(true);
    expect(validateOutgoing(makeCtrlFrame("scenario", "corridor"))).toBe(true);
  });

  it("rejects malformed frames", () => {
    expect(validateOutgoing({ type: "cmd", vx: NaN, vy: 0, yaw_rate: 0 }))
      .toBe(false);
    expect(validateOutgoing({ type: "ctrl", action: "explode" } as never))
      .toBe(false);
  });
});
