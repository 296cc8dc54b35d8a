// Cross-component contract: frames captured from the real bridge must pass
// the panel's parser and drive the scene builder end to end.
import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";
import { parseServerFrame } from "../src/protocol";
import { buildSceneOps, renderHeatmap, type Camera } from "../src/render";
import { UiState } from "../src/state";

const here = dirname(fileURLToPath(import.meta.url));
const fixtures = JSON.parse(
  readFileSync(join(here, "fixtures_frames.json"), "utf-8"));

describe("captured wire frames", () => {
  it("hello frame parses and carries limits", () => {
    const frame = parseServerFrame(JSON.stringify(fixtures.hello));
    expect(frame?.type).toBe("hello");
    if (frame?.type === "hello") {
      expect(frame.limits.vx).toBeGreaterThan(0);
      expect(frame.nominal_height).toBeGreaterThan(0.3);
    }
  });

  it("state frame parses and builds a full scene", () => {
    const frame = parseServerFrame(JSON.stringify(fixtures.state));
    expect(frame?.type).toBe("state");
    if (frame?.type !== "state") return;
    expect(frame.spheres.length).toBe(8);
    expect(frame.obstacles.length).toBe(2);
    const cam: Camera = { cx: frame.base.x, cy: frame.base.y,
                          width: 900, height: 700 };
    const ops = buildSceneOps(frame, cam);
    const layers = ops.filter((o) => o.kind === "polyline")
      .map((o: any) => o.layer);
    expect(layers).toContain("commanded");
    expect(layers).toContain("planned");
    const circles = ops.filter((o) => o.kind === "circle");
    expect(circles.length).toBeGreaterThanOrEqual(8 + 2);
  });

  it("map frame parses and renders into the heatmap", () => {
    const frame = parseServerFrame(JSON.stringify(fixtures.map));
    expect(frame?.type).toBe("map");
    if (frame?.type !== "map") return;
    let painted: any = null;
    const makeCanvas = (w: number, h: number) => ({
      width: w, height: h,
      getContext: () => ({
        createImageData: (iw: number, ih: number) =>
          ({ width: iw, height: ih, data: new Uint8ClampedArray(iw * ih * 4) }),
        putImageData: (img: any) => { painted = img; },
      }),
    });
    renderHeatmap(frame, makeCanvas);
    expect(painted.data.length).toBe(frame.dims_xy[0] * frame.dims_xy[1] * 4);
  });

  it("state frames feed the UI store", () => {
    const ui = new UiState();
    ui.connected = true;
    const frame = parseServerFrame(JSON.stringify(fixtures.state));
    if (frame?.type === "state") ui.onStateFrame(frame, 1.0);
    expect(ui.minDistance.latest()).not.toBeNull();
    expect(ui.isStale(1.1)).toBe(false);
  });
});
