// Wire protocol types and validation for the teleop bridge.
// Every outgoing frame is schema-checked before send; incoming frames are
// validated before they touch the UI state.

export interface Limits {
  vx: number;
  vy: number;
  yaw_rate: number;
}

export interface HelloFrame {
  type: "hello";
  scenario: string;
  limits: Limits;
  nominal_height: number;
  control_period: number;
}

export interface SphereInfo {
  x: number;
  y: number;
  z: number;
  r: number;
}

export interface ObstacleInfo {
  id: number;
  x: number;
  y: number;
  r: number;
  vx: number;
  vy: number;
}

export interface StateFrame {
  type: "state";
  t: number;
  base: { x: number; y: number; z: number; roll: number; pitch: number; yaw: number };
  joints: number[];
  spheres: SphereInfo[];
  planned: number[][];
  commanded: number[][];
  obstacles: ObstacleInfo[];
  min_distance: number;
  penalty: number;
  base_height_nominal: number;
  cmd: { vx: number; vy: number; yaw_rate: number };
  solve_ms: number;
  limits: Limits;
}

export interface MapFrame {
  type: "map";
  t: number;
  origin: [number, number];
  voxel_size: number;
  dims_xy: [number, number];
  z_slice: number;
  distances: number[];
}

export interface CmdFrame {
  type: "cmd";
  vx: number;
  vy: number;
  yaw_rate: number;
}

export interface CtrlFrame {
  type: "ctrl";
  action: "pause" | "resume" | "reset" | "scenario";
  name?: string;
}

export type ServerFrame = HelloFrame | StateFrame | MapFrame |
  { type: "error"; message: string };

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

export function parseServerFrame(text: string): ServerFrame | null {
  let obj: any;
  try {
    obj = JSON.parse(text);
  } catch {
    return null;
  }
  if (!obj || typeof obj.type !== "string") return null;
  switch (obj.type) {
    case "hello":
      if (!obj.limits || !isFiniteNumber(obj.limits.vx)) return null;
      return obj as HelloFrame;
    case "state":
      if (!obj.base || !isFiniteNumber(obj.t) || !Array.isArray(obj.spheres) ||
          !Array.isArray(obj.planned) || !Array.isArray(obj.commanded) ||
          !Array.isArray(obj.obstacles)) return null;
      return obj as StateFrame;
    case "map":
      if (!Array.isArray(obj.distances) || !Array.isArray(obj.dims_xy) ||
          obj.distances.length !== obj.dims_xy[0] * obj.dims_xy[1]) return null;
      return obj as MapFrame;
    case "error":
      return typeof obj.message === "string" ? obj : null;
    default:
      return null;
  }
}

export function clamp(v: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, v));
}

// Build a cmd frame clamped to the server-advertised limits; returns null
// (nothing sent) when any component is non-finite.
export function makeCmdFrame(vx: number, vy: number, yawRate: number,
                             limits: Limits): CmdFrame | null {
  if (![vx, vy, yawRate].every(Number.isFinite)) return null;
  return {
    type: "cmd",
    vx: clamp(vx, -limits.vx, limits.vx),
    vy: clamp(vy, -limits.vy, limits.vy),
    yaw_rate: clamp(yawRate, -limits.yaw_rate, limits.yaw_rate),
  };
}

export function makeCtrlFrame(action: CtrlFrame["action"],
                              name?: string): CtrlFrame {
  const frame: CtrlFrame = { type: "ctrl", action };
  if (action === "scenario") frame.name = name ?? "";
  return frame;
}

// Outgoing frames must always serialize to valid protocol JSON.
export function validateOutgoing(frame: CmdFrame | CtrlFrame): boolean {
  if (frame.type === "cmd") {
    return [frame.vx, frame.vy, frame.yaw_rate].every(Number.isFinite);
  }
  if (frame.type === "ctrl") {
    if (!["pause", "resume", "reset", "scenario"].includes(frame.action)) {
      return false;
    }
    return frame.action !== "scenario" || typeof frame.name === "string";
  }
  return false;
}
