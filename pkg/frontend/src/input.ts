// Operator input: keyboard (WASD/arrows + Q/E yaw) and a virtual joystick,
// merged into one twist and emitted as cmd frames at 10 Hz while active.
// Releasing everything sends exactly one zero-twist frame, then goes silent
// (the server holds the latest value).

import { CmdFrame, Limits, makeCmdFrame, validateOutgoing } from "./protocol";

export const EMIT_PERIOD_MS = 100; // 10 Hz

export interface InputSnapshot {
  forward: number;  // -1..1
  lateral: number;  // -1..1 (+ = left)
  yaw: number;      // -1..1 (+ = counterclockwise)
}

export class CommandInput {
  private keys = new Set<string>();
  private joystick: { x: number; y: number } | null = null; // -1..1 each
  private zeroSent = true;

  keyDown(code: string): void {
    this.keys.add(code);
  }

  keyUp(code: string): void {
    this.keys.delete(code);
  }

  setJoystick(x: number, y: number): void {
    this.joystick = {
      x: Math.max(-1, Math.min(1, x)),
      y: Math.max(-1, Math.min(1, y)),
    };
  }

  releaseJoystick(): void {
    this.joystick = null;
  }

  snapshot(): InputSnapshot {
    let forward = 0;
    let lateral = 0;
    let yaw = 0;
    const k = this.keys;
    if (k.has("KeyW") || k.has("ArrowUp")) forward += 1;
    if (k.has("KeyS") || k.has("ArrowDown")) forward -= 1;
    if (k.has("KeyA") || k.has("ArrowLeft")) lateral += 1;
    if (k.has("KeyD") || k.has("ArrowRight")) lateral -= 1;
    if (k.has("KeyQ")) yaw += 1;
    if (k.has("KeyE")) yaw -= 1;
    if (this.joystick) {
      forward += -this.joystick.y; // screen-up = forward
      lateral += -this.joystick.x; // screen-left = +y
    }
    return {
      forward: Math.max(-1, Math.min(1, forward)),
      lateral: Math.max(-1, Math.min(1, lateral)),
      yaw: Math.max(-1, Math.min(1, yaw)),
    };
  }

  active(): boolean {
    const s = this.snapshot();
    return s.forward !== 0 || s.lateral !== 0 || s.yaw !== 0;
  }

  // Called on the 10 Hz emit timer; returns the frame to send or null for
  // silence. Exactly one zero frame goes out after everything is released.
  tick(limits: Limits): CmdFrame | null {
    const s = this.snapshot();
    if (this.active()) {
      this.zeroSent = false;
      const frame = makeCmdFrame(s.forward * limits.vx, s.lateral * limits.vy,
                                 s.yaw * limits.yaw_rate, limits);
      return frame !== null && validateOutgoing(frame) ? frame : null;
    }
    if (!this.zeroSent) {
      this.zeroSent = true;
      return makeCmdFrame(0, 0, 0, limits);
    }
    return null;
  }
}
